//! Union-find oracles for the component and hole primitives, and the
//! random-grid comparisons built on them.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use abpr_grid::{
    component_hole_count, components_with_holes, connected_components, Cell, Grid, Matcher,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Components as (seed value, sorted cells), ordered by seed position.
pub fn oracle_components(grid: &Grid, m: &Matcher) -> Vec<(u8, Vec<Cell>)> {
    let (rows, cols) = grid.dimensions();
    let idx = |r: usize, c: usize| (r - 1) * cols + (c - 1);
    let hit = |r: usize, c: usize| m.matches(grid.get(r, c).unwrap());
    let mut uf = UnionFind::new(rows * cols);
    for r in 1..=rows {
        for c in 1..=cols {
            if !hit(r, c) {
                continue;
            }
            if r < rows && hit(r + 1, c) {
                uf.union(idx(r, c), idx(r + 1, c));
            }
            if c < cols && hit(r, c + 1) {
                uf.union(idx(r, c), idx(r, c + 1));
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<Cell>> = BTreeMap::new();
    for r in 1..=rows {
        for c in 1..=cols {
            if hit(r, c) {
                classes.entry(uf.find(idx(r, c))).or_default().push((r, c));
            }
        }
    }
    // union by min index makes the root the row-major-first member
    classes
        .into_values()
        .map(|cells| (grid.get(cells[0].0, cells[0].1).unwrap(), cells))
        .collect()
}

/// Holes: background classes of the padded window that touch no border cell.
pub fn oracle_holes(grid: &Grid, cells: &[Cell], bg: &Matcher) -> usize {
    let min_r = cells.iter().map(|c| c.0).min().unwrap() as i64 - 1;
    let max_r = cells.iter().map(|c| c.0).max().unwrap() as i64 + 1;
    let min_c = cells.iter().map(|c| c.1).min().unwrap() as i64 - 1;
    let max_c = cells.iter().map(|c| c.1).max().unwrap() as i64 + 1;
    let members: BTreeSet<(i64, i64)> = cells.iter().map(|&(r, c)| (r as i64, c as i64)).collect();
    let value = |r: i64, c: i64| {
        if r < 1 || c < 1 || r as usize > grid.rows() || c as usize > grid.cols() {
            0
        } else {
            grid.get(r as usize, c as usize).unwrap()
        }
    };
    let is_bg = |r: i64, c: i64| !members.contains(&(r, c)) && bg.matches(value(r, c));
    let w = (max_c - min_c + 1) as usize;
    let h = (max_r - min_r + 1) as usize;
    let at = |r: i64, c: i64| (r - min_r) as usize * w + (c - min_c) as usize;
    let mut uf = UnionFind::new(h * w);
    for r in min_r..=max_r {
        for c in min_c..=max_c {
            if !is_bg(r, c) {
                continue;
            }
            if r < max_r && is_bg(r + 1, c) {
                uf.union(at(r, c), at(r + 1, c));
            }
            if c < max_c && is_bg(r, c + 1) {
                uf.union(at(r, c), at(r, c + 1));
            }
        }
    }
    let mut open = BTreeSet::new();
    let mut all = BTreeSet::new();
    for r in min_r..=max_r {
        for c in min_c..=max_c {
            if is_bg(r, c) {
                let root = uf.find(at(r, c));
                all.insert(root);
                if r == min_r || r == max_r || c == min_c || c == max_c {
                    open.insert(root);
                }
            }
        }
    }
    all.difference(&open).count()
}

pub fn random_grid(rng: &mut ChaCha8Rng, max_side: usize, palette: u8) -> Grid {
    let rows = rng.random_range(1..=max_side);
    let cols = rng.random_range(1..=max_side);
    let data: Vec<Vec<u8>> =
        (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..palette)).collect()).collect();
    Grid::from_rows(&data).unwrap()
}

pub fn random_matcher(rng: &mut ChaCha8Rng) -> Matcher {
    match rng.random_range(0..4) {
        0 => Matcher::Any,
        1 => Matcher::Nonzero,
        2 => Matcher::Color(rng.random_range(0..4)),
        _ => Matcher::values((0..4).filter(|_| rng.random_bool(0.5))),
    }
}

/// Components on `n` random grids up to 12x12 against union-find.
pub fn check_components(n: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for case in 0..n {
        let grid = random_grid(&mut rng, 12, 4);
        let m = random_matcher(&mut rng);
        let got: Vec<(u8, Vec<Cell>)> =
            connected_components(&grid, &m).into_iter().map(|c| (c.value, c.cells)).collect();
        if got != oracle_components(&grid, &m) {
            return Err(format!("case {case}: {grid:?} {m:?}"));
        }
    }
    Ok(())
}

/// Hole counts on `n` random grids against a border-flood oracle.
pub fn check_holes(n: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    for _ in 0..n {
        // sparse palettes make enclosed regions common
        let grid = random_grid(&mut rng, 12, 3);
        let m = Matcher::Color(rng.random_range(1..3));
        let bg = if rng.random_bool(0.7) { Matcher::Color(0) } else { random_matcher(&mut rng) };
        for comp in components_with_holes(&grid, &m, &bg) {
            let want = oracle_holes(&grid, &comp.cells, &bg);
            if comp.holes != Some(want) || component_hole_count(&grid, &comp.cells, &bg) != want {
                return Err(format!("{grid:?} {:?}: {:?} vs {want}", comp.cells, comp.holes));
            }
        }
    }
    Ok(())
}

/// Nonzero floods across colors; a ring has one hole; a figure eight two.
pub fn check_edge_cases() -> Result<(), String> {
    let cross = Grid::from_rows(&[[0u8, 3, 0], [1, 2, 5], [0, 4, 0]]).unwrap();
    let comps = connected_components(&cross, &Matcher::Nonzero);
    if comps.len() != 1 || comps[0].cells.len() != 5 || comps[0].value != 3 {
        return Err(format!("nonzero cross: {comps:?}"));
    }
    let grid = Grid::from_rows(&[
        [8u8, 8, 8, 0, 8, 8, 8, 8, 8],
        [8, 0, 8, 0, 8, 0, 8, 0, 8],
        [8, 8, 8, 0, 8, 8, 8, 8, 8],
    ])
    .unwrap();
    let comps = components_with_holes(&grid, &Matcher::Color(8), &Matcher::Color(0));
    let holes: Vec<Option<usize>> = comps.iter().map(|c| c.holes).collect();
    if holes != [Some(1), Some(2)] {
        return Err(format!("ring/figure eight holes {holes:?}"));
    }
    for c in &comps {
        if Some(oracle_holes(&grid, &c.cells, &Matcher::Color(0))) != c.holes {
            return Err("oracle disagrees on ring/figure eight".into());
        }
    }
    Ok(())
}
