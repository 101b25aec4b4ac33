use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, Grid};
use crate::matcher::Matcher;

/// A maximal 4-connected set of matching cells.
///
/// `value` is the color of the seed cell (the first member in row-major
/// order); `cells` are sorted row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub value: u8,
    pub cells: Vec<Cell>,
    pub holes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_row: usize,
    pub max_row: usize,
    pub min_col: usize,
    pub max_col: usize,
}

impl BBox {
    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }

    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }
}

/// Labels the 4-connected components of the cells selected by `is_match`
/// on a `rows x cols` lattice. Components come out in row-major order of
/// their seed, each with its cells sorted row-major.
pub fn label_components<F>(rows: usize, cols: usize, mut is_match: F) -> Vec<Vec<Cell>>
where
    F: FnMut(usize, usize) -> bool,
{
    let mut mask = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            mask[r * cols + c] = is_match(r + 1, c + 1);
        }
    }
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..rows * cols {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (r, c) = (i / cols, i % cols);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r + 1 < rows {
                visit(i + cols);
            }
            if r > 0 {
                visit(i - cols);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
            if c > 0 {
                visit(i - 1);
            }
        }
        members.sort_unstable();
        out.push(members.into_iter().map(|i| (i / cols + 1, i % cols + 1)).collect());
    }
    out
}

pub fn connected_components(grid: &Grid, matcher: &Matcher) -> Vec<Component> {
    label_components(grid.rows(), grid.cols(), |r, c| matcher.matches(grid.get(r, c).unwrap()))
        .into_iter()
        .map(|cells| Component { value: grid.get(cells[0].0, cells[0].1).unwrap(), cells, holes: None })
        .collect()
}

pub fn component_bbox(cells: &[Cell]) -> Option<BBox> {
    let first = cells.first()?;
    let mut b = BBox { min_row: first.0, max_row: first.0, min_col: first.1, max_col: first.1 };
    for &(r, c) in &cells[1..] {
        b.min_row = b.min_row.min(r);
        b.max_row = b.max_row.max(r);
        b.min_col = b.min_col.min(c);
        b.max_col = b.max_col.max(c);
    }
    Some(b)
}

/// Counts enclosed background regions of a component.
///
/// The search window is the component's bounding box padded by one cell on
/// every side. Background cells are window cells outside the component for
/// which `is_background(row, col)` holds (the caller decides what
/// out-of-grid positions read as). Regions not reachable from the window
/// border through background cells are holes.
pub fn hole_count_with<F>(cells: &[Cell], mut is_background: F) -> usize
where
    F: FnMut(i64, i64) -> bool,
{
    let Some(b) = component_bbox(cells) else {
        return 0;
    };
    let (r0, c0) = (b.min_row as i64 - 1, b.min_col as i64 - 1);
    let h = b.height() + 2;
    let w = b.width() + 2;
    let members: BTreeSet<Cell> = cells.iter().copied().collect();
    let mut bg = vec![false; h * w];
    for i in 0..h {
        for j in 0..w {
            let (r, c) = (r0 + i as i64, c0 + j as i64);
            let in_component = r >= 1 && c >= 1 && members.contains(&(r as usize, c as usize));
            bg[i * w + j] = !in_component && is_background(r, c);
        }
    }
    // Flood from the window border.
    let mut reach = vec![false; h * w];
    let mut queue = VecDeque::new();
    for i in 0..h {
        for j in 0..w {
            let border = i == 0 || j == 0 || i == h - 1 || j == w - 1;
            if border && bg[i * w + j] {
                reach[i * w + j] = true;
                queue.push_back(i * w + j);
            }
        }
    }
    flood(&bg, &mut reach, &mut queue, h, w);
    // Count remaining background regions.
    let mut count = 0;
    for k in 0..h * w {
        if bg[k] && !reach[k] {
            count += 1;
            reach[k] = true;
            queue.push_back(k);
            flood(&bg, &mut reach, &mut queue, h, w);
        }
    }
    count
}

fn flood(open: &[bool], seen: &mut [bool], queue: &mut VecDeque<usize>, h: usize, w: usize) {
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k / w, k % w);
        let mut next = [usize::MAX; 4];
        if i + 1 < h {
            next[0] = k + w;
        }
        if i > 0 {
            next[1] = k - w;
        }
        if j + 1 < w {
            next[2] = k + 1;
        }
        if j > 0 {
            next[3] = k - 1;
        }
        for n in next {
            if n != usize::MAX && open[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
}

pub fn component_hole_count(grid: &Grid, cells: &[Cell], background: &Matcher) -> usize {
    hole_count_with(cells, |r, c| background.matches(grid.value_or_zero(r, c)))
}

pub fn components_with_holes(grid: &Grid, matcher: &Matcher, background: &Matcher) -> Vec<Component> {
    let mut comps = connected_components(grid, matcher);
    for comp in &mut comps {
        comp.holes = Some(component_hole_count(grid, &comp.cells, background));
    }
    comps
}

/// Matching cells and their values, row-major.
pub fn collect_points(grid: &Grid, matcher: &Matcher) -> (Vec<Cell>, Vec<u8>) {
    grid.iter().filter(|(_, v)| matcher.matches(*v)).unzip()
}

/// Rewrites the cells of every component the labeler assigns a label to.
/// When components overlap, the first labeled component wins; a labeler
/// returning `None` leaves that component's cells untouched.
pub fn apply_component_labels<F>(grid: &Grid, components: &[Component], mut labeler: F) -> Grid
where
    F: FnMut(&Component) -> Option<u8>,
{
    let mut out = grid.clone();
    let mut written = BTreeSet::new();
    for comp in components {
        let Some(label) = labeler(comp) else { continue };
        for &(r, c) in &comp.cells {
            if grid.get(r, c).is_some() && written.insert((r, c)) {
                out.set(r, c, label);
            }
        }
    }
    out
}

/// Calls `mapper(row, col, old)` once per cell in row-major order. Any
/// `None` (mapper failure or a non-color result) fails the whole map.
pub fn map_grid_cells<F>(grid: &Grid, mut mapper: F) -> Option<Grid>
where
    F: FnMut(usize, usize, u8) -> Option<u8>,
{
    let mut out = grid.clone();
    for ((r, c), v) in grid.iter() {
        let nv = mapper(r, c, v)?;
        if nv > crate::grid::MAX_COLOR {
            return None;
        }
        out.set(r, c, nv);
    }
    Some(out)
}
