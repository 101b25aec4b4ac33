//! Native grid library, callable as `bk:Name(...)` or unqualified.
//!
//! Grids are lists of rows. Cells outside the grid, and cells missing from
//! short rows, read as 0 wherever the library consults a neighbourhood.

use std::collections::{BTreeSet, HashSet};

use abpr_grid::{hole_count_with, label_components, Cell, Grid};

use crate::builtins::{closure_goal, int_arg, list_arg, ok, unify_out, Entry, Outcome, Res};
use crate::error::EngineError;
use crate::machine::Machine;
use crate::term::{atoms, Term};

pub(crate) const NATIVES: &[Entry] = &[
    ("grid_dimensions", 3, grid_dimensions),
    ("grid_cell", 4, grid_cell),
    ("grid_in_bounds", 3, grid_in_bounds),
    ("grid_neighbors4", 4, grid_neighbors4),
    ("collect_points", 3, collect_points),
    ("collect_points", 4, collect_points),
    ("connected_components", 3, connected_components),
    ("components_with_holes", 4, components_with_holes),
    ("component_bbox", 2, component_bbox),
    ("component_hole_count", 3, component_hole_count),
    ("component_hole_count", 4, component_hole_count),
    ("apply_component_labels", 4, apply_component_labels),
    ("map_grid_cells", 3, map_grid_cells),
];

struct TermGrid {
    rows: Vec<Vec<Term>>,
    ncols: usize,
}

impl TermGrid {
    fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn real(&self, r: i64, c: i64) -> Option<&Term> {
        if r < 1 || c < 1 {
            return None;
        }
        self.rows.get(r as usize - 1)?.get(c as usize - 1)
    }

    fn value_or_zero(&self, r: i64, c: i64) -> Term {
        if r > self.nrows() as i64 || c > self.ncols as i64 {
            return Term::int(0);
        }
        self.real(r, c).cloned().unwrap_or(Term::int(0))
    }
}

fn grid(m: &Machine<'_>, t: &Term) -> Res<TermGrid> {
    let mut rows = Vec::new();
    for r in list_arg(m, t)? {
        rows.push(list_arg(m, &r)?);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(TermGrid { rows, ncols })
}

fn pair(r: i64, c: i64) -> Term {
    Term::pair(Term::int(r), Term::int(c))
}

fn bk_goal(name: &str, args: Vec<Term>) -> Term {
    Term::compound(atoms::COLON, vec![Term::Atom(atoms::BK), Term::app(name, args)])
}

// ---- matchers ----

enum TMatcher {
    Any,
    Nonzero,
    Color(i64),
    Never,
    Values(Vec<Term>),
    Goal(Term),
}

fn matcher(m: &Machine<'_>, t: &Term) -> Res<TMatcher> {
    let t = m.deref(t);
    Ok(match &t {
        Term::Var(_) => return Err(EngineError::instantiation()),
        Term::Int(n) => TMatcher::Color(*n),
        Term::Atom(a) if *a == atoms::ANY => TMatcher::Any,
        Term::Atom(a) if *a == atoms::NONZERO => TMatcher::Nonzero,
        Term::Compound(c) if c.functor() == atoms::COLOR && c.arity() == 1 => match m.deref(&c.args()[0]) {
            Term::Int(n) => TMatcher::Color(n),
            _ => TMatcher::Never,
        },
        Term::Compound(c) if c.arity() == 1 && (c.functor() == atoms::ARITH_EQ || c.functor() == atoms::EQUALS) => {
            return Err(EngineError::InvalidMatcher(m.resolve(&t).to_string()));
        }
        _ => {
            if let Some(items) = m.list(&t) {
                TMatcher::Values(items)
            } else if t.is_callable() && !t.is_functor(atoms::DOT, 2) {
                TMatcher::Goal(t.clone())
            } else {
                TMatcher::Never
            }
        }
    })
}

fn matches(m: &mut Machine<'_>, mt: &TMatcher, v: &Term) -> Res<bool> {
    Ok(match mt {
        TMatcher::Any => true,
        TMatcher::Nonzero => m.eval(v)? != 0,
        TMatcher::Color(n) => m.eval(v)? == *n,
        TMatcher::Never => false,
        TMatcher::Values(vs) => {
            let mut hit = false;
            for x in vs {
                if m.unifiable(v, x) {
                    hit = true;
                    break;
                }
            }
            hit
        }
        TMatcher::Goal(_) => unreachable!("goal matchers are expanded first"),
    })
}

/// Rewrites a call whose matchers include goals: each goal matcher is
/// evaluated once per distinct cell value and replaced by the list of
/// values it accepts, then the call is made again.
fn expand_goal_matchers(
    m: &mut Machine<'_>,
    name: &str,
    args: &[Term],
    g: &TermGrid,
    slots: &[(usize, bool)],
) -> Res<Option<Outcome>> {
    let mut goals = Vec::new();
    let mut new_args = args.to_vec();
    for &(i, background) in slots {
        let TMatcher::Goal(mg) = matcher(m, &args[i])? else { continue };
        let mut distinct: Vec<Term> = Vec::new();
        let mut seen = BTreeSet::new();
        let cells = g.rows.iter().flatten().map(|t| m.resolve(t));
        for v in cells.chain(background.then(|| Term::int(0))) {
            let key = v.to_string();
            if seen.insert(key) {
                distinct.push(v);
            }
        }
        distinct.sort_by(|a, b| m.compare(a, b));
        let v = m.fresh();
        let l = m.fresh();
        let test = Term::app("once", vec![Term::compound(atoms::CALL, vec![mg, v.clone()])]);
        let body = Term::compound(atoms::COMMA, vec![Term::app("member", vec![v.clone(), Term::list(distinct)]), test]);
        goals.push(Term::app("findall", vec![v, body, l.clone()]));
        new_args[i] = l;
    }
    if goals.is_empty() {
        return Ok(None);
    }
    goals.push(bk_goal(name, new_args));
    Ok(Some(Outcome::Run(goals)))
}

/// Match flags for every in-bounds position, row-major.
fn match_mask(m: &mut Machine<'_>, g: &TermGrid, mt: &TMatcher) -> Res<Vec<bool>> {
    let mut mask = Vec::with_capacity(g.nrows() * g.ncols);
    for r in 1..=g.nrows() as i64 {
        for c in 1..=g.ncols as i64 {
            let v = g.value_or_zero(r, c);
            mask.push(matches(m, mt, &v)?);
        }
    }
    Ok(mask)
}

// ---- grid primitives ----

fn grid_dimensions(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    if let Some(rows) = m.list(&a[0]) {
        let cols = match rows.first() {
            None => Some(0),
            Some(first) => m.list(first).map(|r| r.len()),
        };
        if let Some(cols) = cols {
            let ok1 = m.unify(&a[1], &Term::int(rows.len() as i64));
            return ok(ok1 && m.unify(&a[2], &Term::int(cols as i64)));
        }
    }
    let first = m.fresh();
    let rest = m.fresh();
    let has_first = Term::app("=", vec![a[0].clone(), Term::cons(first.clone(), rest)]);
    let cond = Term::compound(atoms::ARROW, vec![has_first, Term::app("length", vec![first, a[2].clone()])]);
    let ite = Term::compound(atoms::SEMICOLON, vec![cond, Term::app("=", vec![a[2].clone(), Term::int(0)])]);
    Ok(Outcome::Run(vec![Term::app("length", vec![a[0].clone(), a[1].clone()]), ite]))
}

fn grid_cell(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    if let (Term::Int(r), Term::Int(c)) = (m.deref(&a[1]), m.deref(&a[2])) {
        if r < 1 || c < 1 {
            return Ok(Outcome::Fail);
        }
        let (rows, tail) = m.partial_list(&a[0]);
        if let Some(row) = rows.get(r as usize - 1) {
            let (cells, rtail) = m.partial_list(row);
            if let Some(v) = cells.get(c as usize - 1) {
                return unify_out(m, &a[3], v);
            }
            if rtail == Term::nil() {
                return Ok(Outcome::Fail);
            }
        } else if tail == Term::nil() {
            return Ok(Outcome::Fail);
        }
    }
    let row = m.fresh();
    Ok(Outcome::Run(vec![
        Term::app("nth1", vec![a[1].clone(), a[0].clone(), row.clone()]),
        Term::app("nth1", vec![a[2].clone(), row, a[3].clone()]),
    ]))
}

fn dims(m: &Machine<'_>, t: &Term) -> Res<(i64, i64)> {
    let rows = list_arg(m, t)?;
    let cols = match rows.first() {
        None => 0,
        Some(r) => list_arg(m, r)?.len(),
    };
    Ok((rows.len() as i64, cols as i64))
}

fn grid_in_bounds(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let (rows, cols) = dims(m, &a[0])?;
    let r = m.eval(&a[1])?;
    let c = m.eval(&a[2])?;
    ok(r >= 1 && r <= rows && c >= 1 && c <= cols)
}

fn neighbors4(r: i64, c: i64, rows: i64, cols: i64) -> Vec<Term> {
    let mut out = Vec::with_capacity(4);
    if r + 1 <= rows {
        out.push(pair(r + 1, c));
    }
    if r - 1 >= 1 {
        out.push(pair(r - 1, c));
    }
    if c + 1 <= cols {
        out.push(pair(r, c + 1));
    }
    if c - 1 >= 1 {
        out.push(pair(r, c - 1));
    }
    out
}

fn grid_neighbors4(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let (rows, cols) = dims(m, &a[0])?;
    let r = m.eval(&a[1])?;
    let c = m.eval(&a[2])?;
    unify_out(m, &a[3], &Term::list(neighbors4(r, c, rows, cols)))
}

fn collect_points(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let g = grid(m, &a[0])?;
    let name = "collect_points";
    if let Some(out) = expand_goal_matchers(m, name, a, &g, &[(1, false)])? {
        return Ok(out);
    }
    let mt = matcher(m, &a[1])?;
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for r in 1..=g.nrows() as i64 {
        for c in 1..=g.ncols as i64 {
            let Some(v) = g.real(r, c).cloned() else { continue };
            if matches(m, &mt, &v)? {
                pts.push(pair(r, c));
                vals.push(v);
            }
        }
    }
    let ok1 = m.unify(&a[2], &Term::list(pts));
    if a.len() == 4 {
        return ok(ok1 && m.unify(&a[3], &Term::list(vals)));
    }
    ok(ok1)
}

/// Components of matching positions, each with its seed value, ordered by
/// their first real cell.
fn components(m: &mut Machine<'_>, g: &TermGrid, mt: &TMatcher) -> Res<Vec<(Term, Vec<Cell>)>> {
    let mask = match_mask(m, g, mt)?;
    let cols = g.ncols;
    let labels = label_components(g.nrows(), cols, |r, c| mask[(r - 1) * cols + (c - 1)]);
    let mut out = Vec::new();
    for cells in labels {
        let Some(&(r, c)) = cells.iter().find(|&&(r, c)| g.real(r as i64, c as i64).is_some()) else {
            continue;
        };
        let value = m.resolve(g.real(r as i64, c as i64).unwrap());
        out.push(((r, c), value, cells));
    }
    out.sort_by_key(|x| x.0);
    Ok(out.into_iter().map(|(_, v, cells)| (v, cells)).collect())
}

fn cells_term(cells: &[Cell]) -> Term {
    Term::list(cells.iter().map(|&(r, c)| pair(r as i64, c as i64)))
}

fn connected_components(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let g = grid(m, &a[0])?;
    if let Some(out) = expand_goal_matchers(m, "connected_components", a, &g, &[(1, false)])? {
        return Ok(out);
    }
    let mt = matcher(m, &a[1])?;
    let comps = components(m, &g, &mt)?;
    let l = Term::list(comps.into_iter().map(|(v, cells)| Term::compound(atoms::COMPONENT, vec![v, cells_term(&cells)])));
    unify_out(m, &a[2], &l)
}

fn hole_counter(m: &mut Machine<'_>, g: &TermGrid, bg: &TMatcher) -> Res<impl Fn(&[Cell]) -> usize> {
    let mask = match_mask(m, g, bg)?;
    let zero = matches(m, bg, &Term::int(0))?;
    let (rows, cols) = (g.nrows() as i64, g.ncols as i64);
    Ok(move |cells: &[Cell]| {
        hole_count_with(cells, |r, c| {
            if r < 1 || c < 1 || r > rows || c > cols {
                zero
            } else {
                mask[((r - 1) * cols + (c - 1)) as usize]
            }
        })
    })
}

fn components_with_holes(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let g = grid(m, &a[0])?;
    if let Some(out) = expand_goal_matchers(m, "components_with_holes", a, &g, &[(1, false), (2, true)])? {
        return Ok(out);
    }
    let mt = matcher(m, &a[1])?;
    let bg = matcher(m, &a[2])?;
    let comps = components(m, &g, &mt)?;
    let holes = hole_counter(m, &g, &bg)?;
    let l = Term::list(comps.into_iter().map(|(v, cells)| {
        let h = Term::compound(atoms::HOLES, vec![Term::int(holes(&cells) as i64)]);
        Term::compound(atoms::COMPONENT, vec![v, cells_term(&cells), h])
    }));
    unify_out(m, &a[3], &l)
}

/// Coordinate pairs of a cell list; items that are not pairs are skipped.
fn coord_pairs(m: &Machine<'_>, t: &Term) -> Res<Vec<(i64, i64)>> {
    let mut out = Vec::new();
    for it in list_arg(m, t)? {
        let it = m.deref(&it);
        if it.is_functor(atoms::COMMA, 2) {
            out.push((m.eval(&it.args()[0])?, m.eval(&it.args()[1])?));
        }
    }
    Ok(out)
}

fn component_bbox(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let pts = coord_pairs(m, &a[0])?;
    if pts.is_empty() {
        return Ok(Outcome::Fail);
    }
    let min_r = pts.iter().map(|p| p.0).min().unwrap();
    let max_r = pts.iter().map(|p| p.0).max().unwrap();
    let min_c = pts.iter().map(|p| p.1).min().unwrap();
    let max_c = pts.iter().map(|p| p.1).max().unwrap();
    let b = Term::compound(atoms::BBOX, [min_r, max_r, min_c, max_c].into_iter().map(Term::int).collect());
    unify_out(m, &a[1], &b)
}

fn component_hole_count(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let g = grid(m, &a[0])?;
    let (bg_term, out) = if a.len() == 4 { (a[2].clone(), &a[3]) } else { (Term::int(0), &a[2]) };
    if a.len() == 4 {
        if let Some(o) = expand_goal_matchers(m, "component_hole_count", a, &g, &[(2, true)])? {
            return Ok(o);
        }
    }
    let pts = coord_pairs(m, &a[1])?;
    if pts.is_empty() {
        return Ok(Outcome::Fail);
    }
    let mut cells = Vec::with_capacity(pts.len());
    for (r, c) in pts {
        if r < 1 || c < 1 {
            return Err(EngineError::type_error("cell", &pair(r, c)));
        }
        cells.push((r as usize, c as usize));
    }
    let bg = matcher(m, &bg_term)?;
    let holes = hole_counter(m, &g, &bg)?;
    let n = holes(&cells) as i64;
    unify_out(m, out, &Term::int(n))
}

fn require_callable(m: &Machine<'_>, t: &Term) -> Res<()> {
    match m.deref(t) {
        Term::Var(_) => Err(EngineError::instantiation()),
        x if x.is_callable() => Ok(()),
        x => Err(EngineError::CallableExpected(m.resolve(&x).to_string())),
    }
}

fn apply_component_labels(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    require_callable(m, &a[2])?;
    let (i, comp, label, pairs) = (m.fresh(), m.fresh(), m.fresh(), m.fresh());
    let labeled = Term::compound(atoms::MINUS, vec![i.clone(), label.clone()]);
    let body = Term::compound(
        atoms::COMMA,
        vec![
            Term::app("nth1", vec![i, a[1].clone(), comp.clone()]),
            Term::compound(atoms::CALL, vec![a[2].clone(), comp, label]),
        ],
    );
    Ok(Outcome::Run(vec![
        Term::app("findall", vec![labeled, body, pairs.clone()]),
        Term::app("$bk_label_apply", vec![a[0].clone(), a[1].clone(), pairs, a[3].clone()]),
    ]))
}

/// Writes `Label` over the cells of component `I` for each `I-Label`
/// pair; the first write to a cell wins.
pub(crate) fn label_apply(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let mut g = grid(m, &a[0])?;
    let comps = list_arg(m, &a[1])?;
    let mut written: HashSet<(i64, i64)> = HashSet::new();
    for p in list_arg(m, &a[2])? {
        let p = m.deref(&p);
        let i = int_arg(m, &p.args()[0])?;
        let label = p.args()[1].clone();
        let comp = m.deref(&comps[i as usize - 1]);
        let is_comp = comp.key().is_some_and(|(f, n)| f == atoms::COMPONENT && (n == 2 || n == 3));
        if !is_comp {
            continue;
        }
        let (cells, _) = m.partial_list(&comp.args()[1]);
        for cell in cells {
            let cell = m.deref(&cell);
            if !cell.is_functor(atoms::COMMA, 2) {
                continue;
            }
            let (Term::Int(r), Term::Int(c)) = (m.deref(&cell.args()[0]), m.deref(&cell.args()[1])) else {
                continue;
            };
            if g.real(r, c).is_some() && written.insert((r, c)) {
                g.rows[r as usize - 1][c as usize - 1] = label.clone();
            }
        }
    }
    let out = Term::list(g.rows.into_iter().map(Term::list));
    unify_out(m, &a[3], &out)
}

fn map_grid_cells(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    require_callable(m, &a[1])?;
    let g = grid(m, &a[0])?;
    let mut goals = Vec::with_capacity(g.nrows() * g.ncols + 1);
    let mut out_rows = Vec::with_capacity(g.nrows());
    goals.push(Term::nil());
    for (r, row) in g.rows.iter().enumerate() {
        let mut out_row = Vec::with_capacity(row.len());
        for (c, v) in row.iter().enumerate() {
            let nv = m.fresh();
            let extra = [Term::int(r as i64 + 1), Term::int(c as i64 + 1), v.clone(), nv.clone()];
            goals.push(closure_goal(m, &a[1], &extra)?);
            out_row.push(nv);
        }
        out_rows.push(Term::list(out_row));
    }
    goals[0] = Term::compound(atoms::EQUALS, vec![a[2].clone(), Term::list(out_rows)]);
    Ok(Outcome::Run(goals))
}

// ---- conversion to and from the grid model ----

pub fn grid_to_term(g: &Grid) -> Term {
    Term::list(g.to_rows().into_iter().map(|row| Term::list(row.into_iter().map(|v| Term::int(v as i64)))))
}

/// Reads a ground list of integer rows as a grid. Returns `None` for any
/// other shape, including ragged rows and out-of-range colors.
pub fn term_to_grid(t: &Term) -> Option<Grid> {
    let rows: Option<Vec<Vec<i64>>> =
        t.list_items()?.iter().map(|r| r.list_items()?.iter().map(Term::as_int).collect()).collect();
    Grid::from_rows(&rows?).ok()
}
