//! The published listings and the worked examples, with 5x5 fixtures for
//! the examples.
#![allow(dead_code)]

use abpr_engine::{parse_program, parse_query, parse_term, solve_first, term_to_grid, Atom, EngineError, ResourceLimits, Term};

pub const BK: &str = include_str!("../fixtures/bk.pl");
pub const META: &str = include_str!("../fixtures/meta.pl");
pub const LISTINGS: &[(&str, &str)] = &[
    ("b0039139 iteration 1", include_str!("../fixtures/b0039139_iter1.pl")),
    ("b0039139 iteration 2", include_str!("../fixtures/b0039139_iter2.pl")),
    ("9aaea919 iteration 1", include_str!("../fixtures/9aaea919_iter1.pl")),
    ("9aaea919 iteration 2", include_str!("../fixtures/9aaea919_iter2.pl")),
    ("9aaea919 iteration 3", include_str!("../fixtures/9aaea919_iter3.pl")),
    ("9aaea919 iteration 4", include_str!("../fixtures/9aaea919_iter4.pl")),
];

pub const EXAMPLE_1: &str = "
:- use_module(bk).

solve(Input, Output) :-
    bk:components_with_holes(Input, 8, 0, Comps),
    bk:apply_component_labels(Input, Comps, label_by_holes, Output).

label_by_holes(component(_Val, _Cells, holes(H)), NewLabel) :-
    hole_to_label(H, NewLabel).

hole_to_label(1, 5).
hole_to_label(2, 3).
hole_to_label(3, 7).
";

pub const EXAMPLE_2: &str = "
:- use_module(bk).

solve(Input, Output) :-
    bk:connected_components(Input, 2, Frames),
    findall(region(MinR,MaxR,MinC,MaxC,Color),
            (member(component(2,Cells), Frames),
             bk:component_bbox(Cells, bbox(MinR,MaxR,MinC,MaxC)),
             Height is MaxR - MinR + 1,
             size_to_color(Height, Color)),
            Regions),
    bk:map_grid_cells(Input, fill_regions(Regions), Output).

fill_regions(Regions, R, C, OldVal, NewVal) :-
    ( OldVal =:= 0,
      member(region(MinR,MaxR,MinC,MaxC,Color), Regions),
      R > MinR, R < MaxR, C > MinC, C < MaxC
    -> NewVal = Color
    ; NewVal = OldVal
    ).

size_to_color(5, 8).
size_to_color(7, 4).
";

pub const EXAMPLE_3: &str = "
:- use_module(bk).

solve(Input, Output) :-
    bk:map_grid_cells(Input, recolor_cell, Output).

recolor_cell(_R, _C, OldVal, NewVal) :-
    ( OldVal =:= 8 -> NewVal = 0 ; NewVal = OldVal ).
";

pub const BK_EXPORTS: &[(&str, usize)] = &[
    ("grid_dimensions", 3),
    ("grid_cell", 4),
    ("grid_in_bounds", 3),
    ("grid_neighbors4", 4),
    ("collect_points", 3),
    ("collect_points", 4),
    ("connected_components", 3),
    ("components_with_holes", 4),
    ("component_bbox", 2),
    ("component_hole_count", 3),
    ("component_hole_count", 4),
    ("apply_component_labels", 4),
    ("map_grid_cells", 3),
];

/// (example source, input, expected output) on 5x5 grids.
pub fn five_by_five_fixtures() -> Vec<(&'static str, &'static str, &'static str, &'static str)> {
    vec![
        (
            "example 1, ring",
            EXAMPLE_1,
            "[[8,8,8,0,0],[8,0,8,0,0],[8,8,8,0,0],[0,0,0,0,0],[0,0,0,0,0]]",
            "[[5,5,5,0,0],[5,0,5,0,0],[5,5,5,0,0],[0,0,0,0,0],[0,0,0,0,0]]",
        ),
        (
            "example 1, figure eight",
            EXAMPLE_1,
            "[[0,0,0,0,0],[8,8,8,8,8],[8,0,8,0,8],[8,8,8,8,8],[0,0,0,0,0]]",
            "[[0,0,0,0,0],[3,3,3,3,3],[3,0,3,0,3],[3,3,3,3,3],[0,0,0,0,0]]",
        ),
        (
            "example 2, square frame",
            EXAMPLE_2,
            "[[2,2,2,2,2],[2,0,0,0,2],[2,0,0,0,2],[2,0,0,0,2],[2,2,2,2,2]]",
            "[[2,2,2,2,2],[2,8,8,8,2],[2,8,8,8,2],[2,8,8,8,2],[2,2,2,2,2]]",
        ),
        (
            "example 2, narrow frame",
            EXAMPLE_2,
            "[[2,2,2,0,0],[2,0,2,0,0],[2,0,2,0,0],[2,0,2,0,0],[2,2,2,0,1]]",
            "[[2,2,2,0,0],[2,8,2,0,0],[2,8,2,0,0],[2,8,2,0,0],[2,2,2,0,1]]",
        ),
        (
            "example 3",
            EXAMPLE_3,
            "[[8,1,0,8,8],[0,8,2,0,0],[3,3,8,0,9],[8,0,0,0,8],[5,8,8,8,5]]",
            "[[0,1,0,0,0],[0,0,2,0,0],[3,3,0,0,9],[0,0,0,0,0],[5,0,0,0,5]]",
        ),
    ]
}

fn run(src: &str, input: &str) -> Result<Option<Term>, String> {
    let p = parse_program(src).map_err(|e| e.to_string())?;
    let q = parse_query(&format!("solve({input}, Out)")).map_err(|e| e.to_string())?;
    let b = solve_first(&p, &q.goal, &ResourceLimits::default()).map_err(|e| e.to_string())?;
    Ok(b.map(|b| b.apply(&Term::Var(q.var("Out").unwrap()))))
}

/// Every listing parses; the solver listings run without exhausting
/// resources; the examples produce the documented outputs on 5x5 grids.
pub fn check_corpus() -> Result<String, String> {
    let bk = parse_program(BK).map_err(|e| format!("bk: {e}"))?;
    for (name, arity) in BK_EXPORTS {
        if !bk.defines(Atom::new(name), *arity) {
            return Err(format!("bk does not define {name}/{arity}"));
        }
    }
    let meta = parse_program(META).map_err(|e| format!("meta-interpreter: {e}"))?;
    if meta.predicate("solve", 2).len() != 4 {
        return Err("meta-interpreter solve/2 should have 4 clauses".into());
    }
    let inputs = [
        "[[0,4,0],[4,4,4],[1,1,1],[3,0,3],[1,1,1],[2,2,2],[1,1,1],[5,5,5]]",
        "[[8,8,8,8,8,8,8],[8,1,1,8,3,3,8],[8,1,1,8,3,3,8],[8,8,8,8,8,8,8],[8,2,2,8,2,2,8],[8,2,2,8,2,2,8],[8,8,8,8,8,8,8]]",
    ];
    for (name, src) in LISTINGS {
        let p = parse_program(src).map_err(|e| format!("{name}: {e}"))?;
        if !p.uses_bk() || p.predicate("solve", 2).is_empty() {
            return Err(format!("{name}: no solve/2 over bk"));
        }
        for input in inputs {
            let q = parse_query(&format!("solve({input}, Out)")).unwrap();
            if let Err(e @ EngineError::ResourceExhausted(_)) = solve_first(&p, &q.goal, &ResourceLimits::default()) {
                return Err(format!("{name}: {e}"));
            }
        }
    }
    for (src, name) in [(EXAMPLE_1, "example 1"), (EXAMPLE_2, "example 2"), (EXAMPLE_3, "example 3")] {
        parse_program(src).map_err(|e| format!("{name}: {e}"))?;
    }
    let fixtures = five_by_five_fixtures();
    for (name, src, input, expected) in &fixtures {
        let want = parse_term(expected).unwrap().term;
        let got = run(src, input).map_err(|e| format!("{name}: {e}"))?;
        if got.as_ref() != Some(&want) {
            return Err(format!("{name}: got {got:?}"));
        }
        if term_to_grid(&want).map(|g| g.dimensions()) != Some((5, 5)) {
            return Err(format!("{name}: fixture is not 5x5"));
        }
    }
    Ok(format!("{} listings plus bk and meta-interpreter parse; {} 5x5 example fixtures pass", LISTINGS.len(), fixtures.len()))
}
