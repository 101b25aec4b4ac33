//! The published listings: the background library source, the solver
//! iterations for two tasks, and the worked examples from the system prompt.

mod common;

use abpr_engine::{atoms, parse_query, solve_first, term_to_grid, Atom, EngineError, Program, Term};
use common::{first_out, limits, program, term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "support/corpus.rs"]
mod corpus;

use corpus::{BK, BK_EXPORTS, EXAMPLE_1, EXAMPLE_2, EXAMPLE_3, LISTINGS, META};

#[test]
fn library_source_parses_with_all_exports() {
    let p = program(BK);
    for &(name, arity) in BK_EXPORTS {
        assert!(p.defines(Atom::new(name), arity), "{name}/{arity}");
    }
    assert_eq!(p.directives().len(), 2);
}

#[test]
fn meta_interpreter_listing_parses() {
    let p = program(META);
    assert_eq!(p.predicate("solve", 2).len(), 4);
}

#[test]
fn solver_listings_parse() {
    for (name, src) in LISTINGS {
        let p = abpr_engine::parse_program(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(p.uses_bk(), "{name}");
        assert!(!p.predicate("solve", 2).is_empty(), "{name}");
    }
}

#[test]
fn solver_listings_execute_without_errors() {
    let inputs = [
        "[[0,4,0],[4,4,4],[1,1,1],[3,0,3],[1,1,1],[2,2,2],[1,1,1],[5,5,5]]",
        "[[8,8,8,8,8,8,8],[8,1,1,8,3,3,8],[8,1,1,8,3,3,8],[8,8,8,8,8,8,8],[8,2,2,8,2,2,8],[8,2,2,8,2,2,8],[8,8,8,8,8,8,8]]",
    ];
    for (name, src) in LISTINGS {
        let p = program(src);
        for input in inputs {
            let q = parse_query(&format!("solve({input}, Out)")).unwrap();
            match solve_first(&p, &q.goal, &limits()) {
                Ok(_) => {}
                Err(e @ EngineError::ResourceExhausted(_)) => panic!("{name}: {e}"),
                Err(_) => {}
            }
        }
    }
}

#[test]
fn example_1_relabels_by_hole_count() {
    let p = program(EXAMPLE_1);
    let input = "[[8,8,8,0,0,0,0],
                  [8,0,8,0,0,0,0],
                  [8,8,8,0,0,0,0],
                  [0,0,0,0,0,0,0],
                  [0,8,8,8,8,8,0],
                  [0,8,0,8,0,8,0],
                  [0,8,8,8,8,8,0]]";
    let expected = term(
        "[[5,5,5,0,0,0,0],
          [5,0,5,0,0,0,0],
          [5,5,5,0,0,0,0],
          [0,0,0,0,0,0,0],
          [0,3,3,3,3,3,0],
          [0,3,0,3,0,3,0],
          [0,3,3,3,3,3,0]]",
    );
    assert_eq!(first_out(&p, &format!("solve({input}, Out)")), Some(expected));
}

#[test]
fn example_2_fills_frame_interiors() {
    let p = program(EXAMPLE_2);
    let input = "[[2,2,2,2,2,0],
                  [2,0,0,0,2,0],
                  [2,0,0,0,2,0],
                  [2,0,0,0,2,0],
                  [2,2,2,2,2,0]]";
    let expected = term(
        "[[2,2,2,2,2,0],
          [2,8,8,8,2,0],
          [2,8,8,8,2,0],
          [2,8,8,8,2,0],
          [2,2,2,2,2,0]]",
    );
    assert_eq!(first_out(&p, &format!("solve({input}, Out)")), Some(expected));
}

#[test]
fn example_3_recolors_cells() {
    let p = program(EXAMPLE_3);
    assert_eq!(first_out(&p, "solve([[0,8],[8,0]], Out)"), Some(term("[[0,0],[0,0]]")));
    let out = first_out(&p, "solve([[8,1,8],[2,8,3]], Out)").unwrap();
    assert_eq!(term_to_grid(&out).unwrap().to_rows(), vec![vec![0, 1, 0], vec![2, 0, 3]]);
}

#[test]
fn examples_on_five_by_five_grids() {
    let summary = corpus::check_corpus().unwrap();
    eprintln!("{summary}");
}

#[test]
fn documented_matcher_mistake_is_reported() {
    let p = program("");
    for bad in ["=:=(8)", "=(8)"] {
        let q = parse_query(&format!("bk:connected_components([[8]], {bad}, C)")).unwrap();
        let r = solve_first(&p, &q.goal, &limits());
        assert!(matches!(r, Err(EngineError::InvalidMatcher(_))), "{bad}: {r:?}");
    }
}

// ---- interpreted library versus native primitives ----

/// Sorts the cell list of every component so that flood order does not
/// matter.
fn normalize(t: &Term) -> Term {
    match t {
        Term::Compound(c) => {
            let mut args: Vec<Term> = c.args().iter().map(normalize).collect();
            if c.functor() == atoms::COMPONENT && c.arity() >= 2 {
                if let Some(mut cells) = args[1].list_items() {
                    cells.sort_by_key(|p| (p.args()[0].as_int(), p.args()[1].as_int()));
                    args[1] = Term::list(cells);
                }
            }
            Term::compound(c.functor(), args)
        }
        other => other.clone(),
    }
}

fn run(p: &Program, goal: &str) -> Result<Option<Term>, EngineError> {
    let q = parse_query(goal).unwrap();
    let out = q.var("Out").unwrap();
    Ok(solve_first(p, &q.goal, &limits())?.map(|b| normalize(&b.apply(&Term::Var(out)))))
}

fn random_grid(rng: &mut ChaCha8Rng, max: usize) -> String {
    let rows = rng.random_range(1..=max);
    let cols = rng.random_range(1..=max);
    let palette = rng.random_range(2..=4u8);
    let rows: Vec<String> = (0..rows)
        .map(|_| {
            let cells: Vec<String> = (0..cols)
                .map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(1..palette + 1) }.to_string())
                .collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

const HELPERS: &str = "
odd(V) :- V mod 2 =:= 1.
size_label(component(_, Cells), L) :- length(Cells, N), L is N mod 10.
size_label(component(_, Cells, holes(H)), L) :- length(Cells, N), L is (N + H) mod 10.
shift(R, C, V, N) :- N is (R + C + V) mod 10.
";

#[test]
fn native_primitives_match_interpreted_library() {
    let interpreted = program(&format!("{BK}\n{HELPERS}"));
    let native = program(HELPERS);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let matchers = ["1", "2", "nonzero", "any", "color(1)", "color(x)", "odd"];
    for _ in 0..40 {
        let g = random_grid(&mut rng, 6);
        let m = matchers[rng.random_range(0..matchers.len())];
        let bg = ["0", "nonzero", "any"][rng.random_range(0..3)];
        let r = rng.random_range(0..8);
        let c = rng.random_range(0..8);
        let goals = [
            format!("grid_dimensions({g}, R, C), Out = R-C"),
            format!("grid_cell({g}, {r}, {c}, Out)"),
            format!("(grid_in_bounds({g}, {r}, {c}) -> Out = yes ; Out = no)"),
            format!("grid_neighbors4({g}, {}, {}, Out)", r.max(1), c.max(1)),
            format!("collect_points({g}, {m}, P, V), Out = P-V"),
            format!("connected_components({g}, {m}, Out)"),
            format!("components_with_holes({g}, {m}, {bg}, Out)"),
            format!("connected_components({g}, {m}, Cs), findall(B, (member(component(_, Cells), Cs), component_bbox(Cells, B)), Out)"),
            // the listing can answer twice when no border cell is background
            format!("connected_components({g}, {m}, Cs), findall(H, (member(component(_, Cells), Cs), once(component_hole_count({g}, Cells, H))), Out)"),
            format!("connected_components({g}, {m}, Cs), findall(H, (member(component(_, Cells), Cs), once(component_hole_count({g}, Cells, {bg}, H))), Out)"),
            format!("connected_components({g}, {m}, Cs), apply_component_labels({g}, Cs, size_label, Out)"),
            format!("components_with_holes({g}, {m}, {bg}, Cs), apply_component_labels({g}, Cs, size_label, Out)"),
            format!("map_grid_cells({g}, shift, Out)"),
        ];
        for goal in goals {
            let qualified = goal
                .replace("grid_", "bk:grid_")
                .replace("collect_points(", "bk:collect_points(")
                .replace("connected_components(", "bk:connected_components(")
                .replace("components_with_holes(", "bk:components_with_holes(")
                .replace("component_bbox(", "bk:component_bbox(")
                .replace("component_hole_count(", "bk:component_hole_count(")
                .replace("apply_component_labels(", "bk:apply_component_labels(")
                .replace("map_bk:grid_cells(", "bk:map_grid_cells(");
            let a = run(&interpreted, &goal);
            let b = run(&native, &qualified);
            match (&a, &b) {
                (Ok(x), Ok(y)) => assert_eq!(x, y, "\n{goal}\n{qualified}"),
                (Err(_), Err(_)) => {}
                _ => panic!("{goal}: interpreted {a:?}, native {b:?}"),
            }
        }
    }
}
