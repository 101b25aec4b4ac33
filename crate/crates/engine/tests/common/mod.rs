#![allow(dead_code)]

use abpr_engine::{parse_program, parse_query, parse_term, solve, solve_first, Program, ResourceLimits, Term};

pub fn program(src: &str) -> Program {
    parse_program(src).unwrap_or_else(|e| panic!("{e}"))
}

pub fn term(src: &str) -> Term {
    parse_term(src).unwrap_or_else(|e| panic!("{e}")).term
}

pub fn limits() -> ResourceLimits {
    ResourceLimits::default()
}

/// All answers to `q`, each rendered as `Name=Value` pairs in query order.
pub fn answers(p: &Program, q: &str) -> Vec<String> {
    let q = parse_query(q).unwrap();
    solve(p, &q.goal, &limits())
        .map(|b| {
            let b = b.unwrap();
            q.var_names
                .iter()
                .filter(|n| !n.starts_with('_'))
                .filter_map(|n| {
                    let v = Term::Var(q.var(n).unwrap());
                    let t = b.apply(&v);
                    (t != v).then(|| format!("{n}={t}"))
                })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

/// Value of `Out` in the first answer to `q`.
pub fn first_out(p: &Program, q: &str) -> Option<Term> {
    let q = parse_query(q).unwrap();
    let b = solve_first(p, &q.goal, &limits()).unwrap()?;
    Some(b.apply(&Term::Var(q.var("Out").unwrap())))
}

/// Random small programs over `p/1`, `q/1`, `r/2`, `s/1` with a mix of user
/// calls, cut, negation, if-then-else, arithmetic and list builtins.
pub fn random_program<R: rand::Rng>(rng: &mut R) -> String {
    const CONSTS: &[&str] = &["a", "b", "1", "2", "[1,2]"];
    let preds: &[(&str, usize)] = &[("p", 1), ("q", 1), ("r", 2), ("s", 1)];
    fn arg<R: rand::Rng>(rng: &mut R) -> String {
        if rng.random_bool(0.5) {
            ["X", "Y", "Z"][rng.random_range(0..3)].to_string()
        } else {
            CONSTS[rng.random_range(0..CONSTS.len())].to_string()
        }
    }
    let mut out = String::new();
    for _ in 0..rng.random_range(2..=6) {
        let pi = rng.random_range(0..preds.len());
        let (name, arity) = preds[pi];
        let head: Vec<String> = (0..arity).map(|_| arg(rng)).collect();
        out.push_str(&format!("{name}({})", head.join(",")));
        if rng.random_bool(0.5) {
            let mut body = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                let callee = if pi + 1 < preds.len() && rng.random_bool(0.9) {
                    rng.random_range(pi + 1..preds.len())
                } else {
                    rng.random_range(0..preds.len())
                };
                let (cn, ca) = preds[callee];
                let call = format!("{cn}({})", (0..ca).map(|_| arg(rng)).collect::<Vec<_>>().join(","));
                body.push(match rng.random_range(0..12) {
                    0..=4 => call,
                    5 => format!("\\+ {call}"),
                    6 => "!".to_string(),
                    7 => format!("( {call} -> {} = a ; true )", arg(rng)),
                    8 => format!("findall({}, {call}, {})", arg(rng), arg(rng)),
                    9 => format!("between(1, 2, {})", arg(rng)),
                    10 => format!("{} = {}", arg(rng), arg(rng)),
                    _ => format!("( {call} ; {} == b )", arg(rng)),
                });
            }
            out.push_str(" :- ");
            out.push_str(&body.join(", "));
        }
        out.push_str(".\n");
    }
    out
}
