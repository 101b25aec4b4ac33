//! Trace soundness against plain execution, and the render budget law on
//! adversarial trees.
#![allow(dead_code)]

use abpr_engine::{
    parse_query, render_trace, replay_check, solve, solve_traced, ClauseId, ComputationTree, FailureReason, ResourceLimits, Term,
    TraceOutcome, TraceRenderOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::{program, random_program};

/// Traced and plain execution agree on 100 random programs (4 queries
/// each); every proof tree replays.
pub fn check_soundness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    // wall time differs between the modes, so only step and depth limits may trip
    let lim = ResourceLimits { max_steps: 200_000, max_depth: 400, timeout_ms: 120_000 };
    let (mut proved, mut failed, mut errors) = (0, 0, 0);
    for _ in 0..100 {
        let src = random_program(&mut rng);
        let p = program(&src);
        for q in ["p(X)", "q(X)", "r(X, Y)", "s(X)"] {
            let q = parse_query(q).unwrap();
            let plain = solve(&p, &q.goal, &lim).next();
            match (plain, solve_traced(&p, &q.goal, &lim)) {
                (Some(Err(e)), Err(te)) if e == te.error => errors += 1,
                (None, Ok(TraceOutcome::Failed { witness })) if witness.is_failure() => failed += 1,
                (Some(Ok(b)), Ok(TraceOutcome::Proved { bindings, tree })) => {
                    if b != bindings {
                        return Err(format!("bindings differ on\n{src}"));
                    }
                    replay_check(&p, &tree).map_err(|e| format!("{e}\n{src}"))?;
                    if tree.contains_failure() {
                        return Err(format!("proof tree holds a failure node\n{src}"));
                    }
                    proved += 1;
                }
                (a, b) => return Err(format!("disagreement on {src}: {a:?} vs {:?}", b.map(|o| o.is_proved()))),
            }
        }
    }
    if proved < 50 {
        return Err(format!("only {proved} proofs"));
    }
    Ok(format!("400 queries: {proved} proved and replayed, {failed} failed, {errors} errors, all matching"))
}

fn chain(n: usize) -> ComputationTree {
    let mut node = ComputationTree::Builtin { goal: Term::atom("leaf") };
    for i in (1..n).rev() {
        node = ComputationTree::Success { goal: Term::app("c", vec![Term::int(i as i64)]), clause: ClauseId(0), children: vec![node] };
    }
    node
}

fn fan(n: usize) -> ComputationTree {
    let children = (0..n).map(|i| ComputationTree::Builtin { goal: Term::int(i as i64) }).collect();
    ComputationTree::Success { goal: Term::atom("root"), clause: ClauseId(0), children }
}

fn random_tree(rng: &mut ChaCha8Rng, depth: u32) -> ComputationTree {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..3) {
            0 => ComputationTree::True,
            1 => ComputationTree::Builtin { goal: Term::atom("b") },
            _ => ComputationTree::Failure { goal: Term::atom("f"), reason: FailureReason::NoClause, children: vec![] },
        };
    }
    let width = if rng.random_bool(0.1) { 60 } else { 5 };
    let n = rng.random_range(0..width);
    let children = (0..n).map(|_| random_tree(rng, depth - 1)).collect();
    if rng.random_bool(0.8) {
        ComputationTree::Success { goal: Term::atom("s"), clause: ClauseId(0), children }
    } else {
        ComputationTree::Control { goal: Term::atom("c"), children }
    }
}

/// At most `max_nodes` node lines plus one elision line, whatever the shape.
pub fn check_render_budget() -> Result<String, String> {
    let text = render_trace(&chain(10_000), &TraceRenderOptions { max_nodes: 500, ..TraceRenderOptions::default() });
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != 501 || lines[500] != "… (9500 nodes elided)" {
        return Err(format!("10,000-node chain rendered {} lines, last {:?}", lines.len(), lines.last()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut trees = vec![chain(3_000), fan(5_000)];
    trees.extend((0..200).map(|_| random_tree(&mut rng, 8)));
    for (i, tree) in trees.iter().enumerate() {
        for max_nodes in [1, 2, 7, 50, 800] {
            let text = render_trace(tree, &TraceRenderOptions { max_nodes, ..TraceRenderOptions::default() });
            let n = text.lines().count();
            if n > max_nodes + 1 || !text.ends_with('\n') {
                return Err(format!("tree {i} with budget {max_nodes} rendered {n} lines"));
            }
        }
    }
    Ok(format!("10,000-node chain gives 501 lines; {} adversarial trees within budget", trees.len()))
}
