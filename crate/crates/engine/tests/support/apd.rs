//! Single-clause corruption trials for the buggy-node search, judged by the
//! uncorrupted program.
#![allow(dead_code)]

use std::collections::HashMap;

use abpr_engine::apd::{ground_truth_oracle, locate_buggy_nodes, BuggyNodeSet, OracleVerdict, DEFAULT_QUERY_BUDGET};
use abpr_engine::{parse_query, solve, solve_first, solve_traced, ClauseId, ComputationTree, Program, ResourceLimits, Term, TraceOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::program;

pub const NODES: usize = 5;

/// A layered program over a random DAG: edge facts, value facts and a
/// few arithmetic rules. Every derived answer is ground.
pub fn base_program(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut clauses = Vec::new();
    for i in 0..NODES {
        for j in i + 1..NODES {
            if rng.random_bool(0.45) {
                clauses.push(format!("e(n{i}, n{j})."));
            }
        }
    }
    if !clauses.iter().any(|c| c.starts_with("e(n0")) {
        clauses.push("e(n0, n1).".into());
    }
    for i in 0..NODES {
        clauses.push(format!("val(n{i}, {}).", rng.random_range(0..10)));
    }
    clauses.push("path(X, Y) :- e(X, Y).".into());
    clauses.push("path(X, Y) :- e(X, Z), path(Z, Y).".into());
    clauses.push("score(X, S) :- val(X, V), S is V * 2.".into());
    clauses.push("total(X, Y, T) :- score(X, A), score(Y, B), T is A + B.".into());
    clauses.push("top(Y, T) :- path(n0, Y), total(n0, Y, T).".into());
    clauses
}

/// Replaces one clause by a plausible wrong variant. Returns None when the
/// chosen clause has no mutation that keeps the program terminating.
pub fn corrupt(rng: &mut ChaCha8Rng, clauses: &[String]) -> Option<(usize, String)> {
    let i = rng.random_range(0..clauses.len());
    let c = &clauses[i];
    let wrong = if let Some(rest) = c.strip_prefix("e(n") {
        let from: usize = rest[..1].parse().unwrap();
        let to: usize = rest[4..5].parse().unwrap();
        let others: Vec<usize> = (from + 1..NODES).filter(|&k| k != to).collect();
        if others.is_empty() {
            return None;
        }
        format!("e(n{from}, n{}).", others[rng.random_range(0..others.len())])
    } else if c.starts_with("val(") {
        let old: i64 = c[8..c.len() - 2].parse().unwrap();
        format!("val({}, {}).", &c[4..6], (old + rng.random_range(1..9)) % 10)
    } else {
        let options: &[&str] = match c.as_str() {
            "path(X, Y) :- e(X, Y)." => &["path(X, Y) :- e(X, Z), e(Z, Y).", "path(X, X) :- e(X, Y)."],
            "path(X, Y) :- e(X, Z), path(Z, Y)." => &["path(X, Y) :- e(X, Z), path(Z, W), e(W, Y).", "path(X, Z) :- e(X, Z), path(Z, Y)."],
            "score(X, S) :- val(X, V), S is V * 2." => &["score(X, S) :- val(X, V), S is V * 3.", "score(X, S) :- val(X, V), S is V + 2."],
            "total(X, Y, T) :- score(X, A), score(Y, B), T is A + B." => {
                &["total(X, Y, T) :- score(X, A), score(Y, B), T is A - B.", "total(X, Y, T) :- score(X, A), score(X, B), T is A + B."]
            }
            _ => &["top(Y, T) :- path(n1, Y), total(n0, Y, T).", "top(Y, T) :- path(n0, Y), total(Y, Y, T)."],
        };
        options[rng.random_range(0..options.len())].to_string()
    };
    (wrong != *c).then_some((i, wrong))
}

pub fn limits() -> ResourceLimits {
    ResourceLimits { max_steps: 200_000, ..ResourceLimits::default() }
}

/// Ground answers the buggy program gives that the reference does not.
pub fn wrong_answers(buggy: &Program, reference: &Program) -> Vec<Term> {
    let mut out = Vec::new();
    for q in ["top(Y, T)", "total(n0, Y, T)", "path(n0, Y)", "score(X, S)", "path(X, Y)"] {
        let q = parse_query(q).unwrap();
        for b in solve(buggy, &q.goal, &limits()).take(40) {
            let g = b.unwrap().apply(&q.goal);
            if solve_first(reference, &g, &limits()).unwrap().is_none() && !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// Every node goal, flagged when the node sits below a node judged valid.
pub fn hidden_goals(tree: &ComputationTree, verdicts: &HashMap<String, OracleVerdict>) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    let mut stack = vec![(tree, false)];
    while let Some((node, hidden)) = stack.pop() {
        let g = node.goal().to_string();
        out.push((g.clone(), hidden));
        let below = hidden || verdicts.get(&g) == Some(&OracleVerdict::Valid);
        for c in node.children() {
            stack.push((c, below));
        }
    }
    out
}

pub fn check_no_query_below_valid(tree: &ComputationTree, set: &BuggyNodeSet) -> Result<(), String> {
    let verdicts: HashMap<String, OracleVerdict> = set.asked.iter().map(|(g, v)| (g.to_string(), *v)).collect();
    let nodes = hidden_goals(tree, &verdicts);
    for (g, _) in &set.asked {
        let g = g.to_string();
        if !nodes.iter().any(|(n, hidden)| *n == g && !hidden) {
            return Err(format!("{g} was only reachable under a valid node"));
        }
    }
    Ok(())
}

pub fn node_at<'t>(tree: &'t ComputationTree, path: &[usize]) -> &'t ComputationTree {
    path.iter().fold(tree, |n, &i| &n.children()[i])
}

/// `n` corruption trials: the corrupted clause is always found, every
/// reported node is an instance of it, and nothing below a valid node is
/// ever asked about.
pub fn check_corruption_trials(n: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut trials = 0;
    let mut attempts = 0;
    let mut total_queries = 0;
    while trials < n {
        attempts += 1;
        if attempts >= 5_000 {
            return Err("generator produced too few detectable corruptions".into());
        }
        let clauses = base_program(&mut rng);
        let Some((idx, wrong)) = corrupt(&mut rng, &clauses) else { continue };
        let reference = program(&clauses.join("\n"));
        let mut mutated = clauses.clone();
        mutated[idx] = wrong;
        let buggy = program(&mutated.join("\n"));
        let wrongs = wrong_answers(&buggy, &reference);
        let Some(goal) = wrongs.first() else { continue };
        let src = mutated.join("\n");
        let tree = match solve_traced(&buggy, goal, &limits()) {
            Ok(TraceOutcome::Proved { tree, .. }) => tree,
            other => return Err(format!("{goal} was an answer but traced to {:?}", other.map(|o| o.is_proved()))),
        };
        let mut oracle = ground_truth_oracle(&reference, limits());
        let set = locate_buggy_nodes(&tree, &mut oracle, DEFAULT_QUERY_BUDGET).map_err(|e| e.to_string())?;
        if set.truncated {
            return Err(format!("query budget ran out\n{src}\n?- {goal}"));
        }
        if !set.contains_clause(ClauseId(idx)) {
            return Err(format!("clause {idx} missed\n{src}\n?- {goal}\n{tree}"));
        }
        for node in &set.nodes {
            let at = node_at(&tree, &node.path);
            if node.clause != ClauseId(idx) || at.clause() != Some(node.clause) || at.goal() != node.goal {
                return Err(format!("wrong node {:?}\n{src}\n?- {goal}", node.goal.to_string()));
            }
        }
        check_no_query_below_valid(&tree, &set)?;
        total_queries += set.queries;
        trials += 1;
    }
    Ok(format!("{n}/{n} corrupted clauses found ({attempts} generated), mean {:.1} oracle queries, no query below a valid node", total_queries as f64 / n as f64))
}
