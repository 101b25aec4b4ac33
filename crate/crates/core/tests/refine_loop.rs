mod common;

use abpr_core::refine::{ErrorKind, RunError, ScriptStep, ScriptedRefiner};
use abpr_core::{abpr_run, HistoryBuffer, Hypothesis, PairOutcome};
use common::*;
use proptest::prelude::*;

#[test]
fn third_sample_consistent_stops_at_t3() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([COVERS_NONE, COVERS_FIRST, SOLVES_ALL, COVERS_NONE]);
    let out = abpr_run(&task, &mut r, &config(10, 2), 7).unwrap();
    assert_eq!(out.solved_at, Some(3));
    assert_eq!(out.hypothesis.timestamp, 3);
    assert!(out.hypothesis.is_consistent());
    let ts: Vec<u32> = out.log.iter().map(|l| l.t).collect();
    assert_eq!(ts, [1, 2, 3]);
    assert_eq!(out.log[2].outcome, "consistent");
    assert_eq!(r.contexts.len(), 2);
}

#[test]
fn consistent_initial_program_needs_no_refinement() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([SOLVES_ALL]);
    let out = abpr_run(&task, &mut r, &config(1, 2), 0).unwrap();
    assert_eq!(out.log.len(), 1);
    assert_eq!(out.solved_at, Some(1));
    assert!(r.contexts.is_empty());
}

#[test]
fn coverage_sequence_1_0_2_1_with_k2() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([COVERS_FIRST, COVERS_NONE, COVERS_TWO, COVERS_SECOND]);
    let out = abpr_run(&task, &mut r, &config(3, 2), 1).unwrap();
    let cov: Vec<usize> = out.log.iter().map(|l| l.coverage).collect();
    assert_eq!(cov, [1, 0, 2, 1]);
    let kept: Vec<(usize, u32)> = out.buffer.iter().map(|h| (h.coverage, h.timestamp)).collect();
    assert_eq!(kept, [(2, 3), (1, 4)]);
    // the newest entry is the base each time, even with worse coverage
    let bases: Vec<u32> = r.contexts.iter().map(|c| c.base.timestamp).collect();
    assert_eq!(bases, [1, 2, 3]);
    assert_eq!(out.solved_at, None);
    assert_eq!((out.hypothesis.coverage, out.hypothesis.timestamp), (2, 3));
    // history: buffer entries plus the previous attempt, oldest first
    let shown: Vec<u32> = r.contexts[2].attempts.iter().map(|a| a.timestamp).collect();
    assert_eq!(shown, [1, 3]);
    let shown: Vec<u32> = r.contexts[1].attempts.iter().map(|a| a.timestamp).collect();
    assert_eq!(shown, [1, 2]);
}

#[test]
fn exhausted_run_returns_best_coverage() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([COVERS_NONE, COVERS_TWO, COVERS_FIRST, COVERS_NONE]);
    let out = abpr_run(&task, &mut r, &config(5, 2), 1).unwrap();
    assert_eq!(out.log.len(), 6);
    assert_eq!(out.hypothesis.timestamp, 2);
    assert!(out.log.iter().all(|l| l.coverage <= out.hypothesis.coverage));
}

#[test]
fn unparseable_samples_are_logged_and_lose_ties() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([COVERS_NONE, UNPARSEABLE]);
    let out = abpr_run(&task, &mut r, &config(2, 1), 1).unwrap();
    assert_eq!(out.log[1].outcome, "parse_error");
    assert_eq!(out.hypothesis.timestamp, 1);
    // with room for both, the unparseable sample is the latest and becomes the base
    let mut r = ScriptedRefiner::from_sources([COVERS_NONE, UNPARSEABLE]);
    abpr_run(&task, &mut r, &config(2, 2), 1).unwrap();
    assert_eq!(r.contexts[1].base.timestamp, 2);
    assert!(r.contexts[1].trace_detail.starts_with("The program does not parse:"), "{}", r.contexts[1].trace_detail);
}

#[test]
fn initial_parse_failures_are_retried_then_fatal() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([UNPARSEABLE, COVERS_FIRST]);
    let out = abpr_run(&task, &mut r, &config(1, 2), 1).unwrap();
    assert_eq!(out.log[0].t, 1);
    assert!(out.log[0].note.as_deref().unwrap().contains("1 unparseable"));
    let mut r = ScriptedRefiner::from_sources([UNPARSEABLE]);
    assert!(matches!(abpr_run(&task, &mut r, &config(1, 2), 1), Err(RunError::InitializationFailure(_))));
}

#[test]
fn transport_failures_are_retried() {
    let task = inc_task();
    let steps = vec![
        ScriptStep::Source(COVERS_NONE.into()),
        ScriptStep::TransportFailure,
        ScriptStep::TransportFailure,
        ScriptStep::Source(SOLVES_ALL.into()),
    ];
    let out = abpr_run(&task, &mut ScriptedRefiner::new(steps), &config(3, 2), 1).unwrap();
    assert_eq!(out.solved_at, Some(2));
    let steps = vec![ScriptStep::Source(COVERS_NONE.into()), ScriptStep::TransportFailure];
    assert!(matches!(abpr_run(&task, &mut ScriptedRefiner::new(steps), &config(3, 2), 1), Err(RunError::RefinerFailure(_))));
}

#[test]
fn trace_detail_covers_failing_pairs_only() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([COVERS_FIRST, COVERS_FIRST]);
    abpr_run(&task, &mut r, &config(1, 2), 3).unwrap();
    let detail = &r.contexts[0].trace_detail;
    assert!(!detail.contains("Training example 1:"), "{detail}");
    assert!(detail.contains("=== Training example 2: no solution ==="), "{detail}");
    assert!(detail.contains("=== Training example 3: no solution ==="), "{detail}");
    assert!(detail.contains("INPUT") && detail.contains("EXPECTED") && detail.contains("ACTUAL"));
    assert!(detail.contains("PROOF TREE (failure witness):\n✗ solve([[3]],_G"), "{detail}");
}

#[test]
fn wrong_outputs_get_a_diff_and_proof_tree() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources([COVERS_NONE, COVERS_NONE]);
    let out = abpr_run(&task, &mut r, &config(1, 2), 3).unwrap();
    assert!(matches!(out.hypothesis.outcomes[0], PairOutcome::WrongOutput { .. }));
    let detail = &r.contexts[0].trace_detail;
    assert!(detail.contains("DIFFERENCE SUMMARY:"), "{detail}");
    assert!(detail.contains("PROOF TREE:\n✓ solve([[1]],[[1]])"), "{detail}");
}

#[test]
fn runs_are_deterministic() {
    let task = inc_task();
    let run = || {
        let mut r = ScriptedRefiner::from_sources([COVERS_NONE, COVERS_FIRST, UNPARSEABLE, COVERS_TWO, COVERS_SECOND]);
        let out = abpr_run(&task, &mut r, &config(6, 2), 42).unwrap();
        let log: Vec<_> = out.log.iter().map(|l| l.untimed()).collect();
        (log, out.hypothesis, r.contexts)
    };
    assert_eq!(run(), run());
}

#[test]
fn error_kinds_reach_the_outcomes() {
    let task = inc_task();
    let mut r = ScriptedRefiner::from_sources(["solve(X, Y) :- solve(X, Y)."]);
    let mut cfg = config(0, 2);
    cfg.limits.depth = 50;
    let out = abpr_run(&task, &mut r, &cfg, 0).unwrap();
    assert!(out.hypothesis.outcomes.iter().all(|o| matches!(o, PairOutcome::Error { kind: ErrorKind::Depth, .. })));
}

fn hyp(coverage: usize, timestamp: u32, parsed: bool) -> Hypothesis {
    Hypothesis {
        source: String::new(),
        program: None,
        timestamp,
        coverage,
        outcomes: vec![],
        digest: String::new(),
        parse_error: (!parsed).then(|| "x".to_string()),
    }
}

proptest! {
    #[test]
    fn buffer_keeps_the_top_k(k in 1usize..5, offers in prop::collection::vec((0usize..5, any::<bool>()), 1..30)) {
        let mut b = HistoryBuffer::new(k);
        let mut all = Vec::new();
        let mut best_so_far = 0;
        for (i, (c, parsed)) in offers.into_iter().enumerate() {
            let h = hyp(if parsed { c } else { 0 }, i as u32 + 1, parsed);
            all.push(h.rank_key());
            b.offer(h);
            prop_assert!(b.entries().len() <= k);
            let best = b.best().unwrap().coverage;
            prop_assert!(best >= best_so_far);
            best_so_far = best;
            let mut expect = all.clone();
            expect.sort_by(|a, b| b.cmp(a));
            expect.truncate(k);
            let kept: Vec<_> = b.entries().iter().map(|h| h.rank_key()).collect();
            prop_assert_eq!(kept, expect);
        }
    }
}
