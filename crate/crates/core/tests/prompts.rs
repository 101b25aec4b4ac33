mod common;

use std::sync::{Arc, Mutex};

use abpr_core::gateway::{
    render_examples, render_fix_prompt, ChatRequest, RequestKind, Transport, TransportError, DEFAULT_PROMPT_BUDGET,
};
use abpr_core::refine::{AttemptSummary, LlmRefiner, RefineContext};
use abpr_core::{abpr_run, Gateway, Hypothesis, PromptBundle, TaskRecord};
use common::*;

#[test]
fn examples_match_golden_rendering() {
    let task = TaskRecord::from_json(
        "g",
        r#"{"train":[{"input":[[1,2,3],[4,5,6]],"output":[[6,5,4],[3,2,1]]},{"input":[[0,0],[0,9]],"output":[[9]]}],
            "test":[{"input":[[1]]}]}"#,
    )
    .unwrap();
    assert_eq!(render_examples(&task, &[1, 0]), include_str!("golden/examples.txt"));
}

fn context(trace: String) -> RefineContext {
    let base = Hypothesis {
        source: COVERS_FIRST.into(),
        program: None,
        timestamp: 3,
        coverage: 1,
        outcomes: vec![],
        digest: String::new(),
        parse_error: None,
    };
    RefineContext {
        task_id: "t".into(),
        seed: 0,
        iteration: 3,
        max_iterations: 10,
        iteration_count: 3,
        attempts: vec![AttemptSummary::of(&base)],
        base,
        examples: String::new(),
        trace_detail: trace,
        challenge_diagrams: "Challenge 1 - Input:\n7 7\n7 7".into(),
        buggy_nodes: None,
    }
}

#[test]
fn oversized_trace_is_cut_to_budget() {
    let trace: String = (0..6_000).map(|i| format!("  ✓ node_{i:05}(x)\n")).collect::<String>().chars().take(100_000).collect();
    assert_eq!(trace.chars().count(), 100_000);
    let p = render_fix_prompt(&PromptBundle::default(), &context(trace), DEFAULT_PROMPT_BUDGET).unwrap();
    assert!(p.chars().count() <= DEFAULT_PROMPT_BUDGET);
    assert!(p.starts_with("**CODE REFINEMENT REQUIRED - Attempt 3/10**"));
    assert!(p.contains("node_00000"));
    assert!(p.contains("characters elided]"));
    assert!(p.contains("Challenge 1 - Input:\n7 7\n7 7"));
    assert!(p.contains("--- Attempt 3 (solved 1/0 training examples) ---"));
}

#[test]
fn small_prompts_are_untouched() {
    let p = render_fix_prompt(&PromptBundle::default(), &context("✓ solve".into()), DEFAULT_PROMPT_BUDGET).unwrap();
    assert!(!p.contains("elided"));
    assert!(p.contains("```\n✓ solve\n```"));
}

/// Records requests and answers from a closure.
struct Recorder {
    seen: Mutex<Vec<ChatRequest>>,
    reply: Box<dyn Fn(&ChatRequest) -> String + Send + Sync>,
}

impl Transport for Recorder {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        self.seen.lock().unwrap().push(req.clone());
        Ok((self.reply)(req))
    }
}

fn recorder(reply: impl Fn(&ChatRequest) -> String + Send + Sync + 'static) -> Arc<Recorder> {
    Arc::new(Recorder { seen: Mutex::new(Vec::new()), reply: Box::new(reply) })
}

#[test]
fn fix_requests_follow_the_first_exchange() {
    let task = inc_task();
    let rec = recorder(|req| {
        if req.seq == 0 {
            format!("Here you go.\n```prolog\n{COVERS_FIRST}\n```")
        } else {
            format!("```prolog\n{SOLVES_ALL}\n```")
        }
    });
    let gateway = Arc::new(Gateway::new(rec.clone(), 2));
    let cfg = config(3, 2);
    let mut r = LlmRefiner::new(gateway, Arc::new(PromptBundle::default()), &cfg, &task.id, 5);
    let out = abpr_run(&task, &mut r, &cfg, 5).unwrap();
    assert_eq!(out.solved_at, Some(2));
    let seen = rec.seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert!(seen[0].prior.is_empty());
    assert!(seen[0].user.contains("Example 1 - Input:"));
    assert_eq!(seen[1].prior.len(), 1);
    assert_eq!(seen[1].prior[0].user, seen[0].user);
    assert_eq!(seen[1].prior[0].assistant, format!("```prolog\n{COVERS_FIRST}\n```"));
    assert!(seen[1].user.starts_with("**CODE REFINEMENT REQUIRED - Attempt 1/3**"));
    assert_eq!(out.log[0].prompt_digest, seen[0].digest());
    assert_ne!(seen[0].digest(), seen[1].digest());
}

#[test]
fn explicit_localization_adds_buggy_nodes() {
    let task = inc_task();
    let wrong = "solve([[X]], [[Y]]) :- step(X, Y).\nstep(X, Y) :- Y is X + 2.";
    let rec = recorder(move |req| match req.kind {
        RequestKind::Oracle => "invalid".into(),
        RequestKind::Generate if req.seq == 0 => format!("```prolog\n{wrong}\n```"),
        RequestKind::Generate => format!("```prolog\n{SOLVES_ALL}\n```"),
    });
    let gateway = Arc::new(Gateway::new(rec.clone(), 2));
    let mut cfg = config(2, 2);
    cfg.explicit_localization = true;
    let mut r = LlmRefiner::new(gateway, Arc::new(PromptBundle::default()), &cfg, &task.id, 0);
    let out = abpr_run(&task, &mut r, &cfg, 0).unwrap();
    assert_eq!(out.solved_at, Some(2));
    let seen = rec.seen.lock().unwrap();
    let oracle: Vec<&ChatRequest> = seen.iter().filter(|r| r.kind == RequestKind::Oracle).collect();
    assert_eq!(oracle.len(), 1);
    assert!(oracle[0].user.contains("step(1,3)"), "{}", oracle[0].user);
    let fix = seen.iter().find(|r| r.kind == RequestKind::Generate && r.seq == 1).unwrap();
    assert!(fix.user.contains("CANDIDATE BUGGY NODES:\nTraining example 1, 1 oracle queries\nClause:\nstep(X,Y) :- Y is X + 2.\nInstance:\nstep(1,3)"), "{}", fix.user);
}
