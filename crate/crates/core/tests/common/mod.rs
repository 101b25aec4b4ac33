#![allow(dead_code)]

use abpr_core::refine::{Limits, RunConfig};
use abpr_core::TaskRecord;

/// Three 1x1 pairs (1->2, 3->4, 5->6) and one test pair (7->8).
pub fn inc_task() -> TaskRecord {
    TaskRecord::from_json(
        "inc",
        r#"{"train":[{"input":[[1]],"output":[[2]]},{"input":[[3]],"output":[[4]]},{"input":[[5]],"output":[[6]]}],
            "test":[{"input":[[7]],"output":[[8]]}]}"#,
    )
    .unwrap()
}

pub const SOLVES_ALL: &str = "solve([[X]], [[Y]]) :- Y is X + 1.";
pub const COVERS_FIRST: &str = "solve([[1]], [[2]]).";
pub const COVERS_NONE: &str = "solve(X, X).";
pub const COVERS_TWO: &str = "solve([[1]], [[2]]).\nsolve([[3]], [[4]]).";
pub const COVERS_SECOND: &str = "solve([[3]], [[4]]).";
pub const UNPARSEABLE: &str = "solve(X, :- .";

pub fn config(max_iterations: u32, k: usize) -> RunConfig {
    RunConfig {
        max_iterations,
        buffer_k: k,
        retry_backoff_ms: 0,
        limits: Limits { steps: 100_000, depth: 2_000, timeout_ms: 60_000 },
        ..RunConfig::default()
    }
}
