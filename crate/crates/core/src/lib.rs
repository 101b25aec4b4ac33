//! Trace-guided program refinement for ARC tasks.
//!
//! A candidate Prolog program is run on the training pairs, its execution is
//! turned into computation trees, and a refiner (an LLM behind
//! [`gateway::Gateway`], or a script) proposes the next candidate. Several
//! independent runs are combined by [`ensemble::vote_top2`] and scored with
//! Pass@2.

pub mod ensemble;
pub mod gateway;
pub mod harness;
pub mod interactive;
pub mod refine;
pub mod task;

pub use ensemble::{pass_at_2, run_ensemble, vote_top2, Candidate, CandidateGroup, EnsembleConfig, EnsembleError, EnsembleResult, RankOrder, Signature};
pub use gateway::{extract_code_block, Gateway, PromptBundle};
pub use refine::{abpr_run, consistency_check, HistoryBuffer, Hypothesis, PairOutcome, Refiner, RunConfig, RunResult};
pub use task::{load_task, TaskRecord};

/// Hex SHA-256 of a string, used to fingerprint prompts, responses and
/// program sources in logs.
pub fn digest(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}
