//! Independent runs per task, grouped by what they predict on the test
//! inputs; the two strongest groups supply the submitted answers.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use abpr_grid::Grid;
use serde::{Deserialize, Serialize};

use crate::refine::{abpr_run, run_on, Hypothesis, Refiner, RunConfig, RunError, RunResult};
use crate::task::TaskRecord;

/// Predicted test outputs, or `None` when the program fails on some test
/// input.
pub type Signature = Option<Vec<Grid>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    /// Best member coverage, then group size.
    #[default]
    CoverageFirst,
    /// Group size, then best member coverage.
    ConsensusFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub instances: usize,
    pub base_seed: u64,
    /// Worker threads for the runs of one task.
    pub threads: usize,
    pub rank: RankOrder,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { instances: 8, base_seed: 0, threads: 8, rank: RankOrder::CoverageFirst }
    }
}

impl EnsembleConfig {
    pub fn seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

/// One finished run as seen by the vote.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub run: usize,
    pub coverage: usize,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    pub signature: Signature,
    /// Run indices, ascending.
    pub members: Vec<usize>,
    pub best_coverage: usize,
    /// Highest-coverage member, earliest run on ties.
    pub representative: usize,
}

impl CandidateGroup {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    fn key(&self, order: RankOrder) -> (usize, usize, std::cmp::Reverse<usize>) {
        let first = std::cmp::Reverse(self.members[0]);
        match order {
            RankOrder::CoverageFirst => (self.best_coverage, self.size(), first),
            RankOrder::ConsensusFirst => (self.size(), self.best_coverage, first),
        }
    }
}

/// Groups candidates by signature, strongest first. Groups that produce
/// outputs always rank above the group that does not.
pub fn group_candidates(candidates: &[Candidate], order: RankOrder) -> Vec<CandidateGroup> {
    let mut index: HashMap<&Signature, usize> = HashMap::new();
    let mut groups: Vec<CandidateGroup> = Vec::new();
    let mut sorted: Vec<&Candidate> = candidates.iter().collect();
    sorted.sort_by_key(|c| c.run);
    for c in sorted {
        match index.get(&c.signature) {
            Some(&g) => {
                let g = &mut groups[g];
                g.members.push(c.run);
                if c.coverage > g.best_coverage {
                    g.best_coverage = c.coverage;
                    g.representative = c.run;
                }
            }
            None => {
                index.insert(&c.signature, groups.len());
                groups.push(CandidateGroup {
                    signature: c.signature.clone(),
                    members: vec![c.run],
                    best_coverage: c.coverage,
                    representative: c.run,
                });
            }
        }
    }
    groups.sort_by(|a, b| {
        (b.signature.is_some(), b.key(order)).cmp(&(a.signature.is_some(), a.key(order)))
    });
    groups
}

/// At most two groups. The non-executing group is chosen only when no
/// other group exists.
pub fn vote_top2(candidates: &[Candidate], order: RankOrder) -> Vec<CandidateGroup> {
    let groups = group_candidates(candidates, order);
    let executing = groups.iter().filter(|g| g.signature.is_some()).count();
    let take = if executing == 0 { 1 } else { executing.min(2) };
    groups.into_iter().take(take).collect()
}

/// Runs the program on every test input; `None` if any input has no grid
/// answer.
pub fn signature(task: &TaskRecord, h: &Hypothesis, config: &RunConfig) -> Signature {
    let program = h.program()?;
    let limits = config.limits.engine();
    task.test.iter().map(|t| run_on(&program, &t.input, &limits).ok().flatten()).collect()
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub group: CandidateGroup,
    pub hypothesis: Hypothesis,
}

#[derive(Debug)]
pub struct EnsembleResult {
    pub runs: Vec<Result<RunResult, RunError>>,
    pub candidates: Vec<Candidate>,
    pub selected: Vec<Selection>,
}

/// Makes the refiner for one run of one task.
pub type RefinerFactory<'a> = dyn Fn(&TaskRecord, u64) -> Box<dyn Refiner> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnsembleError {
    #[error("all {} runs failed; first error: {}", .0.len(), .0[0])]
    AllRunsFailed(Vec<RunError>),
}

/// Runs `config.instances` independent refinement runs, seeds
/// `base_seed + i`, and votes over them. Failed runs are left out of the
/// vote.
pub fn run_ensemble(
    task: &TaskRecord,
    factory: &RefinerFactory,
    run: &RunConfig,
    config: &EnsembleConfig,
) -> Result<EnsembleResult, EnsembleError> {
    let n = config.instances;
    let slots: Mutex<Vec<Option<Result<RunResult, RunError>>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..config.threads.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let seed = config.seed(i);
                let mut refiner = factory(task, seed);
                let result = abpr_run(task, refiner.as_mut(), run, seed);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    let runs: Vec<_> = slots.into_inner().unwrap().into_iter().map(|r| r.expect("every run finished")).collect();
    if !runs.is_empty() && runs.iter().all(|r| r.is_err()) {
        return Err(EnsembleError::AllRunsFailed(runs.into_iter().filter_map(Result::err).collect()));
    }
    let candidates: Vec<Candidate> = runs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().ok().map(|r| (i, r)))
        .map(|(i, r)| Candidate { run: i, coverage: r.hypothesis.coverage, signature: signature(task, &r.hypothesis, run) })
        .collect();
    let selected = vote_top2(&candidates, config.rank)
        .into_iter()
        .map(|group| {
            let hypothesis = runs[group.representative].as_ref().expect("voted runs succeeded").hypothesis.clone();
            Selection { group, hypothesis }
        })
        .collect();
    Ok(EnsembleResult { runs, candidates, selected })
}

/// True when some selected group predicts every test output exactly.
/// `None` when the task has no test outputs to compare against.
pub fn pass_at_2(task: &TaskRecord, selected: &[CandidateGroup]) -> Option<bool> {
    if !task.has_test_outputs() {
        return None;
    }
    let expected: Vec<&Grid> = task.test.iter().filter_map(|t| t.output.as_ref()).collect();
    Some(selected.iter().take(2).any(|g| match &g.signature {
        Some(pred) => pred.len() == expected.len() && pred.iter().zip(&expected).all(|(p, e)| p == *e),
        None => false,
    }))
}
