//! Top-down bug localization over computation trees.

use std::collections::HashMap;

use thiserror::Error;

use crate::error::EngineError;
use crate::machine::{solve_first, ResourceLimits};
use crate::program::{ClauseId, Program};
use crate::term::Term;
use crate::trace::ComputationTree;

pub const DEFAULT_QUERY_BUDGET: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleVerdict {
    Valid,
    Invalid,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    /// An interactive session ended before the search finished.
    #[error("session aborted")]
    SessionAborted,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Answers whether a goal, as instantiated at exit, belongs to the intended
/// interpretation.
pub trait NodeOracle {
    fn verdict(&mut self, goal: &Term) -> Result<OracleVerdict, OracleError>;
}

impl<F> NodeOracle for F
where
    F: FnMut(&Term) -> Result<OracleVerdict, OracleError>,
{
    fn verdict(&mut self, goal: &Term) -> Result<OracleVerdict, OracleError> {
        self(goal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuggyNode {
    /// Child indices from the root.
    pub path: Vec<usize>,
    pub clause: ClauseId,
    pub goal: Term,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuggyNodeSet {
    pub nodes: Vec<BuggyNode>,
    pub truncated: bool,
    pub queries: usize,
    /// Every goal the oracle was asked about, in order.
    pub asked: Vec<(Term, OracleVerdict)>,
}

impl BuggyNodeSet {
    pub fn contains_clause(&self, id: ClauseId) -> bool {
        self.nodes.iter().any(|n| n.clause == id)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Judged children of a node: Success descendants reached through Control
/// nodes. True, builtin and failure leaves count as valid and are skipped.
fn judged_children<'t>(node: &'t ComputationTree, path: &[usize]) -> Vec<(Vec<usize>, &'t ComputationTree)> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, &ComputationTree)> = node
        .children()
        .iter()
        .enumerate()
        .rev()
        .map(|(i, c)| ([path, &[i]].concat(), c))
        .collect();
    while let Some((p, n)) = stack.pop() {
        match n {
            ComputationTree::Success { .. } => out.push((p, n)),
            ComputationTree::Control { children, .. } => {
                for (i, c) in children.iter().enumerate().rev() {
                    stack.push(([&p[..], &[i]].concat(), c));
                }
            }
            _ => {}
        }
    }
    out
}

struct Search<'o> {
    oracle: &'o mut dyn NodeOracle,
    memo: HashMap<String, OracleVerdict>,
    budget: usize,
    result: BuggyNodeSet,
}

impl Search<'_> {
    /// None once the budget is spent.
    fn ask(&mut self, goal: &Term) -> Result<Option<OracleVerdict>, OracleError> {
        let key = goal.to_string();
        if let Some(&v) = self.memo.get(&key) {
            return Ok(Some(v));
        }
        if self.result.queries >= self.budget {
            self.result.truncated = true;
            return Ok(None);
        }
        self.result.queries += 1;
        let v = self.oracle.verdict(goal)?;
        self.memo.insert(key, v);
        self.result.asked.push((goal.clone(), v));
        Ok(Some(v))
    }
}

/// Searches top-down from a root known to be invalid, descending only into
/// children the oracle judges invalid. A success node is reported when it is
/// invalid and all of its judged children are valid.
pub fn locate_buggy_nodes(
    tree: &ComputationTree,
    oracle: &mut dyn NodeOracle,
    budget: usize,
) -> Result<BuggyNodeSet, OracleError> {
    let mut s = Search { oracle, memo: HashMap::new(), budget, result: BuggyNodeSet::default() };
    let mut stack: Vec<(Vec<usize>, &ComputationTree)> = vec![(Vec::new(), tree)];
    'outer: while let Some((path, node)) = stack.pop() {
        let kids = judged_children(node, &path);
        let mut all_valid = true;
        let mut invalid = Vec::new();
        for (p, k) in kids {
            match s.ask(&k.goal())? {
                None => break 'outer,
                Some(OracleVerdict::Valid) => {}
                Some(OracleVerdict::Invalid) => {
                    all_valid = false;
                    invalid.push((p, k));
                }
                Some(OracleVerdict::Unknown) => all_valid = false,
            }
        }
        if all_valid {
            if let ComputationTree::Success { goal, clause, .. } = node {
                s.result.nodes.push(BuggyNode { path: path.clone(), clause: *clause, goal: goal.clone() });
            }
        }
        stack.extend(invalid.into_iter().rev());
    }
    Ok(s.result)
}

/// Oracle that treats a reference program as the intended interpretation.
pub struct GroundTruthOracle<'p> {
    reference: &'p Program,
    limits: ResourceLimits,
}

pub fn ground_truth_oracle(reference: &Program, limits: ResourceLimits) -> GroundTruthOracle<'_> {
    GroundTruthOracle { reference, limits }
}

impl NodeOracle for GroundTruthOracle<'_> {
    fn verdict(&mut self, goal: &Term) -> Result<OracleVerdict, OracleError> {
        Ok(match solve_first(self.reference, goal, &self.limits)? {
            Some(_) => OracleVerdict::Valid,
            None => OracleVerdict::Invalid,
        })
    }
}
