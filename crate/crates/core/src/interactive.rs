//! Buggy-node search with a person as the oracle.

use std::io::{BufRead, Write};

use abpr_engine::apd::{locate_buggy_nodes, BuggyNodeSet, NodeOracle, OracleError, OracleVerdict};
use abpr_engine::{ComputationTree, Program, Term};

/// Asks on `output`, reads `y`, `n` or `u` lines from `input`.
pub struct InteractiveOracle<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    pub fn new(input: R, output: W) -> Self {
        InteractiveOracle { input, output }
    }

    pub fn into_output(self) -> W {
        self.output
    }
}

fn io_error(e: std::io::Error) -> OracleError {
    OracleError::OracleUnavailable(e.to_string())
}

impl<R: BufRead, W: Write> NodeOracle for InteractiveOracle<R, W> {
    fn verdict(&mut self, goal: &Term) -> Result<OracleVerdict, OracleError> {
        loop {
            write!(self.output, "Is `{goal}` correct? [y/n/u] ").map_err(io_error)?;
            self.output.flush().map_err(io_error)?;
            let mut line = String::new();
            if self.input.read_line(&mut line).map_err(io_error)? == 0 {
                return Err(OracleError::SessionAborted);
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => return Ok(OracleVerdict::Valid),
                "n" | "no" => return Ok(OracleVerdict::Invalid),
                "u" | "unknown" | "?" => return Ok(OracleVerdict::Unknown),
                "q" | "quit" => return Err(OracleError::SessionAborted),
                _ => writeln!(self.output, "please answer y, n or u").map_err(io_error)?,
            }
        }
    }
}

#[derive(Debug)]
pub enum SessionOutcome {
    /// The root was judged correct, so there is nothing to search.
    RootValid,
    Found(BuggyNodeSet),
}

/// Confirms the root with the user, then searches below it and prints the
/// buggy clause instances.
pub fn debug_session<R: BufRead, W: Write>(
    program: &Program,
    tree: &ComputationTree,
    oracle: &mut InteractiveOracle<R, W>,
    budget: usize,
) -> Result<SessionOutcome, OracleError> {
    // Unknown at the root is treated as a wrong answer.
    if oracle.verdict(&tree.goal())? == OracleVerdict::Valid {
        writeln!(oracle.output, "no buggy node under root").map_err(io_error)?;
        return Ok(SessionOutcome::RootValid);
    }
    let set = locate_buggy_nodes(tree, oracle, budget)?;
    let out = &mut oracle.output;
    if set.nodes.is_empty() {
        writeln!(out, "no buggy node found").map_err(io_error)?;
    }
    for n in &set.nodes {
        writeln!(out, "buggy clause: {}\n  instance: {}", program.clause(n.clause).text(), n.goal).map_err(io_error)?;
    }
    if set.truncated {
        writeln!(out, "query budget exhausted after {} questions", set.queries).map_err(io_error)?;
    }
    Ok(SessionOutcome::Found(set))
}
