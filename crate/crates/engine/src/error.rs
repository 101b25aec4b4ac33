use std::fmt;

use thiserror::Error;

use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported feature at line {line}: {feature}")]
    Unsupported { feature: String, line: usize },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. } | ParseError::Unsupported { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitKind {
    Steps,
    Depth,
    Timeout,
}

impl fmt::Display for LimitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitKind::Steps => "steps",
            LimitKind::Depth => "depth",
            LimitKind::Timeout => "timeout",
        })
    }
}

/// Runtime errors. Failure is not an error: unknown predicates fail.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("resource exhausted: {0}")]
    ResourceExhausted(LimitKind),
    #[error("instantiation error in {goal}")]
    Instantiation { goal: String },
    #[error("type error in {goal}: expected {expected}, found {culprit}")]
    Type { goal: String, expected: &'static str, culprit: String },
    #[error("evaluation error in {goal}: {what}")]
    Evaluation { goal: String, what: &'static str },
    #[error("invalid matcher {0}")]
    InvalidMatcher(String),
    #[error("callable expected, found {0}")]
    CallableExpected(String),
}

impl EngineError {
    pub(crate) fn type_error(expected: &'static str, culprit: &Term) -> Self {
        EngineError::Type { goal: String::new(), expected, culprit: culprit.to_string() }
    }

    pub(crate) fn instantiation() -> Self {
        EngineError::Instantiation { goal: String::new() }
    }

    pub(crate) fn evaluation(what: &'static str) -> Self {
        EngineError::Evaluation { goal: String::new(), what }
    }

    /// Fills in the goal being executed when the error was raised.
    pub(crate) fn in_goal(mut self, goal: &Term) -> Self {
        match &mut self {
            EngineError::Instantiation { goal: g }
            | EngineError::Type { goal: g, .. }
            | EngineError::Evaluation { goal: g, .. }
                if g.is_empty() =>
            {
                *g = crate::write::term_to_string_with(goal, &crate::write::WriteOptions::compact());
            }
            _ => {}
        }
        self
    }

    /// Short machine-readable kind, e.g. `steps`, `type`, `instantiation`.
    pub fn kind(&self) -> String {
        match self {
            EngineError::ResourceExhausted(k) => k.to_string(),
            EngineError::Instantiation { .. } => "instantiation".into(),
            EngineError::Type { .. } => "type".into(),
            EngineError::Evaluation { .. } => "evaluation".into(),
            EngineError::InvalidMatcher(_) => "invalid_matcher".into(),
            EngineError::CallableExpected(_) => "callable_expected".into(),
        }
    }
}
