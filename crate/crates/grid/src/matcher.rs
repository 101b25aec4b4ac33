use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Cell-selection predicate over color values.
///
/// Goal-valued matchers (a callable applied to each value) need an engine
/// and live in the engine crate; they reduce to a `Values` set before
/// reaching these primitives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Matcher {
    Any,
    Nonzero,
    Color(u8),
    Values(BTreeSet<u8>),
}

impl Matcher {
    pub fn values<I: IntoIterator<Item = u8>>(vs: I) -> Self {
        Matcher::Values(vs.into_iter().collect())
    }

    pub fn matches(&self, value: u8) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Nonzero => value != 0,
            Matcher::Color(c) => *c == value,
            Matcher::Values(vs) => vs.contains(&value),
        }
    }
}
