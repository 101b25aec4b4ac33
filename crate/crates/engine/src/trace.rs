//! Computation trees recorded by traced solving, and their text rendering.

use std::fmt;
use std::rc::Rc;

use crate::error::EngineError;
use crate::program::{ClauseId, Program};
use crate::term::{atoms, Term, VarId};
use crate::unify::{unify_in, Bindings};
use crate::write::{term_to_string_with, WriteOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// No clause head unified with the call.
    NoClause,
    /// Some clause was entered but every derivation failed.
    AllClausesFailed,
    BuiltinFailed,
    /// A resource limit tripped on this path.
    Limit,
    /// A runtime error was raised on this path.
    Error,
}

impl FailureReason {
    fn label(self) -> &'static str {
        match self {
            FailureReason::NoClause => "no matching clause",
            FailureReason::AllClausesFailed => "all clauses failed",
            FailureReason::BuiltinFailed => "failed",
            FailureReason::Limit => "resource limit",
            FailureReason::Error => "error",
        }
    }
}

/// A reified derivation.
///
/// `Control` covers constructs that are neither user clauses nor leaves:
/// if-then-else, disjunction, `call/N`, `once/1`, `ignore/1`, `maplist`,
/// and a conjunctive query. Its children are the derivations it ran.
#[derive(Debug, Clone, PartialEq)]
pub enum ComputationTree {
    Success { goal: Term, clause: ClauseId, children: Vec<ComputationTree> },
    Control { goal: Term, children: Vec<ComputationTree> },
    Builtin { goal: Term },
    Failure { goal: Term, reason: FailureReason, children: Vec<ComputationTree> },
    True,
}

impl ComputationTree {
    pub fn goal(&self) -> Term {
        match self {
            ComputationTree::Success { goal, .. }
            | ComputationTree::Control { goal, .. }
            | ComputationTree::Builtin { goal }
            | ComputationTree::Failure { goal, .. } => goal.clone(),
            ComputationTree::True => Term::Atom(atoms::TRUE),
        }
    }

    pub fn children(&self) -> &[ComputationTree] {
        match self {
            ComputationTree::Success { children, .. }
            | ComputationTree::Control { children, .. }
            | ComputationTree::Failure { children, .. } => children,
            _ => &[],
        }
    }

    pub fn clause(&self) -> Option<ClauseId> {
        match self {
            ComputationTree::Success { clause, .. } => Some(*clause),
            _ => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, ComputationTree::Failure { .. })
    }

    /// Total number of nodes, TrueLeaf included.
    pub fn node_count(&self) -> usize {
        let mut n = 0;
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            n += 1;
            stack.extend(t.children());
        }
        n
    }

    pub fn contains_failure(&self) -> bool {
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            if t.is_failure() {
                return true;
            }
            stack.extend(t.children());
        }
        false
    }

    /// Preorder walk yielding each node with its depth.
    pub fn walk(&self) -> Vec<(usize, &ComputationTree)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, self)];
        while let Some((d, t)) = stack.pop() {
            out.push((d, t));
            for c in t.children().iter().rev() {
                stack.push((d + 1, c));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRenderOptions {
    pub max_nodes: usize,
    pub max_term_depth: usize,
    pub max_list_items: usize,
    pub indent_width: usize,
}

impl Default for TraceRenderOptions {
    fn default() -> Self {
        TraceRenderOptions { max_nodes: 800, max_term_depth: 6, max_list_items: 12, indent_width: 2 }
    }
}

impl TraceRenderOptions {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("max_nodes", self.max_nodes),
            ("max_term_depth", self.max_term_depth),
            ("max_list_items", self.max_list_items),
            ("indent_width", self.indent_width),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Renders one node per line. TrueLeaf children are folded into their
/// parent; a tree that is only `true` renders as `✓ true`.
pub fn render_trace(tree: &ComputationTree, opts: &TraceRenderOptions) -> String {
    let wopts = WriteOptions {
        max_depth: Some(opts.max_term_depth.max(1)),
        max_list: Some(opts.max_list_items.max(1)),
        var_names: Vec::new(),
    };
    let budget = opts.max_nodes.max(1);
    let mut out = String::new();
    let mut shown = 0usize;
    let mut elided = 0usize;
    let mut stack = vec![(0usize, tree, true)];
    while let Some((depth, node, is_root)) = stack.pop() {
        if matches!(node, ComputationTree::True) && !is_root {
            continue;
        }
        if shown == budget {
            elided += 1;
        } else {
            shown += 1;
            for _ in 0..depth * opts.indent_width {
                out.push(' ');
            }
            match node {
                ComputationTree::Success { goal, .. } | ComputationTree::Control { goal, .. } => {
                    out.push_str("✓ ");
                    out.push_str(&term_to_string_with(goal, &wopts));
                }
                ComputationTree::Builtin { goal } => {
                    out.push_str("• ");
                    out.push_str(&term_to_string_with(goal, &wopts));
                }
                ComputationTree::Failure { goal, reason, .. } => {
                    out.push_str("✗ ");
                    out.push_str(&term_to_string_with(goal, &wopts));
                    out.push_str("  [");
                    out.push_str(reason.label());
                    out.push(']');
                }
                ComputationTree::True => out.push_str("✓ true"),
            }
            out.push('\n');
        }
        for c in node.children().iter().rev() {
            stack.push((depth + 1, c, false));
        }
    }
    if elided > 0 {
        out.push_str(&format!("… ({elided} nodes elided)\n"));
    }
    out
}

impl fmt::Display for ComputationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_trace(self, &TraceRenderOptions::default()))
    }
}

/// Result of [`crate::solve_traced`].
#[derive(Debug, Clone)]
pub enum TraceOutcome {
    Proved { bindings: Bindings, tree: ComputationTree },
    /// The goal has no solution; the tree is the leftmost-deepest failure path.
    Failed { witness: ComputationTree },
}

impl TraceOutcome {
    pub fn bindings(&self) -> Option<&Bindings> {
        match self {
            TraceOutcome::Proved { bindings, .. } => Some(bindings),
            TraceOutcome::Failed { .. } => None,
        }
    }

    pub fn tree(&self) -> &ComputationTree {
        match self {
            TraceOutcome::Proved { tree, .. } => tree,
            TraceOutcome::Failed { witness } => witness,
        }
    }

    pub fn is_proved(&self) -> bool {
        matches!(self, TraceOutcome::Proved { .. })
    }
}

/// An engine error raised during traced solving, with the path that was
/// being explored when it happened.
#[derive(Debug, Clone)]
pub struct TraceError {
    pub error: EngineError,
    pub partial: Option<ComputationTree>,
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for TraceError {}

fn strip_module(t: &Term) -> Term {
    let mut t = t.clone();
    while t.is_functor(atoms::COLON, 2) {
        t = t.args()[1].clone();
    }
    t
}

/// Checks that every success node is a sound clause instance: the clause
/// head unifies with the node's goal and the flattened body conjuncts
/// unify, in order, with the children's goals.
pub fn replay_check(program: &Program, tree: &ComputationTree) -> Result<(), String> {
    let mut stack = vec![tree];
    while let Some(node) = stack.pop() {
        stack.extend(node.children());
        let ComputationTree::Success { goal, clause, children } = node else { continue };
        if clause.0 >= program.clauses().len() {
            return Err(format!("{goal}: clause {} does not exist", clause.0));
        }
        let cl = program.clause(*clause);
        if cl.body_goals().len() != children.len() {
            return Err(format!(
                "{goal}: clause has {} body goals but node has {} children",
                cl.body_goals().len(),
                children.len()
            ));
        }
        let mut offset = 0u32;
        let mut note = |t: &Term| {
            for v in t.variables() {
                offset = offset.max(v.0 + 1);
            }
        };
        note(goal);
        for c in children {
            note(&c.goal());
        }
        let rename = |t: &Term| t.map_vars(&mut |v: VarId| Term::Var(VarId(v.0 + offset)));
        let mut s = Bindings::new();
        if !unify_in(&mut s, &rename(&cl.head), &strip_module(goal)) {
            return Err(format!("{goal}: head of clause {} does not unify", clause.0));
        }
        for (g, c) in cl.body_goals().iter().zip(children) {
            if !unify_in(&mut s, &strip_module(&rename(g)), &strip_module(&c.goal())) {
                return Err(format!("{goal}: body goal {g} does not match child {}", c.goal()));
            }
        }
    }
    Ok(())
}

// ---- persistent structures used while recording ----

pub(crate) type Kids = Option<Rc<KidCell>>;

pub(crate) struct KidCell {
    pub(crate) node: Rc<TNode>,
    pub(crate) next: Kids,
}

impl Drop for KidCell {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut cell) => next = cell.next.take(),
                Err(_) => break,
            }
        }
    }
}

pub(crate) fn push_kid(node: TNode, kids: &Kids) -> Kids {
    Some(Rc::new(KidCell { node: Rc::new(node), next: kids.clone() }))
}

pub(crate) enum TNode {
    Success { goal: Term, clause: ClauseId, kids: Kids },
    Control { goal: Term, kids: Kids },
    Builtin { goal: Term },
    Failure { goal: Term, reason: FailureReason, kids: Kids },
    True,
}

fn kids_to_vec(kids: &Kids) -> Vec<ComputationTree> {
    let mut out = Vec::new();
    let mut cur = kids.as_ref();
    while let Some(cell) = cur {
        out.push(to_tree(&cell.node));
        cur = cell.next.as_ref();
    }
    out.reverse();
    out
}

pub(crate) fn to_tree(node: &TNode) -> ComputationTree {
    match node {
        TNode::Success { goal, clause, kids } => {
            ComputationTree::Success { goal: goal.clone(), clause: *clause, children: kids_to_vec(kids) }
        }
        TNode::Control { goal, kids } => ComputationTree::Control { goal: goal.clone(), children: kids_to_vec(kids) },
        TNode::Builtin { goal } => ComputationTree::Builtin { goal: goal.clone() },
        TNode::Failure { goal, reason, kids } => {
            ComputationTree::Failure { goal: goal.clone(), reason: *reason, children: kids_to_vec(kids) }
        }
        TNode::True => ComputationTree::True,
    }
}
