//! The resolution machine: depth-first SLD with cut over a trailed store,
//! with optional recording of computation trees.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::arith;
use crate::builtins::{self, Mode, Native, Outcome, Tier};
use crate::error::{EngineError, LimitKind};
use crate::library;
use crate::program::{ArgKey, ClauseId, Program};
use crate::term::{atoms, Atom, Term, VarId};
use crate::trace::{push_kid, to_tree, ComputationTree, FailureReason, Kids, TNode, TraceError, TraceOutcome};
use crate::unify::{compare_in, deref, resolve, unify_in, Bindings, Store};

type Res<T> = Result<T, EngineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceLimits {
    pub max_steps: u64,
    pub max_depth: usize,
    pub timeout_ms: u64,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        ResourceLimits { max_steps: 5_000_000, max_depth: 10_000, timeout_ms: 10_000 }
    }
}

impl ResourceLimits {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps == 0 || self.max_depth == 0 || self.timeout_ms == 0 {
            return Err("resource limits must be strictly positive".into());
        }
        Ok(())
    }
}

// ---- store ----

#[derive(Default)]
pub(crate) struct Heap {
    vals: Vec<Option<Term>>,
    trail: Vec<u32>,
}

impl Store for Heap {
    fn binding(&self, v: VarId) -> Option<&Term> {
        self.vals.get(v.0 as usize).and_then(Option::as_ref)
    }

    fn bind(&mut self, v: VarId, t: Term) {
        let i = v.0 as usize;
        if i >= self.vals.len() {
            self.vals.resize(i + 1, None);
        }
        self.vals[i] = Some(t);
        self.trail.push(v.0);
    }
}

impl Heap {
    fn alloc(&mut self, n: usize) -> u32 {
        let base = self.vals.len();
        self.vals.resize(base + n, None);
        base as u32
    }

    fn undo(&mut self, trail_len: usize, store_len: usize) {
        while self.trail.len() > trail_len {
            let v = self.trail.pop().unwrap() as usize;
            if v < self.vals.len() {
                self.vals[v] = None;
            }
        }
        self.vals.truncate(store_len);
    }
}

fn rename(t: &Term, offset: u32) -> Term {
    t.map_vars(&mut |v| Term::Var(VarId(v.0 + offset)))
}

// ---- continuations ----

type Cont = Option<Rc<Frame>>;

struct Frame {
    item: Item,
    next: Cont,
}

impl Drop for Frame {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut f) => next = f.next.take(),
                Err(_) => break,
            }
        }
    }
}

enum Item {
    Call { goal: Term, depth: usize, cutb: usize },
    CutTo(usize),
    SoftCut(usize),
    Exit,
    ExitOpaque(usize),
    SetQuiet(bool),
    Collect { acc: Rc<RefCell<Vec<Term>>>, template: Term },
}

fn push(item: Item, next: Cont) -> Cont {
    Some(Rc::new(Frame { item, next }))
}

fn call_item(goal: Term, depth: usize, cutb: usize, next: Cont) -> Cont {
    push(Item::Call { goal, depth, cutb }, next)
}

// ---- choicepoints ----

#[derive(Clone, Copy, PartialEq, Eq)]
enum Src {
    User,
    Lib,
}

enum Alt {
    Clauses { src: Src, goal: Term, raw: Term, ids: Arc<[usize]>, next: usize, depth: usize, cont: Cont },
    Resume { cont: Cont },
    Between { var: Term, next: i64, hi: Option<i64>, raw: Term, cont: Cont },
    FindallEnd { acc: Rc<RefCell<Vec<Term>>>, result: Term, tail: Term, cont: Cont },
    Sentinel { goal: Term },
    Dead,
}

struct ChoicePoint {
    alt: Alt,
    trail_len: usize,
    store_len: usize,
    trace: Option<TraceState>,
}

// ---- trace recording ----

#[derive(Clone, Copy, PartialEq, Eq)]
enum OpenKind {
    Root,
    Clause(ClauseId),
    Control,
}

struct Open {
    kind: OpenKind,
    call_goal: Term,
    raw: Term,
    kids: Kids,
    parent: Option<Rc<Open>>,
    depth: usize,
}

impl Drop for Open {
    fn drop(&mut self) {
        let mut next = self.parent.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut o) => next = o.parent.take(),
                Err(_) => break,
            }
        }
    }
}

#[derive(Clone)]
struct TraceState {
    open: Rc<Open>,
    quiet: bool,
    mute: Option<Term>,
}

struct Witness {
    depth: usize,
    leaf: TNode,
    path: Rc<Open>,
}

struct Tracer {
    state: TraceState,
    best: Option<Witness>,
}

/// Reasons a call does not continue normally.
enum Flow {
    Go,
    Fail,
}

pub(crate) struct Machine<'p> {
    prog: &'p Program,
    heap: Heap,
    cps: Vec<ChoicePoint>,
    cont: Cont,
    limits: ResourceLimits,
    steps: u64,
    deadline: Instant,
    tr: Option<Tracer>,
    last_goal: Term,
}

impl<'p> Machine<'p> {
    pub(crate) fn new(prog: &'p Program, limits: ResourceLimits, tracing: bool) -> Self {
        let timeout = Duration::from_millis(limits.timeout_ms.max(1));
        Machine {
            prog,
            heap: Heap::default(),
            cps: Vec::new(),
            cont: None,
            limits,
            steps: 0,
            deadline: Instant::now() + timeout,
            tr: tracing.then(|| Tracer {
                state: TraceState {
                    open: Rc::new(Open {
                        kind: OpenKind::Root,
                        call_goal: Term::Atom(atoms::TRUE),
                        raw: Term::Atom(atoms::TRUE),
                        kids: None,
                        parent: None,
                        depth: 0,
                    }),
                    quiet: false,
                    mute: None,
                },
                best: None,
            }),
            last_goal: Term::Atom(atoms::TRUE),
        }
    }

    pub(crate) fn steps(&self) -> u64 {
        self.steps
    }

    /// Loads a query whose variables are already heap variables.
    fn start(&mut self, goal: Term) {
        if let Some(tr) = &mut self.tr {
            let o = &tr.state.open;
            tr.state.open = Rc::new(Open {
                kind: OpenKind::Root,
                call_goal: goal.clone(),
                raw: goal.clone(),
                kids: None,
                parent: None,
                depth: o.depth,
            });
        }
        self.cont = call_item(goal, 0, 0, None);
    }

    // ---- helpers for natives ----

    pub(crate) fn deref(&self, t: &Term) -> Term {
        deref(&self.heap, t)
    }

    pub(crate) fn resolve(&self, t: &Term) -> Term {
        resolve(&self.heap, t)
    }

    pub(crate) fn unify(&mut self, a: &Term, b: &Term) -> bool {
        unify_in(&mut self.heap, a, b)
    }

    /// Whether `a` and `b` unify, leaving no bindings behind.
    pub(crate) fn unifiable(&mut self, a: &Term, b: &Term) -> bool {
        let (tl, sl) = self.mark();
        let r = self.unify(a, b);
        self.heap.undo(tl, sl);
        r
    }

    pub(crate) fn fresh(&mut self) -> Term {
        Term::Var(VarId(self.heap.alloc(1)))
    }

    pub(crate) fn eval(&self, t: &Term) -> Res<i64> {
        arith::eval(&self.heap, t)
    }

    pub(crate) fn compare(&self, a: &Term, b: &Term) -> Ordering {
        compare_in(&self.heap, a, b)
    }

    /// Items of a proper list, dereferencing the spine.
    pub(crate) fn list(&self, t: &Term) -> Option<Vec<Term>> {
        let (items, tail) = self.partial_list(t);
        (tail == Term::nil()).then_some(items)
    }

    /// Items of a list prefix and the dereferenced tail.
    pub(crate) fn partial_list(&self, t: &Term) -> (Vec<Term>, Term) {
        let mut items = Vec::new();
        let mut cur = self.deref(t);
        loop {
            let next = match &cur {
                Term::Compound(c) if c.functor() == atoms::DOT && c.arity() == 2 => {
                    items.push(c.args()[0].clone());
                    self.deref(&c.args()[1])
                }
                _ => return (items, cur),
            };
            cur = next;
        }
    }

    /// Copy of a term with every unbound variable replaced by a fresh one.
    pub(crate) fn copy_fresh(&mut self, t: &Term) -> Term {
        let t = self.resolve(t);
        let mut map: HashMap<VarId, Term> = HashMap::new();
        let heap = &mut self.heap;
        t.map_vars(&mut |v| map.entry(v).or_insert_with(|| Term::Var(VarId(heap.alloc(1)))).clone())
    }

    fn mark(&self) -> (usize, usize) {
        (self.heap.trail.len(), self.heap.vals.len())
    }

    // ---- choicepoints ----

    fn snapshot(&self) -> Option<TraceState> {
        self.tr.as_ref().map(|t| t.state.clone())
    }

    fn push_cp(&mut self, alt: Alt) {
        let (trail_len, store_len) = self.mark();
        self.push_cp_at(alt, trail_len, store_len);
    }

    fn push_cp_at(&mut self, alt: Alt, trail_len: usize, store_len: usize) {
        let trace = self.snapshot();
        self.cps.push(ChoicePoint { alt, trail_len, store_len, trace });
    }

    fn cut(&mut self, h: usize) {
        if self.cps.len() > h {
            self.cps.truncate(h);
        }
    }

    // ---- tracing ----

    fn tracing(&self) -> bool {
        self.tr.as_ref().is_some_and(|t| t.state.mute.is_none())
    }

    fn add_kid(&mut self, node: TNode) {
        if let Some(tr) = &mut self.tr {
            if tr.state.mute.is_some() {
                return;
            }
            let o = &tr.state.open;
            tr.state.open = Rc::new(Open {
                kind: o.kind,
                call_goal: o.call_goal.clone(),
                raw: o.raw.clone(),
                kids: push_kid(node, &o.kids),
                parent: o.parent.clone(),
                depth: o.depth,
            });
        }
    }

    fn builtin_leaf(&mut self, raw: &Term) {
        if self.tracing() {
            let goal = self.resolve(raw);
            self.add_kid(TNode::Builtin { goal });
        }
    }

    fn open(&mut self, kind: OpenKind, raw: &Term, call_goal: Term) {
        if let Some(tr) = &mut self.tr {
            let parent = tr.state.open.clone();
            tr.state.open = Rc::new(Open {
                kind,
                call_goal,
                raw: raw.clone(),
                kids: None,
                depth: parent.depth + 1,
                parent: Some(parent),
            });
        }
    }

    fn exit(&mut self) {
        let Some(tr) = &self.tr else { return };
        let o = tr.state.open.clone();
        let goal = self.resolve(&o.raw);
        let node = match o.kind {
            OpenKind::Clause(id) => TNode::Success { goal, clause: id, kids: o.kids.clone() },
            OpenKind::Control => TNode::Control { goal, kids: o.kids.clone() },
            OpenKind::Root => return,
        };
        let tr = self.tr.as_mut().unwrap();
        tr.state.open = o.parent.clone().expect("open node has a parent");
        self.add_kid(node);
    }

    /// Starts an opaque call: pushes a sentinel that reports the call's
    /// failure and mutes recording until the call exits.
    fn begin_opaque(&mut self, raw: &Term) -> Option<usize> {
        if !self.tracing() {
            return None;
        }
        let idx = self.cps.len();
        self.push_cp(Alt::Sentinel { goal: raw.clone() });
        self.tr.as_mut().unwrap().state.mute = Some(raw.clone());
        Some(idx)
    }

    fn exit_opaque(&mut self, idx: usize) {
        if let Some(cp) = self.cps.get_mut(idx) {
            if matches!(cp.alt, Alt::Sentinel { .. }) {
                cp.alt = Alt::Dead;
            }
        }
        let Some(tr) = &mut self.tr else { return };
        if let Some(goal) = tr.state.mute.take() {
            let goal = self.resolve(&goal);
            self.add_kid(TNode::Builtin { goal });
        }
    }

    fn opaque_cont(&mut self, raw: &Term, next: Cont) -> Cont {
        match self.begin_opaque(raw) {
            Some(idx) => push(Item::ExitOpaque(idx), next),
            None => next,
        }
    }

    fn record_failure(&mut self, raw: &Term, reason: FailureReason) {
        let Some(tr) = &self.tr else { return };
        if tr.state.quiet || tr.state.mute.is_some() {
            return;
        }
        let depth = tr.state.open.depth + 1;
        if tr.best.as_ref().is_some_and(|b| b.depth >= depth) {
            return;
        }
        let goal = self.resolve(raw);
        let tr = self.tr.as_mut().unwrap();
        tr.best = Some(Witness { depth, leaf: TNode::Failure { goal, reason, kids: None }, path: tr.state.open.clone() });
    }

    // ---- main loop ----

    fn tick(&mut self, depth: usize) -> Res<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(EngineError::ResourceExhausted(LimitKind::Steps));
        }
        if depth > self.limits.max_depth {
            return Err(EngineError::ResourceExhausted(LimitKind::Depth));
        }
        if self.steps % 256 == 0 && Instant::now() > self.deadline {
            return Err(EngineError::ResourceExhausted(LimitKind::Timeout));
        }
        Ok(())
    }

    /// Runs until the continuation is empty (a solution) or no
    /// choicepoint remains.
    pub(crate) fn run(&mut self) -> Res<bool> {
        loop {
            let Some(frame) = self.cont.take() else { return Ok(true) };
            self.cont = frame.next.clone();
            let flow = match &frame.item {
                Item::Call { goal, depth, cutb } => {
                    self.tick(*depth)?;
                    self.last_goal = goal.clone();
                    self.call(goal, *depth, *cutb)?
                }
                Item::CutTo(h) => {
                    self.cut(*h);
                    Flow::Go
                }
                Item::SoftCut(h) => {
                    if let Some(cp) = self.cps.get_mut(*h) {
                        cp.alt = Alt::Dead;
                    }
                    Flow::Go
                }
                Item::Exit => {
                    self.exit();
                    Flow::Go
                }
                Item::ExitOpaque(idx) => {
                    self.exit_opaque(*idx);
                    Flow::Go
                }
                Item::SetQuiet(q) => {
                    if let Some(tr) = &mut self.tr {
                        tr.state.quiet = *q;
                    }
                    Flow::Go
                }
                Item::Collect { acc, template } => {
                    let t = self.resolve(template);
                    acc.borrow_mut().push(t);
                    Flow::Fail
                }
            };
            drop(frame);
            if let Flow::Fail = flow {
                if !self.backtrack()? {
                    return Ok(false);
                }
            }
        }
    }

    /// Resumes the most recent live alternative. Returns false when none is left.
    pub(crate) fn backtrack(&mut self) -> Res<bool> {
        while let Some(cp) = self.cps.pop() {
            self.heap.undo(cp.trail_len, cp.store_len);
            if let (Some(tr), Some(ts)) = (&mut self.tr, cp.trace) {
                tr.state = ts;
            }
            match cp.alt {
                Alt::Dead => {}
                Alt::Resume { cont } => {
                    self.cont = cont;
                    return Ok(true);
                }
                Alt::Clauses { src, goal, raw, ids, next, depth, cont } => {
                    let h = self.cps.len();
                    if let Flow::Go = self.try_clauses(src, goal, raw, ids, next, depth, h, cont, true)? {
                        return Ok(true);
                    }
                }
                Alt::Between { var, next, hi, raw, cont } => {
                    if hi.is_none_or(|h| next < h) {
                        let n = next.checked_add(1).ok_or_else(|| EngineError::evaluation("int_overflow"))?;
                        self.push_cp(Alt::Between { var: var.clone(), next: n, hi, raw: raw.clone(), cont: cont.clone() });
                    }
                    self.unify(&var, &Term::int(next));
                    self.builtin_leaf(&raw);
                    self.cont = cont;
                    return Ok(true);
                }
                Alt::FindallEnd { acc, result, tail, cont } => {
                    let items: Vec<Term> = std::mem::take(&mut *acc.borrow_mut());
                    let mut copied = Vec::with_capacity(items.len());
                    for it in &items {
                        copied.push(self.copy_fresh(it));
                    }
                    let list = Term::list_with_tail(copied, tail);
                    if self.unify(&list, &result) {
                        self.cont = cont;
                        return Ok(true);
                    }
                }
                Alt::Sentinel { goal } => self.record_failure(&goal, FailureReason::BuiltinFailed),
            }
        }
        Ok(false)
    }

    #[allow(clippy::too_many_arguments)]
    fn try_clauses(
        &mut self,
        src: Src,
        goal: Term,
        raw: Term,
        ids: Arc<[usize]>,
        start: usize,
        depth: usize,
        h: usize,
        cont: Cont,
        mut unified: bool,
    ) -> Res<Flow> {
        let prog: &Program = match src {
            Src::User => self.prog,
            Src::Lib => library::program(),
        };
        let key = match &goal {
            Term::Compound(c) => ArgKey::of(&self.deref(&c.args()[0])),
            _ => None,
        };
        let candidate = |from: usize| {
            (from..ids.len()).find(|&k| {
                let cl = &prog.clauses()[ids[k]];
                match (key, cl.first_arg) {
                    (Some(a), Some(b)) => a == b,
                    _ => true,
                }
            })
        };
        let traced = src == Src::User && self.tracing();
        let call_goal = if traced { Some(self.resolve(&raw)) } else { None };
        let mut cur = candidate(start);
        while let Some(k) = cur {
            let next = candidate(k + 1);
            let id = ids[k];
            let clause = &prog.clauses()[id];
            let (tl, sl) = self.mark();
            let off = self.heap.alloc(clause.nvars());
            let head = rename(&clause.head, off);
            if unify_in(&mut self.heap, &head, &goal) {
                if let Some(n) = next {
                    let alt = Alt::Clauses {
                        src,
                        goal: goal.clone(),
                        raw: raw.clone(),
                        ids: ids.clone(),
                        next: n,
                        depth,
                        cont: cont.clone(),
                    };
                    self.push_cp_at(alt, tl, sl);
                }
                let mut c = cont;
                if let Some(cg) = call_goal {
                    self.open(OpenKind::Clause(ClauseId(id)), &raw, cg);
                    c = push(Item::Exit, c);
                    if clause.is_fact() {
                        self.add_kid(TNode::True);
                    }
                }
                if !clause.is_fact() {
                    for g in clause.body_goals().iter().rev() {
                        c = call_item(rename(g, off), depth + 1, h, c);
                    }
                }
                self.cont = c;
                return Ok(Flow::Go);
            }
            self.heap.undo(tl, sl);
            cur = next;
        }
        if !unified {
            unified = true;
            let _ = unified;
            self.record_failure(&raw, FailureReason::NoClause);
        }
        Ok(Flow::Fail)
    }

    fn call(&mut self, raw: &Term, depth: usize, cutb: usize) -> Res<Flow> {
        let was_var = matches!(raw, Term::Var(_));
        let raw = self.deref(raw);
        if was_var {
            // a variable goal behaves as call/1: cut inside is local
            let h = self.cps.len();
            return self.dispatch(&raw, &raw, depth, h);
        }
        self.dispatch(&raw, &raw, depth, cutb)
    }

    /// `goal` is the term being resolved, `raw` the term as written (with
    /// any module qualifier) used for trace nodes.
    fn dispatch(&mut self, goal: &Term, raw: &Term, depth: usize, cutb: usize) -> Res<Flow> {
        let goal = self.deref(goal);
        let (name, arity) = match &goal {
            Term::Var(_) => return Err(EngineError::instantiation().in_goal(raw)),
            Term::Int(_) => return Err(EngineError::CallableExpected(goal.to_string())),
            Term::Atom(a) => (*a, 0),
            Term::Compound(c) => (c.functor(), c.arity()),
        };
        let args: Vec<Term> = goal.args().to_vec();
        let cont = self.cont.take();
        if let Some(flow) = self.control(name, arity, &goal, &args, raw, depth, cutb, cont.clone())? {
            return Ok(flow);
        }
        self.cont = cont;
        self.resolve_goal(&goal, raw, name, arity, &args, depth, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve_goal(
        &mut self,
        goal: &Term,
        raw: &Term,
        name: Atom,
        arity: usize,
        args: &[Term],
        depth: usize,
        bk_first: bool,
    ) -> Res<Flow> {
        if bk_first {
            if let Some(n) = builtins::lookup(name, arity, Tier::Bk) {
                return self.run_native(n, raw, args, depth);
            }
        }
        if let Some(n) = builtins::lookup(name, arity, Tier::System) {
            return self.run_native(n, raw, args, depth);
        }
        let cont = self.cont.take();
        if let Some(ids) = self.prog.lookup(name, arity) {
            let ids = ids.clone();
            let h = self.cps.len();
            return self.try_clauses(Src::User, goal.clone(), raw.clone(), ids, 0, depth, h, cont, false);
        }
        self.cont = cont;
        if let Some(n) = builtins::lookup(name, arity, Tier::Library) {
            return self.run_native(n, raw, args, depth);
        }
        if let Some(ids) = library::program().lookup(name, arity) {
            let ids = ids.clone();
            let cont = self.cont.take();
            let cont = self.opaque_cont(raw, cont);
            let h = self.cps.len();
            return self.try_clauses(Src::Lib, goal.clone(), raw.clone(), ids, 0, depth, h, cont, false);
        }
        if let Some(n) = builtins::lookup(name, arity, Tier::Bk) {
            return self.run_native(n, raw, args, depth);
        }
        self.record_failure(raw, FailureReason::NoClause);
        Ok(Flow::Fail)
    }

    fn run_native(&mut self, n: &Native, raw: &Term, args: &[Term], depth: usize) -> Res<Flow> {
        let (tl, _) = self.mark();
        let out = (n.f)(self, args).map_err(|e| e.in_goal(&self.resolve(raw)))?;
        match out {
            Outcome::True => {
                self.builtin_leaf(raw);
                Ok(Flow::Go)
            }
            Outcome::Fail => {
                let sl = self.heap.vals.len();
                self.heap.undo(tl, sl);
                self.record_failure(raw, FailureReason::BuiltinFailed);
                Ok(Flow::Fail)
            }
            Outcome::Run(g) => {
                let cont = self.cont.take();
                let c = match n.mode {
                    Mode::Control if self.tracing() => {
                        let cg = self.resolve(raw);
                        self.open(OpenKind::Control, raw, cg);
                        push(Item::Exit, cont)
                    }
                    Mode::Control => cont,
                    Mode::Leaf => self.opaque_cont(raw, cont),
                };
                let h = self.cps.len();
                let mut c = c;
                for goal in g.into_iter().rev() {
                    c = call_item(goal, depth, h, c);
                }
                self.cont = c;
                Ok(Flow::Go)
            }
        }
    }

    /// Control constructs. Returns `None` when `name/arity` is not one.
    #[allow(clippy::too_many_arguments)]
    fn control(
        &mut self,
        name: Atom,
        arity: usize,
        goal: &Term,
        args: &[Term],
        raw: &Term,
        depth: usize,
        cutb: usize,
        cont: Cont,
    ) -> Res<Option<Flow>> {
        let go = |m: &mut Self, c: Cont| {
            m.cont = c;
            Ok(Some(Flow::Go))
        };
        match (name.name(), arity) {
            ("true", 0) => {
                if self.tracing() {
                    self.add_kid(TNode::True);
                }
                go(self, cont)
            }
            ("fail", 0) | ("false", 0) => {
                self.record_failure(raw, FailureReason::BuiltinFailed);
                Ok(Some(Flow::Fail))
            }
            (",", 2) => {
                let c = call_item(args[1].clone(), depth, cutb, cont);
                go(self, call_item(args[0].clone(), depth, cutb, c))
            }
            ("!", 0) => {
                self.cut(cutb);
                self.builtin_leaf(raw);
                go(self, cont)
            }
            (":", 2) => {
                let m = self.deref(&args[0]);
                let g = self.deref(&args[1]);
                let Some((gn, ga)) = g.key() else {
                    return match g {
                        Term::Var(_) => Err(EngineError::instantiation().in_goal(raw)),
                        _ => Err(EngineError::CallableExpected(g.to_string())),
                    };
                };
                let bk = m == Term::Atom(atoms::BK);
                if bk && builtins::lookup(gn, ga, Tier::Bk).is_some() {
                    self.cont = cont;
                    let gargs = g.args().to_vec();
                    return self.resolve_goal(&g, raw, gn, ga, &gargs, depth, true).map(Some);
                }
                let gargs = g.args().to_vec();
                if let Some(flow) = self.control(gn, ga, &g, &gargs, raw, depth, cutb, cont.clone())? {
                    return Ok(Some(flow));
                }
                self.cont = cont;
                self.resolve_goal(&g, raw, gn, ga, &gargs, depth, false).map(Some)
            }
            (";", 2) => {
                let lhs = self.deref(&args[0]);
                if lhs.is_functor(atoms::ARROW, 2) {
                    let (c, t) = (lhs.args()[0].clone(), lhs.args()[1].clone());
                    return self.if_then_else(raw, c, t, Some(args[1].clone()), false, depth, cutb, cont).map(Some);
                }
                if lhs.is_functor(atoms::SOFT_ARROW, 2) {
                    let (c, t) = (lhs.args()[0].clone(), lhs.args()[1].clone());
                    return self.if_then_else(raw, c, t, Some(args[1].clone()), true, depth, cutb, cont).map(Some);
                }
                let mut cont = cont;
                if self.tracing() {
                    let cg = self.resolve(raw);
                    self.open(OpenKind::Control, raw, cg);
                    cont = push(Item::Exit, cont);
                }
                let alt = call_item(args[1].clone(), depth, cutb, cont.clone());
                self.push_cp(Alt::Resume { cont: alt });
                go(self, call_item(lhs, depth, cutb, cont))
            }
            ("->", 2) => {
                self.if_then_else(raw, args[0].clone(), args[1].clone(), None, false, depth, cutb, cont).map(Some)
            }
            ("*->", 2) => {
                let c = call_item(args[1].clone(), depth, cutb, cont);
                go(self, call_item(args[0].clone(), depth, cutb, c))
            }
            ("\\+", 1) | ("not", 1) => self.negation(raw, args[0].clone(), depth, cont).map(Some),
            ("call", n) if n >= 1 => {
                let g = if n == 1 { args[0].clone() } else { self.add_args(&args[0], &args[1..])? };
                let mut cont = cont;
                if self.tracing() {
                    let cg = self.resolve(raw);
                    self.open(OpenKind::Control, raw, cg);
                    cont = push(Item::Exit, cont);
                }
                let h = self.cps.len();
                go(self, call_item(g, depth, h, cont))
            }
            ("once", 1) => {
                let mut cont = cont;
                if self.tracing() {
                    let cg = self.resolve(raw);
                    self.open(OpenKind::Control, raw, cg);
                    cont = push(Item::Exit, cont);
                }
                let h = self.cps.len();
                let c = push(Item::CutTo(h), cont);
                go(self, call_item(args[0].clone(), depth, h, c))
            }
            ("ignore", 1) => {
                let mut cont = cont;
                if self.tracing() {
                    let cg = self.resolve(raw);
                    self.open(OpenKind::Control, raw, cg);
                    cont = push(Item::Exit, cont);
                }
                let h = self.cps.len();
                self.push_cp(Alt::Resume { cont: cont.clone() });
                let prev = self.set_quiet(true);
                let c = push(Item::SetQuiet(prev), cont);
                let c = push(Item::CutTo(h), c);
                go(self, call_item(args[0].clone(), depth, h + 1, c))
            }
            ("findall", 3) | ("findall", 4) => {
                let tail = if arity == 4 { args[3].clone() } else { Term::nil() };
                self.findall(raw, args[0].clone(), args[1].clone(), args[2].clone(), tail, depth, cont).map(Some)
            }
            ("forall", 2) => {
                let inner = Term::compound(atoms::NOT_PROVABLE, vec![args[1].clone()]);
                let g = Term::compound(atoms::COMMA, vec![args[0].clone(), inner]);
                self.negation(raw, g, depth, cont).map(Some)
            }
            ("between", 3) => self.between(raw, args, cont).map(Some),
            ("aggregate_all", 3) => {
                let spec = self.deref(&args[0]);
                let (template, kind) = match (spec.key().map(|(a, n)| (a.name(), n)), spec.args()) {
                    (Some(("count", 0)), _) => (Term::Atom(atoms::TRUE), "count"),
                    (Some(("count", 1)), a) => (a[0].clone(), "count"),
                    (Some(("sum", 1)), a) => (a[0].clone(), "sum"),
                    (Some(("max", 1)), a) => (a[0].clone(), "max"),
                    (Some(("min", 1)), a) => (a[0].clone(), "min"),
                    (Some(("bag", 1)), a) => (a[0].clone(), "bag"),
                    (Some(("set", 1)), a) => (a[0].clone(), "set"),
                    _ => return Err(EngineError::type_error("aggregate_spec", &spec).in_goal(raw)),
                };
                let l = self.fresh();
                let collect = Term::app("findall", vec![template, args[1].clone(), l.clone()]);
                let post = Term::app("$aggregate", vec![Term::atom(kind), l, args[2].clone()]);
                let g = Term::compound(atoms::COMMA, vec![collect, post]);
                let c = self.opaque_cont(raw, cont);
                let h = self.cps.len();
                go(self, call_item(g, depth, h, c))
            }
            ("bagof", 3) | ("setof", 3) => {
                let mut inner = self.deref(&args[1]);
                while inner.is_functor(Atom::new("^"), 2) {
                    inner = self.deref(&inner.args()[1]);
                }
                let l = self.fresh();
                let collect = Term::app("findall", vec![args[0].clone(), inner, l.clone()]);
                let kind = if name.name() == "setof" { "set" } else { "bag" };
                let post = Term::app("$aggregate", vec![Term::atom(kind), l.clone(), args[2].clone()]);
                let nonempty = Term::app("\\==", vec![l, Term::nil()]);
                let g = Term::compound(atoms::COMMA, vec![collect, Term::compound(atoms::COMMA, vec![nonempty, post])]);
                let c = self.opaque_cont(raw, cont);
                let h = self.cps.len();
                go(self, call_item(g, depth, h, c))
            }
            ("^", 2) => {
                let h = self.cps.len();
                go(self, call_item(args[1].clone(), depth, h, cont))
            }
            _ => {
                let _ = goal;
                Ok(None)
            }
        }
    }

    fn set_quiet(&mut self, q: bool) -> bool {
        match &mut self.tr {
            Some(tr) => std::mem::replace(&mut tr.state.quiet, q),
            None => false,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn if_then_else(
        &mut self,
        raw: &Term,
        cond: Term,
        then: Term,
        els: Option<Term>,
        soft: bool,
        depth: usize,
        cutb: usize,
        cont: Cont,
    ) -> Res<Flow> {
        let mut cont = cont;
        if self.tracing() {
            let cg = self.resolve(raw);
            self.open(OpenKind::Control, raw, cg);
            cont = push(Item::Exit, cont);
        }
        let h = self.cps.len();
        let after = call_item(then, depth, cutb, cont.clone());
        match els {
            None => {
                let c = if soft { after } else { push(Item::CutTo(h), after) };
                self.cont = call_item(cond, depth, h, c);
            }
            Some(e) => {
                self.push_cp(Alt::Resume { cont: call_item(e, depth, cutb, cont) });
                let prev = self.set_quiet(true);
                let c = push(Item::SetQuiet(prev), after);
                let c = push(if soft { Item::SoftCut(h) } else { Item::CutTo(h) }, c);
                self.cont = call_item(cond, depth, h + 1, c);
            }
        }
        Ok(Flow::Go)
    }

    fn negation(&mut self, raw: &Term, g: Term, depth: usize, cont: Cont) -> Res<Flow> {
        let c = self.opaque_cont(raw, cont);
        let h = self.cps.len();
        self.push_cp(Alt::Resume { cont: c });
        let fail = call_item(Term::Atom(atoms::FAIL), depth, h, None);
        self.cont = call_item(g, depth, h + 1, push(Item::CutTo(h), fail));
        Ok(Flow::Go)
    }

    #[allow(clippy::too_many_arguments)]
    fn findall(&mut self, raw: &Term, template: Term, g: Term, result: Term, tail: Term, depth: usize, cont: Cont) -> Res<Flow> {
        let c = self.opaque_cont(raw, cont);
        let acc = Rc::new(RefCell::new(Vec::new()));
        let h = self.cps.len();
        self.push_cp(Alt::FindallEnd { acc: acc.clone(), result, tail, cont: c });
        self.cont = call_item(g, depth, h + 1, push(Item::Collect { acc, template }, None));
        Ok(Flow::Go)
    }

    fn between(&mut self, raw: &Term, args: &[Term], cont: Cont) -> Res<Flow> {
        let int = |m: &Self, t: &Term| -> Res<Option<i64>> {
            match m.deref(t) {
                Term::Int(i) => Ok(Some(i)),
                Term::Atom(a) if matches!(a.name(), "inf" | "infinite") => Ok(None),
                Term::Var(_) => Err(EngineError::instantiation()),
                other => Err(EngineError::type_error("integer", &other)),
            }
        };
        let err = |e: EngineError, m: &Self| e.in_goal(&m.resolve(raw));
        let lo = int(self, &args[0]).map_err(|e| err(e, self))?;
        let Some(lo) = lo else {
            return Err(err(EngineError::type_error("integer", &self.deref(&args[0])), self));
        };
        let hi = int(self, &args[1]).map_err(|e| err(e, self))?;
        match self.deref(&args[2]) {
            Term::Int(x) => {
                if x >= lo && hi.is_none_or(|h| x <= h) {
                    self.builtin_leaf(raw);
                    self.cont = cont;
                    Ok(Flow::Go)
                } else {
                    self.record_failure(raw, FailureReason::BuiltinFailed);
                    Ok(Flow::Fail)
                }
            }
            v @ Term::Var(_) => {
                if hi.is_some_and(|h| lo > h) {
                    self.record_failure(raw, FailureReason::BuiltinFailed);
                    return Ok(Flow::Fail);
                }
                if hi.is_none_or(|h| lo < h) {
                    self.push_cp(Alt::Between { var: v.clone(), next: lo + 1, hi, raw: raw.clone(), cont: cont.clone() });
                }
                self.unify(&v, &Term::int(lo));
                self.builtin_leaf(raw);
                self.cont = cont;
                Ok(Flow::Go)
            }
            other => Err(err(EngineError::type_error("integer", &other), self)),
        }
    }

    /// `call/N` goal construction: appends `extra` to the goal's arguments.
    pub(crate) fn add_args(&self, g: &Term, extra: &[Term]) -> Res<Term> {
        match self.deref(g) {
            Term::Atom(a) => Ok(Term::compound(a, extra.to_vec())),
            Term::Compound(c) if c.functor() == atoms::COLON && c.arity() == 2 => {
                let inner = self.add_args(&c.args()[1], extra)?;
                Ok(Term::compound(atoms::COLON, vec![c.args()[0].clone(), inner]))
            }
            Term::Compound(c) => {
                let mut args = c.args().to_vec();
                args.extend_from_slice(extra);
                Ok(Term::compound(c.functor(), args))
            }
            Term::Var(_) => Err(EngineError::instantiation()),
            other => Err(EngineError::CallableExpected(other.to_string())),
        }
    }

    // ---- results ----

    fn partial_tree(&self, err: &EngineError) -> Option<ComputationTree> {
        let tr = self.tr.as_ref()?;
        let reason = match err {
            EngineError::ResourceExhausted(_) => FailureReason::Limit,
            _ => FailureReason::Error,
        };
        let goal = match &tr.state.mute {
            Some(g) => self.resolve(g),
            None => self.resolve(&self.last_goal),
        };
        Some(wrap_path(TNode::Failure { goal, reason, kids: None }, &tr.state.open, reason))
    }

    fn success_tree(&self) -> Option<ComputationTree> {
        let tr = self.tr.as_ref()?;
        let mut o = tr.state.open.clone();
        while let Some(p) = o.parent.clone() {
            o = p;
        }
        let mut kids = Vec::new();
        let mut cur = o.kids.as_ref();
        while let Some(cell) = cur {
            kids.push(to_tree(&cell.node));
            cur = cell.next.as_ref();
        }
        kids.reverse();
        Some(if kids.len() == 1 {
            kids.pop().unwrap()
        } else {
            ComputationTree::Control { goal: self.resolve(&o.raw), children: kids }
        })
    }

    fn witness(&self) -> ComputationTree {
        let tr = self.tr.as_ref().expect("tracing");
        match &tr.best {
            Some(w) => wrap_path(clone_leaf(&w.leaf), &w.path, FailureReason::AllClausesFailed),
            None => {
                let mut o = tr.state.open.clone();
                while let Some(p) = o.parent.clone() {
                    o = p;
                }
                ComputationTree::Failure {
                    goal: o.call_goal.clone(),
                    reason: FailureReason::AllClausesFailed,
                    children: Vec::new(),
                }
            }
        }
    }
}

fn clone_leaf(n: &TNode) -> TNode {
    match n {
        TNode::Failure { goal, reason, .. } => TNode::Failure { goal: goal.clone(), reason: *reason, kids: None },
        _ => TNode::True,
    }
}

/// Wraps a failure leaf in the open ancestors on `path`, innermost first.
fn wrap_path(leaf: TNode, path: &Rc<Open>, reason: FailureReason) -> ComputationTree {
    let mut node = leaf;
    let mut cur = path.clone();
    loop {
        match cur.kind {
            OpenKind::Root => {
                if cur.kids.is_none() {
                    return to_tree(&node);
                }
                let kids = push_kid(node, &cur.kids);
                return to_tree(&TNode::Failure { goal: cur.call_goal.clone(), reason, kids });
            }
            _ => {
                let kids = push_kid(node, &cur.kids);
                node = TNode::Failure { goal: cur.call_goal.clone(), reason, kids };
                match cur.parent.clone() {
                    Some(p) => cur = p,
                    None => return to_tree(&node),
                }
            }
        }
    }
}

// ---- public entry points ----

struct QueryVars {
    /// (original variable, heap variable)
    vars: Vec<(VarId, VarId)>,
    next_free: u32,
}

fn load_query(m: &mut Machine<'_>, goal: &Term) -> (Term, QueryVars) {
    let vars = goal.variables();
    let base = m.heap.alloc(vars.len());
    let map: BTreeMap<VarId, VarId> = vars.iter().enumerate().map(|(i, v)| (*v, VarId(base + i as u32))).collect();
    let g = goal.map_vars(&mut |v| Term::Var(map[&v]));
    let next_free = vars.iter().map(|v| v.0 + 1).max().unwrap_or(0);
    (g, QueryVars { vars: map.into_iter().collect(), next_free })
}

fn extract(m: &Machine<'_>, q: &QueryVars) -> Bindings {
    let back: HashMap<VarId, VarId> = q.vars.iter().map(|(o, h)| (*h, *o)).collect();
    let mut out = BTreeMap::new();
    for (orig, hv) in &q.vars {
        let t = m.resolve(&Term::Var(*hv));
        if t == Term::Var(*hv) {
            continue;
        }
        let t = t.map_vars(&mut |v| match back.get(&v) {
            Some(o) => Term::Var(*o),
            None => Term::Var(VarId(q.next_free + v.0)),
        });
        out.insert(*orig, t);
    }
    Bindings::from_map(out)
}

/// Lazily enumerated solutions of a goal.
pub struct Solutions<'p> {
    m: Machine<'p>,
    q: QueryVars,
    started: bool,
    done: bool,
}

impl Solutions<'_> {
    /// Resolution steps used so far.
    pub fn steps(&self) -> u64 {
        self.m.steps()
    }
}

impl Iterator for Solutions<'_> {
    type Item = Result<Bindings, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let found = if self.started {
            match self.m.backtrack() {
                Ok(true) => self.m.run(),
                Ok(false) => Ok(false),
                Err(e) => Err(e),
            }
        } else {
            self.started = true;
            self.m.run()
        };
        match found {
            Ok(true) => Some(Ok(extract(&self.m, &self.q))),
            Ok(false) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Enumerates the solutions of `goal` in depth-first, clause-order.
/// Bindings are keyed by the goal's own variables; variables left unbound
/// are omitted.
pub fn solve<'p>(program: &'p Program, goal: &Term, limits: &ResourceLimits) -> Solutions<'p> {
    let mut m = Machine::new(program, *limits, false);
    let (g, q) = load_query(&mut m, goal);
    m.start(g);
    Solutions { m, q, started: false, done: false }
}

/// First solution of `goal`, if any.
pub fn solve_first(program: &Program, goal: &Term, limits: &ResourceLimits) -> Result<Option<Bindings>, EngineError> {
    solve(program, goal, limits).next().transpose()
}

/// Solves `goal` once and records its derivation. A failed goal yields the
/// leftmost-deepest failure path instead.
pub fn solve_traced(program: &Program, goal: &Term, limits: &ResourceLimits) -> Result<TraceOutcome, TraceError> {
    let mut m = Machine::new(program, *limits, true);
    let (g, q) = load_query(&mut m, goal);
    m.start(g);
    match m.run() {
        Ok(true) => {
            let tree = m.success_tree().expect("tracing");
            Ok(TraceOutcome::Proved { bindings: extract(&m, &q), tree })
        }
        Ok(false) => Ok(TraceOutcome::Failed { witness: m.witness() }),
        Err(error) => {
            let partial = m.partial_tree(&error);
            Err(TraceError { error, partial })
        }
    }
}
