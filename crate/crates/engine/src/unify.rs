use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::term::{atoms, Term, VarId};

/// Variable-binding storage shared by the public substitution type and the
/// machine's trailed store.
pub(crate) trait Store {
    fn binding(&self, v: VarId) -> Option<&Term>;
    fn bind(&mut self, v: VarId, t: Term);
}

pub(crate) fn deref<S: Store + ?Sized>(s: &S, t: &Term) -> Term {
    let mut cur = t;
    while let Term::Var(v) = cur {
        match s.binding(*v) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur.clone()
}

pub(crate) fn occurs<S: Store + ?Sized>(s: &S, v: VarId, t: &Term) -> bool {
    let mut stack = vec![t.clone()];
    while let Some(t) = stack.pop() {
        match deref(s, &t) {
            Term::Var(w) => {
                if w == v {
                    return true;
                }
            }
            Term::Compound(c) if !c.is_ground() => stack.extend(c.args().iter().cloned()),
            _ => {}
        }
    }
    false
}

/// Unifies with occurs-check. On failure the store may hold partial
/// bindings; callers undo them.
pub(crate) fn unify_in<S: Store + ?Sized>(s: &mut S, a: &Term, b: &Term) -> bool {
    let mut stack = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = stack.pop() {
        let x = deref(s, &x);
        let y = deref(s, &y);
        match (&x, &y) {
            (Term::Var(v), Term::Var(w)) => {
                if v != w {
                    // bind the younger variable to the older one
                    if v > w {
                        s.bind(*v, y.clone());
                    } else {
                        s.bind(*w, x.clone());
                    }
                }
            }
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if occurs(s, *v, t) {
                    return false;
                }
                s.bind(*v, t.clone());
            }
            (Term::Int(i), Term::Int(j)) => {
                if i != j {
                    return false;
                }
            }
            (Term::Atom(p), Term::Atom(q)) => {
                if p != q {
                    return false;
                }
            }
            (Term::Compound(p), Term::Compound(q)) => {
                if std::sync::Arc::ptr_eq(p, q) {
                    continue;
                }
                if p.functor() != q.functor() || p.arity() != q.arity() {
                    return false;
                }
                if p.is_ground() && q.is_ground() {
                    if p != q {
                        return false;
                    }
                    continue;
                }
                for (pa, qa) in p.args().iter().zip(q.args()).rev() {
                    stack.push((pa.clone(), qa.clone()));
                }
            }
            _ => return false,
        }
    }
    true
}

/// Fully applies the store to a term.
pub(crate) fn resolve<S: Store + ?Sized>(s: &S, t: &Term) -> Term {
    match deref(s, t) {
        Term::Compound(c) if !c.is_ground() => {
            if c.functor() == atoms::DOT && c.arity() == 2 {
                let mut items = Vec::new();
                let mut cur = Term::Compound(c);
                loop {
                    match &cur {
                        Term::Compound(cc) if cc.functor() == atoms::DOT && cc.arity() == 2 && !cc.is_ground() => {
                            items.push(resolve(s, &cc.args()[0]));
                            let next = deref(s, &cc.args()[1]);
                            cur = next;
                        }
                        _ => break,
                    }
                }
                let tail = resolve(s, &cur);
                return Term::list_with_tail(items, tail);
            }
            Term::compound(c.functor(), c.args().iter().map(|a| resolve(s, a)).collect())
        }
        other => other,
    }
}

/// Structural comparison in the standard order of terms:
/// Var < Int < Atom < Compound; compounds by arity, then name, then
/// arguments left to right.
pub(crate) fn compare_in<S: Store + ?Sized>(s: &S, a: &Term, b: &Term) -> Ordering {
    fn rank(t: &Term) -> u8 {
        match t {
            Term::Var(_) => 0,
            Term::Int(_) => 1,
            Term::Atom(_) => 2,
            Term::Compound(_) => 3,
        }
    }
    let mut a = deref(s, a);
    let mut b = deref(s, b);
    loop {
        let (p, q) = match (&a, &b) {
            (Term::Var(v), Term::Var(w)) => return v.cmp(w),
            (Term::Int(i), Term::Int(j)) => return i.cmp(j),
            (Term::Atom(p), Term::Atom(q)) => {
                return if p == q { Ordering::Equal } else { p.name().cmp(q.name()) };
            }
            (Term::Compound(p), Term::Compound(q)) => (p.clone(), q.clone()),
            _ => return rank(&a).cmp(&rank(&b)),
        };
        if std::sync::Arc::ptr_eq(&p, &q) {
            return Ordering::Equal;
        }
        let head = p.arity().cmp(&q.arity()).then_with(|| {
            if p.functor() == q.functor() {
                Ordering::Equal
            } else {
                p.functor().name().cmp(q.functor().name())
            }
        });
        if head != Ordering::Equal {
            return head;
        }
        let n = p.arity();
        for (x, y) in p.args()[..n - 1].iter().zip(&q.args()[..n - 1]) {
            let o = compare_in(s, x, y);
            if o != Ordering::Equal {
                return o;
            }
        }
        a = deref(s, &p.args()[n - 1]);
        b = deref(s, &q.args()[n - 1]);
    }
}

/// Standard-order comparison of two terms without bindings.
pub fn compare_terms(a: &Term, b: &Term) -> Ordering {
    compare_in(&Bindings::new(), a, b)
}

/// A substitution from variables to terms.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    map: BTreeMap<VarId, Term>,
}

impl Store for Bindings {
    fn binding(&self, v: VarId) -> Option<&Term> {
        self.map.get(&v)
    }

    fn bind(&mut self, v: VarId, t: Term) {
        self.map.insert(v, t);
    }
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn get(&self, v: VarId) -> Option<&Term> {
        self.map.get(&v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &Term)> {
        self.map.iter()
    }

    pub fn insert(&mut self, v: VarId, t: Term) {
        self.map.insert(v, t);
    }

    /// Applies the substitution to `t` until no bound variable remains.
    pub fn apply(&self, t: &Term) -> Term {
        resolve(self, t)
    }

    /// Rewrites every binding to its fully applied form.
    fn normalize(mut self) -> Self {
        let keys: Vec<VarId> = self.map.keys().copied().collect();
        let resolved: Vec<Term> = keys.iter().map(|v| resolve(&self, &Term::Var(*v))).collect();
        for (k, t) in keys.into_iter().zip(resolved) {
            self.map.insert(k, t);
        }
        self
    }

    pub(crate) fn from_map(map: BTreeMap<VarId, Term>) -> Self {
        Bindings { map }
    }
}

impl fmt::Debug for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.map.iter().map(|(k, v)| (k.0, v))).finish()
    }
}

/// Most general unifier of `a` and `b` extending `bindings`, with
/// occurs-check. The result is idempotent.
pub fn unify(a: &Term, b: &Term, bindings: &Bindings) -> Option<Bindings> {
    let mut s = bindings.clone();
    if unify_in(&mut s, a, b) {
        Some(s.normalize())
    } else {
        None
    }
}
