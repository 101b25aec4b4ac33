//! A naive SLD enumerator written independently of the engine:
//! substitution maps, goal lists, and cut as a signal unwinding to the
//! predicate activation that owns it.
#![allow(dead_code)]

use std::collections::HashMap;
use std::time::Instant;

use abpr_engine::{parse_program, parse_query, solve, ResourceLimits, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum T {
    V(usize),
    C(&'static str),
}

#[derive(Clone, Debug)]
pub enum Lit {
    Call(&'static str, Vec<T>),
    Not(&'static str, Vec<T>),
    Eq(T, T),
    Cut,
}

#[derive(Clone, Debug)]
pub struct Rule {
    head: (&'static str, Vec<T>),
    body: Vec<Lit>,
    nvars: usize,
}

pub const PREDS: &[(&str, usize)] = &[("p", 1), ("q", 1), ("r", 2), ("s", 1)];
pub const CONSTS: &[&str] = &["a", "b", "c"];

pub fn show_t(t: &T) -> String {
    match t {
        T::V(i) => format!("V{i}"),
        T::C(c) => c.to_string(),
    }
}

pub fn show_call(name: &str, args: &[T]) -> String {
    format!("{name}({})", args.iter().map(show_t).collect::<Vec<_>>().join(","))
}

pub fn show_lit(l: &Lit) -> String {
    match l {
        Lit::Call(n, a) => show_call(n, a),
        Lit::Not(n, a) => format!("\\+ {}", show_call(n, a)),
        Lit::Eq(a, b) => format!("{} = {}", show_t(a), show_t(b)),
        Lit::Cut => "!".into(),
    }
}

pub fn source(rules: &[Rule]) -> String {
    rules
        .iter()
        .map(|r| {
            let head = show_call(r.head.0, &r.head.1);
            if r.body.is_empty() {
                format!("{head}.\n")
            } else {
                format!("{head} :- {}.\n", r.body.iter().map(show_lit).collect::<Vec<_>>().join(", "))
            }
        })
        .collect()
}

pub fn arg(rng: &mut ChaCha8Rng, nvars: usize) -> T {
    if rng.random_bool(0.5) {
        T::V(rng.random_range(0..nvars))
    } else {
        T::C(CONSTS[rng.random_range(0..CONSTS.len())])
    }
}

/// Rules mostly call predicates declared later in PREDS, so most programs
/// terminate; the occasional backward call exercises the limits.
pub fn random_program(rng: &mut ChaCha8Rng) -> Vec<Rule> {
    let n = rng.random_range(2..=6);
    let mut rules = Vec::new();
    for _ in 0..n {
        let pi = rng.random_range(0..PREDS.len());
        let (name, arity) = PREDS[pi];
        let nvars = 3;
        let head = (name, (0..arity).map(|_| arg(rng, nvars)).collect());
        let mut body = Vec::new();
        if rng.random_bool(0.45) {
            for _ in 0..rng.random_range(1..=3) {
                let roll = rng.random_range(0..10);
                let callee = if rng.random_bool(0.9) && pi + 1 < PREDS.len() {
                    rng.random_range(pi + 1..PREDS.len())
                } else {
                    rng.random_range(0..PREDS.len())
                };
                let (cn, ca) = PREDS[callee];
                let args: Vec<T> = (0..ca).map(|_| arg(rng, nvars)).collect();
                body.push(match roll {
                    0..=5 => Lit::Call(cn, args),
                    6 => Lit::Not(cn, args),
                    7 => Lit::Eq(arg(rng, nvars), arg(rng, nvars)),
                    _ => Lit::Cut,
                });
            }
        }
        rules.push(Rule { head, body, nvars });
    }
    rules
}

// ---- the reference enumerator ----

type Subst = HashMap<usize, T>;

pub fn walk(t: &T, s: &Subst) -> T {
    let mut t = t.clone();
    while let T::V(i) = t {
        match s.get(&i) {
            Some(x) => t = x.clone(),
            None => break,
        }
    }
    t
}

pub fn unify(a: &T, b: &T, s: &mut Subst) -> bool {
    let (a, b) = (walk(a, s), walk(b, s));
    match (&a, &b) {
        _ if a == b => true,
        (T::V(i), _) => {
            s.insert(*i, b);
            true
        }
        (_, T::V(j)) => {
            s.insert(*j, a);
            true
        }
        _ => false,
    }
}

pub enum Sig {
    Normal,
    Cut(usize),
}

pub struct Overflow;

pub struct Reference<'a> {
    rules: &'a [Rule],
    next_var: usize,
    next_level: usize,
    budget: usize,
}

impl Reference<'_> {
    fn shift(t: &T, base: usize) -> T {
        match t {
            T::V(i) => T::V(i + base),
            c => c.clone(),
        }
    }

    fn solve(&mut self, goals: &[(Lit, usize)], s: &Subst, depth: usize, out: &mut Vec<Subst>) -> Result<Sig, Overflow> {
        if self.budget == 0 || depth > 40 || out.len() > 50 {
            return Err(Overflow);
        }
        self.budget -= 1;
        let Some(((goal, level), rest)) = goals.split_first() else {
            out.push(s.clone());
            return Ok(Sig::Normal);
        };
        match goal {
            Lit::Cut => Ok(match self.solve(rest, s, depth, out)? {
                Sig::Normal => Sig::Cut(*level),
                Sig::Cut(l) => Sig::Cut(l.min(*level)),
            }),
            Lit::Eq(a, b) => {
                let mut s2 = s.clone();
                if unify(a, b, &mut s2) {
                    self.solve(rest, &s2, depth, out)
                } else {
                    Ok(Sig::Normal)
                }
            }
            Lit::Not(name, args) => {
                let mut inner = Vec::new();
                let lvl = self.fresh_level();
                self.solve(&[(Lit::Call(name, args.clone()), lvl)], s, depth + 1, &mut inner)?;
                if inner.is_empty() {
                    self.solve(rest, s, depth, out)
                } else {
                    Ok(Sig::Normal)
                }
            }
            Lit::Call(name, args) => {
                let me = self.fresh_level();
                for rule in self.rules.iter().filter(|r| r.head.0 == *name && r.head.1.len() == args.len()) {
                    let base = self.next_var;
                    self.next_var += rule.nvars;
                    let mut s2 = s.clone();
                    let ok = rule.head.1.iter().zip(args).all(|(h, a)| unify(&Self::shift(h, base), a, &mut s2));
                    if !ok {
                        continue;
                    }
                    let mut goals2: Vec<(Lit, usize)> = rule
                        .body
                        .iter()
                        .map(|l| {
                            let l = match l {
                                Lit::Call(n, a) => Lit::Call(n, a.iter().map(|t| Self::shift(t, base)).collect()),
                                Lit::Not(n, a) => Lit::Not(n, a.iter().map(|t| Self::shift(t, base)).collect()),
                                Lit::Eq(a, b) => Lit::Eq(Self::shift(a, base), Self::shift(b, base)),
                                Lit::Cut => Lit::Cut,
                            };
                            (l, me)
                        })
                        .collect();
                    goals2.extend(rest.iter().cloned());
                    match self.solve(&goals2, &s2, depth + 1, out)? {
                        Sig::Normal => {}
                        Sig::Cut(l) if l == me => return Ok(Sig::Normal),
                        Sig::Cut(l) => return Ok(Sig::Cut(l)),
                    }
                }
                Ok(Sig::Normal)
            }
        }
    }

    fn fresh_level(&mut self) -> usize {
        self.next_level += 1;
        self.next_level
    }
}

/// Answers as rendered values of the query variables, `_` when unbound.
pub fn reference_answers(rules: &[Rule], query: &[Lit], qvars: usize) -> Option<Vec<Vec<String>>> {
    let mut r = Reference { rules, next_var: qvars, next_level: 0, budget: 20_000 };
    let goals: Vec<(Lit, usize)> = query.iter().map(|l| (l.clone(), 0)).collect();
    let mut out = Vec::new();
    r.solve(&goals, &Subst::new(), 0, &mut out).ok()?;
    Some(
        out.iter()
            .map(|s| {
                (0..qvars)
                    .map(|i| match walk(&T::V(i), s) {
                        T::C(c) => c.to_string(),
                        T::V(_) => "_".to_string(),
                    })
                    .collect()
            })
            .collect(),
    )
}

pub fn engine_answers(src: &str, query: &str, qvars: usize) -> Vec<Vec<String>> {
    let p = parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let q = parse_query(query).unwrap();
    let lim = ResourceLimits { max_steps: 1_000_000, ..ResourceLimits::default() };
    solve(&p, &q.goal, &lim)
        .take(60)
        .map(|b| {
            let b = b.unwrap_or_else(|e| panic!("{e}\n{src}?- {query}"));
            (0..qvars)
                .map(|i| {
                    let v = Term::Var(q.var(&format!("V{i}")).unwrap());
                    match b.apply(&v) {
                        Term::Var(_) => "_".to_string(),
                        t => t.to_string(),
                    }
                })
                .collect()
        })
        .collect()
}

pub fn random_query(rng: &mut ChaCha8Rng, rules: &[Rule]) -> (Vec<Lit>, usize) {
    let qvars = 2;
    let mut lits = Vec::new();
    for _ in 0..rng.random_range(1..=2) {
        let head = &rules[rng.random_range(0..rules.len())].head;
        let (n, a) = (head.0, head.1.len());
        let args = (0..a).map(|_| if rng.random_bool(0.7) { T::V(rng.random_range(0..qvars)) } else { arg(rng, qvars) }).collect();
        lits.push(if rng.random_bool(0.1) { Lit::Not(n, args) } else { Lit::Call(n, args) });
    }
    if rng.random_bool(0.2) {
        lits.push(Lit::Cut);
    }
    // mention every query variable so the engine's query has them all
    lits.push(Lit::Eq(T::V(0), T::V(0)));
    lits.push(Lit::Eq(T::V(1), T::V(1)));
    (lits, qvars)
}

/// Compares the engine with the enumerator on 100 random programs.
/// Returns a one-line summary.
pub fn check_random_programs() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    let mut with_cut = 0;
    let mut with_neg = 0;
    let mut attempts = 0;
    let mut nonempty = 0;
    while compared < 100 {
        attempts += 1;
        if attempts >= 2000 {
            return Err("too few terminating programs".into());
        }
        let rules = random_program(&mut rng);
        let (query, qvars) = random_query(&mut rng, &rules);
        let Some(expected) = reference_answers(&rules, &query, qvars) else { continue };
        let src = source(&rules);
        let qsrc = query.iter().map(show_lit).collect::<Vec<_>>().join(", ");
        let got = engine_answers(&src, &qsrc, qvars);
        if got != expected {
            return Err(format!("{src}?- {qsrc}: {got:?} vs {expected:?}"));
        }
        compared += 1;
        if !expected.is_empty() {
            nonempty += 1;
        }
        if src.contains('!') || qsrc.contains('!') {
            with_cut += 1;
        }
        if src.contains("\\+") || qsrc.contains("\\+") {
            with_neg += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if nonempty < 40 {
        return Err(format!("only {nonempty} programs had answers"));
    }
    if with_cut < 10 || with_neg < 10 {
        return Err(format!("cut {with_cut}, negation {with_neg}"));
    }
    if secs >= 60.0 {
        return Err(format!("took {secs:.1}s"));
    }
    Ok(format!("{compared} programs ({attempts} generated), {nonempty} with answers, {with_cut} with cut, {with_neg} with negation, {secs:.2}s"))
}
