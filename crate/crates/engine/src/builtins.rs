//! Native predicates.
//!
//! Three tiers decide precedence during resolution: `System` natives cannot
//! be redefined by user clauses, `Library` natives are used only when the
//! program does not define the predicate, and `Bk` natives (the grid
//! library) come last unless the call is qualified with `bk:`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::LazyLock;

use crate::bk;
use crate::error::EngineError;
use crate::machine::Machine;
use crate::parse::parse_term;
use crate::term::{atoms, Atom, Term};
use crate::write::WriteOptions;

pub(crate) type Res<T> = Result<T, EngineError>;

pub(crate) enum Outcome {
    Fail,
    True,
    /// Continue with these goals, in order. Cut inside them is local.
    Run(Vec<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Traced as one leaf; any goals it runs are hidden.
    Leaf,
    /// Traced as a control node whose children are the goals it runs.
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Tier {
    System,
    Library,
    Bk,
}

pub(crate) type NativeFn = fn(&mut Machine<'_>, &[Term]) -> Res<Outcome>;

pub(crate) struct Native {
    pub(crate) f: NativeFn,
    pub(crate) mode: Mode,
}

static REGISTRY: LazyLock<HashMap<(Tier, Atom, usize), Native>> = LazyLock::new(|| {
    let mut r = HashMap::new();
    let mut add = |tier: Tier, name: &str, arity: usize, mode: Mode, f: NativeFn| {
        r.insert((tier, Atom::new(name), arity), Native { f, mode });
    };
    use Mode::*;
    use Tier::*;
    for (name, arity, f) in SYSTEM {
        add(System, name, *arity, Leaf, *f);
    }
    for (name, arity, f) in LIBRARY {
        add(Library, name, *arity, Leaf, *f);
    }
    for n in 2..=7 {
        add(Library, "maplist", n, Control, maplist);
    }
    for (name, arity, f) in bk::NATIVES {
        add(Bk, name, *arity, Leaf, *f);
    }
    add(System, "$bk_label_apply", 4, Leaf, bk::label_apply);
    r
});

pub(crate) fn lookup(name: Atom, arity: usize, tier: Tier) -> Option<&'static Native> {
    REGISTRY.get(&(tier, name, arity))
}

/// Whether `name/arity` is answered by a native or a control construct
/// rather than by clauses.
pub fn is_builtin(name: &str, arity: usize) -> bool {
    let a = Atom::new(name);
    CONTROL.contains(&(name, arity))
        || (name == "call" && arity >= 1)
        || [Tier::System, Tier::Library, Tier::Bk].iter().any(|t| lookup(a, arity, *t).is_some())
        || crate::library::program().defines(a, arity)
}

const CONTROL: &[(&str, usize)] = &[
    ("true", 0),
    ("fail", 0),
    ("false", 0),
    (",", 2),
    (";", 2),
    ("->", 2),
    ("*->", 2),
    ("!", 0),
    ("\\+", 1),
    ("not", 1),
    ("once", 1),
    ("ignore", 1),
    ("findall", 3),
    ("findall", 4),
    ("forall", 2),
    ("between", 3),
    ("aggregate_all", 3),
    ("bagof", 3),
    ("setof", 3),
    ("^", 2),
    (":", 2),
];

pub(crate) type Entry = (&'static str, usize, NativeFn);

const SYSTEM: &[Entry] = &[
    ("=", 2, unify2),
    ("unify_with_occurs_check", 2, unify2),
    ("\\=", 2, not_unify),
    ("==", 2, |m, a| cmp_is(m, a, |o| o == Ordering::Equal)),
    ("\\==", 2, |m, a| cmp_is(m, a, |o| o != Ordering::Equal)),
    ("@<", 2, |m, a| cmp_is(m, a, |o| o == Ordering::Less)),
    ("@>", 2, |m, a| cmp_is(m, a, |o| o == Ordering::Greater)),
    ("@=<", 2, |m, a| cmp_is(m, a, |o| o != Ordering::Greater)),
    ("@>=", 2, |m, a| cmp_is(m, a, |o| o != Ordering::Less)),
    ("compare", 3, compare3),
    ("is", 2, is2),
    ("=:=", 2, |m, a| arith_is(m, a, |o| o == Ordering::Equal)),
    ("=\\=", 2, |m, a| arith_is(m, a, |o| o != Ordering::Equal)),
    ("<", 2, |m, a| arith_is(m, a, |o| o == Ordering::Less)),
    (">", 2, |m, a| arith_is(m, a, |o| o == Ordering::Greater)),
    ("=<", 2, |m, a| arith_is(m, a, |o| o != Ordering::Greater)),
    (">=", 2, |m, a| arith_is(m, a, |o| o != Ordering::Less)),
    ("succ", 2, succ2),
    ("plus", 3, plus3),
    ("var", 1, |m, a| ok(matches!(m.deref(&a[0]), Term::Var(_)))),
    ("nonvar", 1, |m, a| ok(!matches!(m.deref(&a[0]), Term::Var(_)))),
    ("atom", 1, |m, a| ok(matches!(m.deref(&a[0]), Term::Atom(_)))),
    ("number", 1, |m, a| ok(matches!(m.deref(&a[0]), Term::Int(_)))),
    ("integer", 1, |m, a| ok(matches!(m.deref(&a[0]), Term::Int(_)))),
    ("atomic", 1, |m, a| ok(matches!(m.deref(&a[0]), Term::Atom(_) | Term::Int(_)))),
    ("compound", 1, |m, a| ok(matches!(m.deref(&a[0]), Term::Compound(_)))),
    ("callable", 1, |m, a| ok(m.deref(&a[0]).is_callable())),
    ("is_list", 1, |m, a| ok(m.list(&a[0]).is_some())),
    ("ground", 1, |m, a| ok(m.resolve(&a[0]).is_ground())),
    ("functor", 3, functor3),
    ("arg", 3, arg3),
    ("=..", 2, univ),
    ("copy_term", 2, copy_term),
    ("term_variables", 2, term_variables),
    ("length", 2, length2),
    ("msort", 2, |m, a| sort_impl(m, a, false)),
    ("sort", 2, |m, a| sort_impl(m, a, true)),
    ("sort", 4, sort4),
    ("keysort", 2, keysort),
    ("atom_codes", 2, atom_codes),
    ("atom_chars", 2, atom_chars),
    ("char_code", 2, char_code),
    ("atom_length", 2, atom_length),
    ("atom_number", 2, atom_number),
    ("number_codes", 2, number_codes),
    ("atom_concat", 3, atom_concat),
    ("atomic_list_concat", 2, atomic_list_concat2),
    ("atomic_list_concat", 3, atomic_list_concat3),
    ("upcase_atom", 2, |m, a| case_atom(m, a, true)),
    ("downcase_atom", 2, |m, a| case_atom(m, a, false)),
    ("term_to_atom", 2, term_to_atom),
    ("write", 1, no_op),
    ("print", 1, no_op),
    ("writeln", 1, no_op),
    ("writeq", 1, no_op),
    ("write_canonical", 1, no_op),
    ("write_term", 2, no_op),
    ("nl", 0, no_op),
    ("tab", 1, no_op),
    ("format", 1, no_op),
    ("format", 2, no_op),
    ("$aggregate", 3, aggregate),
];

const LIBRARY: &[Entry] = &[
    ("append", 3, append3),
    ("append", 2, append2),
    ("memberchk", 2, memberchk),
    ("nth0", 3, |m, a| nth(m, a, 0)),
    ("nth1", 3, |m, a| nth(m, a, 1)),
    ("reverse", 2, reverse),
    ("sum_list", 2, sum_list),
    ("sumlist", 2, sum_list),
    ("max_list", 2, |m, a| extreme_list(m, a, true)),
    ("min_list", 2, |m, a| extreme_list(m, a, false)),
    ("max_member", 2, |m, a| extreme_member(m, a, true)),
    ("min_member", 2, |m, a| extreme_member(m, a, false)),
    ("numlist", 3, numlist),
    ("flatten", 2, flatten),
    ("list_to_set", 2, list_to_set),
    ("list_to_ord_set", 2, |m, a| sort_impl(m, a, true)),
    ("ord_union", 3, ord_union),
    ("ord_subtract", 3, ord_subtract),
    ("ord_intersection", 3, ord_intersection),
    ("ord_memberchk", 2, ord_memberchk),
    ("ord_subset", 2, ord_subset),
    ("ord_add_element", 3, ord_add_element),
    ("ord_del_element", 3, ord_del_element),
    ("pairs_keys_values", 3, pairs_keys_values),
    ("pairs_keys", 2, |m, a| pairs_project(m, a, 0)),
    ("pairs_values", 2, |m, a| pairs_project(m, a, 1)),
    ("transpose", 2, transpose),
    ("clumped", 2, clumped),
];

// ---- argument helpers ----

pub(crate) fn ok(b: bool) -> Res<Outcome> {
    Ok(if b { Outcome::True } else { Outcome::Fail })
}

fn no_op(_: &mut Machine<'_>, _: &[Term]) -> Res<Outcome> {
    Ok(Outcome::True)
}

pub(crate) fn unify_out(m: &mut Machine<'_>, a: &Term, b: &Term) -> Res<Outcome> {
    ok(m.unify(a, b))
}

pub(crate) fn int_arg(m: &Machine<'_>, t: &Term) -> Res<i64> {
    match m.deref(t) {
        Term::Int(i) => Ok(i),
        Term::Var(_) => Err(EngineError::instantiation()),
        other => Err(EngineError::type_error("integer", &other)),
    }
}

/// A proper list argument; partial lists are an instantiation error.
pub(crate) fn list_arg(m: &Machine<'_>, t: &Term) -> Res<Vec<Term>> {
    let (items, tail) = m.partial_list(t);
    match tail {
        Term::Atom(a) if a == atoms::NIL => Ok(items),
        Term::Var(_) => Err(EngineError::instantiation()),
        _ => Err(EngineError::type_error("list", &m.resolve(t))),
    }
}

fn text_of(m: &Machine<'_>, t: &Term) -> Res<String> {
    match m.deref(t) {
        Term::Atom(a) => Ok(a.name().to_string()),
        Term::Int(i) => Ok(i.to_string()),
        Term::Var(_) => Err(EngineError::instantiation()),
        other => Err(EngineError::type_error("atomic", &other)),
    }
}

fn goal(name: &str, args: Vec<Term>) -> Term {
    Term::app(name, args)
}

/// Goal for `call(G, Extra...)`, wrapped in `call/1` when the built goal
/// is itself a control construct so that cut stays local.
pub(crate) fn closure_goal(m: &Machine<'_>, g: &Term, extra: &[Term]) -> Res<Term> {
    match m.deref(g) {
        Term::Var(_) => return Err(EngineError::instantiation()),
        Term::Int(_) => return Err(EngineError::CallableExpected(m.resolve(g).to_string())),
        Term::Compound(c) if c.functor() == atoms::DOT => {
            return Err(EngineError::CallableExpected(m.resolve(g).to_string()));
        }
        _ => {}
    }
    let built = m.add_args(g, extra)?;
    let transparent = built
        .key()
        .is_some_and(|(f, n)| CONTROL.contains(&(f.name(), n)) && f != atoms::COLON || f == atoms::CALL);
    Ok(if transparent { Term::compound(atoms::CALL, vec![built]) } else { built })
}

// ---- comparison and arithmetic ----

fn unify2(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    unify_out(m, &a[0], &a[1])
}

fn not_unify(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    ok(!m.unifiable(&a[0], &a[1]))
}

fn cmp_is(m: &mut Machine<'_>, a: &[Term], f: fn(Ordering) -> bool) -> Res<Outcome> {
    ok(f(m.compare(&a[0], &a[1])))
}

fn compare3(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let o = match m.compare(&a[1], &a[2]) {
        Ordering::Less => "<",
        Ordering::Equal => "=",
        Ordering::Greater => ">",
    };
    match m.deref(&a[0]) {
        Term::Var(_) => unify_out(m, &a[0], &Term::atom(o)),
        Term::Atom(x) if matches!(x.name(), "<" | "=" | ">") => ok(x.name() == o),
        other => Err(EngineError::type_error("order", &other)),
    }
}

fn is2(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let v = m.eval(&a[1])?;
    unify_out(m, &a[0], &Term::int(v))
}

fn arith_is(m: &mut Machine<'_>, a: &[Term], f: fn(Ordering) -> bool) -> Res<Outcome> {
    let x = m.eval(&a[0])?;
    let y = m.eval(&a[1])?;
    ok(f(x.cmp(&y)))
}

fn succ2(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    match (m.deref(&a[0]), m.deref(&a[1])) {
        (Term::Int(x), _) => {
            if x < 0 {
                return Err(EngineError::type_error("not_less_than_zero", &Term::int(x)));
            }
            let y = x.checked_add(1).ok_or_else(|| EngineError::evaluation("int_overflow"))?;
            unify_out(m, &a[1], &Term::int(y))
        }
        (Term::Var(_), Term::Int(y)) => {
            if y < 0 {
                return Err(EngineError::type_error("not_less_than_zero", &Term::int(y)));
            }
            if y == 0 {
                return Ok(Outcome::Fail);
            }
            unify_out(m, &a[0], &Term::int(y - 1))
        }
        (Term::Var(_), Term::Var(_)) => Err(EngineError::instantiation()),
        (Term::Var(_), other) | (other, _) => Err(EngineError::type_error("integer", &other)),
    }
}

fn plus3(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let v: Vec<Option<i64>> = a.iter().map(|t| m.deref(t).as_int()).collect();
    let overflow = || EngineError::evaluation("int_overflow");
    match (v[0], v[1], v[2]) {
        (Some(x), Some(y), _) => unify_out(m, &a[2], &Term::int(x.checked_add(y).ok_or_else(overflow)?)),
        (Some(x), None, Some(z)) => unify_out(m, &a[1], &Term::int(z.checked_sub(x).ok_or_else(overflow)?)),
        (None, Some(y), Some(z)) => unify_out(m, &a[0], &Term::int(z.checked_sub(y).ok_or_else(overflow)?)),
        _ => Err(EngineError::instantiation()),
    }
}

// ---- term inspection ----

fn functor3(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    match m.deref(&a[0]) {
        Term::Var(_) => {
            let n = int_arg(m, &a[2])?;
            let name = m.deref(&a[1]);
            if n == 0 {
                return match name {
                    Term::Var(_) => Err(EngineError::instantiation()),
                    Term::Compound(_) => Err(EngineError::type_error("atomic", &name)),
                    atomic => unify_out(m, &a[0], &atomic),
                };
            }
            let f = match name {
                Term::Atom(f) => f,
                Term::Var(_) => return Err(EngineError::instantiation()),
                other => return Err(EngineError::type_error("atom", &other)),
            };
            if n < 0 {
                return Err(EngineError::type_error("not_less_than_zero", &Term::int(n)));
            }
            let args: Vec<Term> = (0..n).map(|_| m.fresh()).collect();
            let t = Term::compound(f, args);
            unify_out(m, &a[0], &t)
        }
        Term::Compound(c) => {
            let ok1 = m.unify(&a[1], &Term::Atom(c.functor()));
            ok(ok1 && m.unify(&a[2], &Term::int(c.arity() as i64)))
        }
        atomic => {
            let ok1 = m.unify(&a[1], &atomic);
            ok(ok1 && m.unify(&a[2], &Term::int(0)))
        }
    }
}

fn arg3(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let t = m.deref(&a[1]);
    let Term::Compound(c) = &t else {
        return match t {
            Term::Var(_) => Err(EngineError::instantiation()),
            other => Err(EngineError::type_error("compound", &other)),
        };
    };
    match m.deref(&a[0]) {
        Term::Int(n) => {
            if n < 1 || n as usize > c.arity() {
                return Ok(Outcome::Fail);
            }
            let x = c.args()[n as usize - 1].clone();
            unify_out(m, &a[2], &x)
        }
        Term::Var(_) => Ok(Outcome::Run(vec![goal("$arg_enum", a.to_vec())])),
        other => Err(EngineError::type_error("integer", &other)),
    }
}

fn univ(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    match m.deref(&a[0]) {
        Term::Var(_) => {
            let items = list_arg(m, &a[1])?;
            let Some(head) = items.first() else {
                return Err(EngineError::type_error("non_empty_list", &Term::nil()));
            };
            let head = m.deref(head);
            let t = if items.len() == 1 {
                match head {
                    Term::Var(_) => return Err(EngineError::instantiation()),
                    Term::Compound(_) => return Err(EngineError::type_error("atomic", &head)),
                    x => x,
                }
            } else {
                match head {
                    Term::Atom(f) => Term::compound(f, items[1..].to_vec()),
                    Term::Var(_) => return Err(EngineError::instantiation()),
                    other => return Err(EngineError::type_error("atom", &other)),
                }
            };
            unify_out(m, &a[0], &t)
        }
        Term::Compound(c) => {
            let mut items = vec![Term::Atom(c.functor())];
            items.extend(c.args().iter().cloned());
            unify_out(m, &a[1], &Term::list(items))
        }
        atomic => unify_out(m, &a[1], &Term::list([atomic])),
    }
}

fn copy_term(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let c = m.copy_fresh(&a[0]);
    unify_out(m, &a[1], &c)
}

fn term_variables(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let t = m.resolve(&a[0]);
    let vs: Vec<Term> = t.variables().into_iter().map(Term::Var).collect();
    unify_out(m, &a[1], &Term::list(vs))
}

fn length2(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let (items, tail) = m.partial_list(&a[0]);
    match tail {
        Term::Atom(x) if x == atoms::NIL => unify_out(m, &a[1], &Term::int(items.len() as i64)),
        Term::Var(_) => match m.deref(&a[1]) {
            Term::Int(n) => {
                if n < 0 {
                    return Err(EngineError::type_error("not_less_than_zero", &Term::int(n)));
                }
                let n = n as usize;
                if n < items.len() {
                    return Ok(Outcome::Fail);
                }
                let extra: Vec<Term> = (items.len()..n).map(|_| m.fresh()).collect();
                unify_out(m, &tail, &Term::list(extra))
            }
            Term::Var(_) => Ok(Outcome::Run(vec![goal("$length", vec![a[0].clone(), a[1].clone(), Term::int(0)])])),
            other => Err(EngineError::type_error("integer", &other)),
        },
        _ => Ok(Outcome::Fail),
    }
}

// ---- sorting ----

fn sort_terms(m: &Machine<'_>, items: &mut [Term]) {
    items.sort_by(|x, y| m.compare(x, y));
}

fn sort_impl(m: &mut Machine<'_>, a: &[Term], dedup: bool) -> Res<Outcome> {
    let mut items: Vec<Term> = list_arg(m, &a[0])?.iter().map(|t| m.resolve(t)).collect();
    sort_terms(m, &mut items);
    if dedup {
        items.dedup_by(|x, y| m.compare(x, y) == Ordering::Equal);
    }
    unify_out(m, &a[1], &Term::list(items))
}

fn sort4(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let key = int_arg(m, &a[0])?;
    let order = match m.deref(&a[1]) {
        Term::Atom(o) if matches!(o.name(), "@<" | "@>" | "@=<" | "@>=") => o.name(),
        Term::Var(_) => return Err(EngineError::instantiation()),
        other => return Err(EngineError::type_error("order", &other)),
    };
    let items: Vec<Term> = list_arg(m, &a[2])?.iter().map(|t| m.resolve(t)).collect();
    let mut keyed = Vec::with_capacity(items.len());
    for it in items {
        let k = if key == 0 {
            it.clone()
        } else {
            match &it {
                Term::Compound(c) if key >= 1 && key as usize <= c.arity() => c.args()[key as usize - 1].clone(),
                _ => return Err(EngineError::type_error("compound", &it)),
            }
        };
        keyed.push((k, it));
    }
    let desc = order.starts_with("@>");
    keyed.sort_by(|x, y| {
        let o = m.compare(&x.0, &y.0);
        if desc {
            o.reverse()
        } else {
            o
        }
    });
    if !order.contains('=') {
        keyed.dedup_by(|x, y| m.compare(&x.0, &y.0) == Ordering::Equal);
    }
    unify_out(m, &a[3], &Term::list(keyed.into_iter().map(|p| p.1)))
}

fn keysort(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let items = list_arg(m, &a[0])?;
    let mut pairs = Vec::with_capacity(items.len());
    for it in items {
        let it = m.resolve(&it);
        if !it.is_functor(atoms::MINUS, 2) {
            return Err(EngineError::type_error("pair", &it));
        }
        pairs.push(it);
    }
    pairs.sort_by(|x, y| m.compare(&x.args()[0], &y.args()[0]));
    unify_out(m, &a[1], &Term::list(pairs))
}

// ---- atoms ----

fn chars_to_string(m: &Machine<'_>, t: &Term, codes: bool) -> Res<String> {
    let mut s = String::new();
    for it in list_arg(m, t)? {
        match m.deref(&it) {
            Term::Int(c) if codes => {
                s.push(char::from_u32(c as u32).ok_or_else(|| EngineError::type_error("character_code", &Term::int(c)))?)
            }
            Term::Atom(a) if !codes && a.name().chars().count() == 1 => s.push_str(a.name()),
            Term::Var(_) => return Err(EngineError::instantiation()),
            other => return Err(EngineError::type_error(if codes { "character_code" } else { "character" }, &other)),
        }
    }
    Ok(s)
}

fn atom_codes(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    if matches!(m.deref(&a[0]), Term::Var(_)) {
        let s = chars_to_string(m, &a[1], true)?;
        return unify_out(m, &a[0], &Term::atom(&s));
    }
    let s = text_of(m, &a[0])?;
    let codes = Term::list(s.chars().map(|c| Term::int(c as i64)));
    unify_out(m, &a[1], &codes)
}

fn atom_chars(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    if matches!(m.deref(&a[0]), Term::Var(_)) {
        let s = chars_to_string(m, &a[1], false)?;
        return unify_out(m, &a[0], &Term::atom(&s));
    }
    let s = text_of(m, &a[0])?;
    let chars = Term::list(s.chars().map(|c| Term::atom(&c.to_string())));
    unify_out(m, &a[1], &chars)
}

fn char_code(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    match m.deref(&a[0]) {
        Term::Atom(c) if c.name().chars().count() == 1 => {
            let code = c.name().chars().next().unwrap() as i64;
            unify_out(m, &a[1], &Term::int(code))
        }
        Term::Var(_) => {
            let code = int_arg(m, &a[1])?;
            let c = char::from_u32(code as u32).ok_or_else(|| EngineError::type_error("character_code", &Term::int(code)))?;
            unify_out(m, &a[0], &Term::atom(&c.to_string()))
        }
        other => Err(EngineError::type_error("character", &other)),
    }
}

fn atom_length(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let s = text_of(m, &a[0])?;
    unify_out(m, &a[1], &Term::int(s.chars().count() as i64))
}

fn parse_int(s: &str) -> Option<i64> {
    let t = s.trim();
    if t.is_empty() || t.starts_with('+') {
        return None;
    }
    t.parse().ok()
}

fn atom_number(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    match m.deref(&a[0]) {
        Term::Var(_) => {
            let n = int_arg(m, &a[1])?;
            unify_out(m, &a[0], &Term::atom(&n.to_string()))
        }
        Term::Atom(x) => match parse_int(x.name()) {
            Some(n) => unify_out(m, &a[1], &Term::int(n)),
            None => Ok(Outcome::Fail),
        },
        other => Err(EngineError::type_error("atom", &other)),
    }
}

fn number_codes(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    match m.deref(&a[0]) {
        Term::Var(_) => {
            let s = chars_to_string(m, &a[1], true)?;
            match parse_int(&s) {
                Some(n) => unify_out(m, &a[0], &Term::int(n)),
                None => Err(EngineError::Type { goal: String::new(), expected: "number", culprit: s }),
            }
        }
        Term::Int(n) => {
            let codes = Term::list(n.to_string().chars().map(|c| Term::int(c as i64)));
            unify_out(m, &a[1], &codes)
        }
        other => Err(EngineError::type_error("integer", &other)),
    }
}

fn atom_concat(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let x = m.deref(&a[0]);
    let y = m.deref(&a[1]);
    if !matches!(x, Term::Var(_)) && !matches!(y, Term::Var(_)) {
        let s = text_of(m, &x)? + &text_of(m, &y)?;
        return unify_out(m, &a[2], &Term::atom(&s));
    }
    let whole = text_of(m, &a[2])?;
    let splits: Vec<Term> = whole
        .char_indices()
        .map(|(i, _)| i)
        .chain([whole.len()])
        .map(|i| Term::compound(atoms::MINUS, vec![Term::atom(&whole[..i]), Term::atom(&whole[i..])]))
        .collect();
    let pair = Term::compound(atoms::MINUS, vec![a[0].clone(), a[1].clone()]);
    Ok(Outcome::Run(vec![goal("member", vec![pair, Term::list(splits)])]))
}

fn atomic_list_concat2(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let mut s = String::new();
    for it in list_arg(m, &a[0])? {
        s.push_str(&text_of(m, &it)?);
    }
    unify_out(m, &a[1], &Term::atom(&s))
}

fn atomic_list_concat3(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let sep = text_of(m, &a[1])?;
    let joined = m.list(&a[0]).and_then(|items| {
        let parts: Option<Vec<String>> = items.iter().map(|t| text_of(m, t).ok()).collect();
        parts
    });
    if let Some(parts) = joined {
        return unify_out(m, &a[2], &Term::atom(&parts.join(&sep)));
    }
    if sep.is_empty() {
        return Err(EngineError::instantiation());
    }
    let whole = text_of(m, &a[2])?;
    let parts = Term::list(whole.split(sep.as_str()).map(Term::atom).collect::<Vec<_>>());
    unify_out(m, &a[0], &parts)
}

fn case_atom(m: &mut Machine<'_>, a: &[Term], upper: bool) -> Res<Outcome> {
    let s = text_of(m, &a[0])?;
    let t = if upper { s.to_uppercase() } else { s.to_lowercase() };
    unify_out(m, &a[1], &Term::atom(&t))
}

fn term_to_atom(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let t = m.resolve(&a[0]);
    if matches!(t, Term::Var(_)) {
        let s = text_of(m, &a[1])?;
        let parsed = parse_term(&s).map_err(|_| EngineError::Type {
            goal: String::new(),
            expected: "term",
            culprit: s.clone(),
        })?;
        let fresh = m.copy_fresh(&parsed.term);
        return unify_out(m, &a[0], &fresh);
    }
    let text = crate::write::term_to_string_with(&t, &WriteOptions::plain());
    unify_out(m, &a[1], &Term::atom(&text))
}

fn aggregate(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let kind = m.deref(&a[0]);
    let items = list_arg(m, &a[1])?;
    let out = match kind.as_atom().map(|k| k.name()) {
        Some("count") => Term::int(items.len() as i64),
        Some("sum") => {
            let mut s = 0i64;
            for it in &items {
                s = s.checked_add(m.eval(it)?).ok_or_else(|| EngineError::evaluation("int_overflow"))?;
            }
            Term::int(s)
        }
        Some(k @ ("max" | "min")) => {
            let mut best: Option<i64> = None;
            for it in &items {
                let v = m.eval(it)?;
                best = Some(match best {
                    None => v,
                    Some(b) if k == "max" => b.max(v),
                    Some(b) => b.min(v),
                });
            }
            match best {
                Some(v) => Term::int(v),
                None => return Ok(Outcome::Fail),
            }
        }
        Some("bag") => Term::list(items),
        Some("set") => {
            let mut items: Vec<Term> = items.iter().map(|t| m.resolve(t)).collect();
            sort_terms(m, &mut items);
            items.dedup_by(|x, y| m.compare(x, y) == Ordering::Equal);
            Term::list(items)
        }
        _ => return Err(EngineError::type_error("aggregate_spec", &kind)),
    };
    unify_out(m, &a[2], &out)
}

// ---- lists ----

fn append3(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let (items, tail) = m.partial_list(&a[0]);
    if tail == Term::nil() {
        let joined = Term::list_with_tail(items, a[1].clone());
        return unify_out(m, &a[2], &joined);
    }
    Ok(Outcome::Run(vec![goal("$append", a.to_vec())]))
}

fn append2(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let lists = list_arg(m, &a[0])?;
    let mut all = Vec::new();
    for l in &lists {
        all.extend(list_arg(m, l)?);
    }
    unify_out(m, &a[1], &Term::list(all))
}

fn memberchk(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let (items, tail) = m.partial_list(&a[1]);
    for it in &items {
        if m.unifiable(&a[0], it) {
            return unify_out(m, &a[0], it);
        }
    }
    if matches!(tail, Term::Var(_)) {
        let g = goal("member", vec![a[0].clone(), tail]);
        return Ok(Outcome::Run(vec![Term::app("once", vec![g])]));
    }
    Ok(Outcome::Fail)
}

fn nth(m: &mut Machine<'_>, a: &[Term], base: i64) -> Res<Outcome> {
    match m.deref(&a[0]) {
        Term::Int(i) => {
            let (items, tail) = m.partial_list(&a[1]);
            let k = i - base;
            if k < 0 {
                return Ok(Outcome::Fail);
            }
            if let Some(x) = items.get(k as usize) {
                return unify_out(m, &a[2], x);
            }
            if matches!(tail, Term::Var(_)) {
                let extra: Vec<Term> = (items.len()..k as usize).map(|_| m.fresh()).collect();
                let rest = m.fresh();
                let t = Term::list_with_tail(extra, Term::cons(a[2].clone(), rest));
                return unify_out(m, &tail, &t);
            }
            Ok(Outcome::Fail)
        }
        Term::Var(_) => Ok(Outcome::Run(vec![goal("$nth_enum", vec![a[1].clone(), Term::int(base), a[0].clone(), a[2].clone()])])),
        other => Err(EngineError::type_error("integer", &other)),
    }
}

fn reverse(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    if let Some(mut items) = m.list(&a[0]) {
        items.reverse();
        return unify_out(m, &a[1], &Term::list(items));
    }
    if let Some(mut items) = m.list(&a[1]) {
        items.reverse();
        return unify_out(m, &a[0], &Term::list(items));
    }
    Err(EngineError::instantiation())
}

fn sum_list(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let mut s = 0i64;
    for it in list_arg(m, &a[0])? {
        s = s.checked_add(m.eval(&it)?).ok_or_else(|| EngineError::evaluation("int_overflow"))?;
    }
    unify_out(m, &a[1], &Term::int(s))
}

fn extreme_list(m: &mut Machine<'_>, a: &[Term], max: bool) -> Res<Outcome> {
    let items = list_arg(m, &a[0])?;
    let mut best: Option<i64> = None;
    for it in &items {
        let v = m.eval(it)?;
        best = Some(match best {
            None => v,
            Some(b) if max => b.max(v),
            Some(b) => b.min(v),
        });
    }
    match best {
        Some(v) => unify_out(m, &a[1], &Term::int(v)),
        None => Ok(Outcome::Fail),
    }
}

fn extreme_member(m: &mut Machine<'_>, a: &[Term], max: bool) -> Res<Outcome> {
    let items = list_arg(m, &a[1])?;
    let mut best: Option<Term> = None;
    for it in items {
        best = Some(match best {
            None => it,
            Some(b) => {
                let o = m.compare(&it, &b);
                if (max && o == Ordering::Greater) || (!max && o == Ordering::Less) {
                    it
                } else {
                    b
                }
            }
        });
    }
    match best {
        Some(v) => unify_out(m, &a[0], &v),
        None => Ok(Outcome::Fail),
    }
}

fn numlist(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let lo = int_arg(m, &a[0])?;
    let hi = int_arg(m, &a[1])?;
    if lo > hi {
        return Ok(Outcome::Fail);
    }
    unify_out(m, &a[2], &Term::list((lo..=hi).map(Term::int)))
}

fn flatten(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let mut out = Vec::new();
    let mut stack = vec![m.deref(&a[0])];
    while let Some(t) = stack.pop() {
        match &t {
            Term::Atom(x) if *x == atoms::NIL => {}
            Term::Compound(c) if c.functor() == atoms::DOT && c.arity() == 2 => {
                stack.push(m.deref(&c.args()[1]));
                stack.push(m.deref(&c.args()[0]));
            }
            _ => out.push(t),
        }
    }
    unify_out(m, &a[1], &Term::list(out))
}

fn list_to_set(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let items: Vec<Term> = list_arg(m, &a[0])?.iter().map(|t| m.resolve(t)).collect();
    let mut out: Vec<Term> = Vec::new();
    for it in items {
        if !out.iter().any(|o| m.compare(o, &it) == Ordering::Equal) {
            out.push(it);
        }
    }
    unify_out(m, &a[1], &Term::list(out))
}

fn ord_list(m: &Machine<'_>, t: &Term) -> Res<Vec<Term>> {
    Ok(list_arg(m, t)?.iter().map(|x| m.resolve(x)).collect())
}

fn ord_contains(m: &Machine<'_>, set: &[Term], x: &Term) -> bool {
    set.binary_search_by(|probe| m.compare(probe, x)).is_ok()
}

fn ord_union(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let mut all = ord_list(m, &a[0])?;
    all.extend(ord_list(m, &a[1])?);
    sort_terms(m, &mut all);
    all.dedup_by(|x, y| m.compare(x, y) == Ordering::Equal);
    unify_out(m, &a[2], &Term::list(all))
}

fn ord_subtract(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let xs = ord_list(m, &a[0])?;
    let ys = ord_list(m, &a[1])?;
    let out: Vec<Term> = xs.into_iter().filter(|x| !ys.iter().any(|y| m.compare(x, y) == Ordering::Equal)).collect();
    unify_out(m, &a[2], &Term::list(out))
}

fn ord_intersection(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let xs = ord_list(m, &a[0])?;
    let ys = ord_list(m, &a[1])?;
    let out: Vec<Term> = xs.into_iter().filter(|x| ys.iter().any(|y| m.compare(x, y) == Ordering::Equal)).collect();
    unify_out(m, &a[2], &Term::list(out))
}

fn ord_memberchk(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let x = m.resolve(&a[0]);
    let ys = ord_list(m, &a[1])?;
    ok(ys.iter().any(|y| m.compare(&x, y) == Ordering::Equal))
}

fn ord_subset(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let xs = ord_list(m, &a[0])?;
    let mut ys = ord_list(m, &a[1])?;
    sort_terms(m, &mut ys);
    ok(xs.iter().all(|x| ord_contains(m, &ys, x)))
}

fn ord_add_element(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let mut xs = ord_list(m, &a[0])?;
    xs.push(m.resolve(&a[1]));
    sort_terms(m, &mut xs);
    xs.dedup_by(|x, y| m.compare(x, y) == Ordering::Equal);
    unify_out(m, &a[2], &Term::list(xs))
}

fn ord_del_element(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let x = m.resolve(&a[1]);
    let xs: Vec<Term> = ord_list(m, &a[0])?.into_iter().filter(|y| m.compare(&x, y) != Ordering::Equal).collect();
    unify_out(m, &a[2], &Term::list(xs))
}

fn pairs_keys_values(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    if let Some(pairs) = m.list(&a[0]) {
        let mut ks = Vec::new();
        let mut vs = Vec::new();
        for p in pairs {
            let (k, v) = (m.fresh(), m.fresh());
            if !m.unify(&p, &Term::compound(atoms::MINUS, vec![k.clone(), v.clone()])) {
                return Ok(Outcome::Fail);
            }
            ks.push(k);
            vs.push(v);
        }
        let ok1 = m.unify(&a[1], &Term::list(ks));
        return ok(ok1 && m.unify(&a[2], &Term::list(vs)));
    }
    let ks = list_arg(m, &a[1])?;
    let vs = list_arg(m, &a[2])?;
    if ks.len() != vs.len() {
        return Ok(Outcome::Fail);
    }
    let pairs = Term::list(ks.into_iter().zip(vs).map(|(k, v)| Term::compound(atoms::MINUS, vec![k, v])));
    unify_out(m, &a[0], &pairs)
}

fn pairs_project(m: &mut Machine<'_>, a: &[Term], which: usize) -> Res<Outcome> {
    let pairs = list_arg(m, &a[0])?;
    let mut out = Vec::new();
    for p in pairs {
        let (k, v) = (m.fresh(), m.fresh());
        if !m.unify(&p, &Term::compound(atoms::MINUS, vec![k.clone(), v.clone()])) {
            return Ok(Outcome::Fail);
        }
        out.push(if which == 0 { k } else { v });
    }
    unify_out(m, &a[1], &Term::list(out))
}

fn transpose(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let rows = list_arg(m, &a[0])?;
    let mut cols: Vec<Vec<Term>> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let items = list_arg(m, r)?;
        if i == 0 {
            cols = vec![Vec::with_capacity(rows.len()); items.len()];
        } else if items.len() != cols.len() {
            return Ok(Outcome::Fail);
        }
        for (j, x) in items.into_iter().enumerate() {
            cols[j].push(x);
        }
    }
    unify_out(m, &a[1], &Term::list(cols.into_iter().map(Term::list)))
}

fn clumped(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let items: Vec<Term> = list_arg(m, &a[0])?.iter().map(|t| m.resolve(t)).collect();
    let mut out: Vec<(Term, i64)> = Vec::new();
    for it in items {
        match out.last_mut() {
            Some((x, n)) if m.compare(x, &it) == Ordering::Equal => *n += 1,
            _ => out.push((it, 1)),
        }
    }
    let l = Term::list(out.into_iter().map(|(x, n)| Term::compound(atoms::MINUS, vec![x, Term::int(n)])));
    unify_out(m, &a[1], &l)
}

fn maplist(m: &mut Machine<'_>, a: &[Term]) -> Res<Outcome> {
    let g = &a[0];
    let lists = &a[1..];
    let parts: Vec<(Vec<Term>, Term)> = lists.iter().map(|l| m.partial_list(l)).collect();
    let Some(n) = parts.iter().find(|(_, t)| *t == Term::nil()).map(|(items, _)| items.len()) else {
        let mut args = vec![g.clone()];
        args.extend(lists.iter().cloned());
        return Ok(Outcome::Run(vec![goal("$maplist", args)]));
    };
    let mut columns = Vec::with_capacity(lists.len());
    for (items, tail) in parts {
        if items.len() > n {
            return Ok(Outcome::Fail);
        }
        let mut items = items;
        if items.len() < n || tail != Term::nil() {
            if !matches!(tail, Term::Var(_)) {
                return Ok(Outcome::Fail);
            }
            let extra: Vec<Term> = (items.len()..n).map(|_| m.fresh()).collect();
            if !m.unify(&tail, &Term::list(extra.clone())) {
                return Ok(Outcome::Fail);
            }
            items.extend(extra);
        }
        columns.push(items);
    }
    if n == 0 {
        return Ok(Outcome::True);
    }
    let mut goals = Vec::with_capacity(n);
    for i in 0..n {
        let extra: Vec<Term> = columns.iter().map(|c| c[i].clone()).collect();
        goals.push(closure_goal(m, g, &extra)?);
    }
    Ok(Outcome::Run(goals))
}
