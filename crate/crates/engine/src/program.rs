use std::collections::HashMap;
use std::sync::Arc;

use crate::error::ParseError;
use crate::parse::{self, ReadTerm};
use crate::term::{atoms, Atom, Term};
use crate::write;

/// Index of a clause in its program, in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ArgKey {
    Atom(Atom),
    Int(i64),
    Functor(Atom, usize),
}

impl ArgKey {
    pub(crate) fn of(t: &Term) -> Option<ArgKey> {
        match t {
            Term::Var(_) => None,
            Term::Int(i) => Some(ArgKey::Int(*i)),
            Term::Atom(a) => Some(ArgKey::Atom(*a)),
            Term::Compound(c) => Some(ArgKey::Functor(c.functor(), c.arity())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Clause {
    pub head: Term,
    pub body: Term,
    pub var_names: Vec<String>,
    pub line: usize,
    /// Body conjuncts after flattening nested `,`/2.
    pub(crate) goals: Vec<Term>,
    pub(crate) first_arg: Option<ArgKey>,
}

impl Clause {
    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    pub fn is_fact(&self) -> bool {
        self.body == Term::Atom(atoms::TRUE)
    }

    /// Body conjuncts after flattening nested conjunctions.
    pub fn body_goals(&self) -> &[Term] {
        &self.goals
    }

    pub fn to_term(&self) -> Term {
        if self.is_fact() {
            self.head.clone()
        } else {
            Term::compound(atoms::NECK, vec![self.head.clone(), self.body.clone()])
        }
    }

    pub fn text(&self) -> String {
        write::clause_to_string(&self.to_term(), &self.var_names)
    }
}

pub fn flatten_conjunction(t: &Term, out: &mut Vec<Term>) {
    let mut cur = t;
    loop {
        if cur.is_functor(atoms::COMMA, 2) {
            flatten_conjunction(&cur.args()[0], out);
            cur = &cur.args()[1];
        } else {
            out.push(cur.clone());
            return;
        }
    }
}

/// A parsed program: clauses in source order, indexed by predicate.
#[derive(Debug, Clone, Default)]
pub struct Program {
    clauses: Vec<Clause>,
    index: HashMap<(Atom, usize), Arc<[usize]>>,
    order: Vec<(Atom, usize)>,
    directives: Vec<Term>,
    source: String,
}

impl Program {
    pub fn parse(source: &str) -> Result<Program, ParseError> {
        parse_program(source)
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, id: ClauseId) -> &Clause {
        &self.clauses[id.0]
    }

    pub fn directives(&self) -> &[Term] {
        &self.directives
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Predicates in order of first definition.
    pub fn predicates(&self) -> &[(Atom, usize)] {
        &self.order
    }

    pub fn defines(&self, name: Atom, arity: usize) -> bool {
        self.index.contains_key(&(name, arity))
    }

    pub(crate) fn lookup(&self, name: Atom, arity: usize) -> Option<&Arc<[usize]>> {
        self.index.get(&(name, arity))
    }

    /// Clause ids of one predicate, in source order.
    pub fn predicate(&self, name: &str, arity: usize) -> Vec<ClauseId> {
        self.index
            .get(&(Atom::new(name), arity))
            .map(|ids| ids.iter().map(|&i| ClauseId(i)).collect())
            .unwrap_or_default()
    }

    /// Whether the program declares `:- use_module(bk)`.
    pub fn uses_bk(&self) -> bool {
        self.directives.iter().any(|d| {
            d.is_functor(atoms::USE_MODULE, 1) && d.args()[0] == Term::Atom(atoms::BK)
                || d.is_functor(atoms::USE_MODULE, 2) && d.args()[0] == Term::Atom(atoms::BK)
        })
    }

    /// Renders all clauses, one per line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.clauses {
            s.push_str(&c.text());
            s.push('\n');
        }
        s
    }

    fn add(&mut self, clause: Clause) {
        let key = clause.head.key().expect("callable head");
        let id = self.clauses.len();
        self.clauses.push(clause);
        match self.index.get_mut(&key) {
            Some(ids) => {
                let mut v = ids.to_vec();
                v.push(id);
                *ids = v.into();
            }
            None => {
                self.order.push(key);
                self.index.insert(key, vec![id].into());
            }
        }
    }
}

const CONTROL: &[(&str, usize)] = &[(",", 2), (";", 2), ("->", 2), ("*->", 2), ("!", 0), ("\\+", 1), ("true", 0), ("call", 1), (":", 2)];

const REJECTED: &[(&str, usize, &str)] = &[
    ("assert", 1, "assert/retract"),
    ("asserta", 1, "assert/retract"),
    ("assertz", 1, "assert/retract"),
    ("asserta", 2, "assert/retract"),
    ("assertz", 2, "assert/retract"),
    ("retract", 1, "assert/retract"),
    ("retractall", 1, "assert/retract"),
    ("abolish", 1, "assert/retract"),
    ("catch", 3, "exceptions (catch/throw)"),
    ("throw", 1, "exceptions (catch/throw)"),
    ("table", 1, "tabling"),
];

/// Walks goal positions of a body and reports the first construct outside the subset.
fn unsupported_goal(t: &Term) -> Option<&'static str> {
    let Some((f, n)) = t.key() else { return None };
    let name = f.name();
    if let Some((_, _, what)) = REJECTED.iter().find(|(r, a, _)| *r == name && *a == n) {
        return Some(what);
    }
    let args = t.args();
    let sub: Vec<&Term> = match (name, n) {
        (",", 2) | (";", 2) | ("->", 2) | ("*->", 2) | ("forall", 2) => vec![&args[0], &args[1]],
        ("\\+", 1) | ("once", 1) | ("ignore", 1) | ("not", 1) => vec![&args[0]],
        ("findall", 3) | ("findall", 4) | ("bagof", 3) | ("setof", 3) | ("aggregate_all", 3) => vec![&args[1]],
        ("call", _) => vec![&args[0]],
        (":", 2) => vec![&args[1]],
        ("^", 2) => vec![&args[1]],
        _ => vec![],
    };
    sub.into_iter().find_map(unsupported_goal)
}

fn syntax(rt: &ReadTerm, message: &str) -> ParseError {
    ParseError::Syntax { line: rt.line, column: 1, message: message.to_string() }
}

pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let mut prog = Program { source: source.to_string(), ..Program::default() };
    for rt in parse::read_terms(source)? {
        let t = &rt.term;
        if t.is_functor(atoms::NECK, 1) || t.is_functor(atoms::QUERY, 1) {
            let d = &t.args()[0];
            if d.is_functor(Atom::new("table"), 1) {
                return Err(ParseError::Unsupported { feature: "tabling".into(), line: rt.line });
            }
            prog.directives.push(d.clone());
            continue;
        }
        if t.is_functor(atoms::DCG_ARROW, 2) {
            return Err(ParseError::Unsupported { feature: "DCG rules".into(), line: rt.line });
        }
        let (head, body) = if t.is_functor(atoms::NECK, 2) {
            (t.args()[0].clone(), t.args()[1].clone())
        } else {
            (t.clone(), Term::Atom(atoms::TRUE))
        };
        // `m:head :- body` defines head
        let head = if head.is_functor(atoms::COLON, 2) { head.args()[1].clone() } else { head };
        let Some((f, n)) = head.key() else {
            return Err(syntax(&rt, "clause head is not callable"));
        };
        if CONTROL.iter().any(|(c, a)| *c == f.name() && *a == n) {
            return Err(syntax(&rt, &format!("cannot redefine control construct {}/{}", f.name(), n)));
        }
        if let Some(what) = unsupported_goal(&body) {
            return Err(ParseError::Unsupported { feature: what.into(), line: rt.line });
        }
        let mut goals = Vec::new();
        flatten_conjunction(&body, &mut goals);
        let first_arg = head.args().first().and_then(ArgKey::of);
        prog.add(Clause { head, body, var_names: rt.var_names, line: rt.line, goals, first_arg });
    }
    Ok(prog)
}

/// A goal with the names of its variables (indexed by `VarId`).
#[derive(Debug, Clone)]
pub struct Query {
    pub goal: Term,
    pub var_names: Vec<String>,
}

impl Query {
    pub fn new(goal: Term) -> Query {
        let n = goal.variables().iter().map(|v| v.0 as usize + 1).max().unwrap_or(0);
        Query { goal, var_names: (0..n).map(|i| format!("_G{i}")).collect() }
    }

    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    /// Index of the named variable.
    pub fn var(&self, name: &str) -> Option<crate::term::VarId> {
        self.var_names.iter().position(|n| n == name).map(|i| crate::term::VarId(i as u32))
    }
}

pub fn parse_query(source: &str) -> Result<Query, ParseError> {
    let rt = parse::parse_term(source)?;
    if let Some(what) = unsupported_goal(&rt.term) {
        return Err(ParseError::Unsupported { feature: what.into(), line: rt.line });
    }
    Ok(Query { goal: rt.term, var_names: rt.var_names })
}
