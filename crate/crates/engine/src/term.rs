use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, LazyLock, RwLock};

/// Interned symbol. Names live for the whole process.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom(u32);

struct Interner {
    ids: HashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

macro_rules! well_known {
    ($($konst:ident = $name:expr),* $(,)?) => {
        pub mod atoms {
            use super::Atom;
            well_known!(@consts 0u32; $($konst,)*);
        }
        const WELL_KNOWN: &[&str] = &[$($name),*];
    };
    (@consts $n:expr; $konst:ident, $($rest:ident,)*) => {
        pub const $konst: Atom = Atom($n);
        well_known!(@consts $n + 1u32; $($rest,)*);
    };
    (@consts $n:expr;) => {};
}

well_known! {
    NIL = "[]",
    DOT = ".",
    CURLY = "{}",
    TRUE = "true",
    FAIL = "fail",
    FALSE = "false",
    COMMA = ",",
    SEMICOLON = ";",
    BAR = "|",
    ARROW = "->",
    SOFT_ARROW = "*->",
    NOT_PROVABLE = "\\+",
    CUT = "!",
    CALL = "call",
    NECK = ":-",
    QUERY = "?-",
    DCG_ARROW = "-->",
    COLON = ":",
    MINUS = "-",
    PLUS = "+",
    EQUALS = "=",
    BK = "bk",
    COMPONENT = "component",
    BBOX = "bbox",
    HOLES = "holes",
    ANY = "any",
    NONZERO = "nonzero",
    COLOR = "color",
    ARITH_EQ = "=:=",
    EMPTY = "",
    END_OF_FILE = "end_of_file",
    USE_MODULE = "use_module",
    LESS = "<",
    GREATER = ">",
}

static INTERNER: LazyLock<RwLock<Interner>> = LazyLock::new(|| {
    let mut it = Interner { ids: HashMap::new(), names: Vec::new() };
    for name in WELL_KNOWN {
        it.ids.insert(name, it.names.len() as u32);
        it.names.push(name);
    }
    RwLock::new(it)
});

impl Atom {
    pub fn new(name: &str) -> Atom {
        if let Some(&id) = INTERNER.read().unwrap().ids.get(name) {
            return Atom(id);
        }
        let mut it = INTERNER.write().unwrap();
        if let Some(&id) = it.ids.get(name) {
            return Atom(id);
        }
        let name: &'static str = Box::leak(name.to_owned().into_boxed_str());
        let id = it.names.len() as u32;
        it.ids.insert(name, id);
        it.names.push(name);
        Atom(id)
    }

    pub fn name(self) -> &'static str {
        INTERNER.read().unwrap().names[self.0 as usize]
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.name())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Variable identity. Clause variables are numbered from zero and shifted
/// into a fresh range each time the clause is used.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct VarId(pub u32);

#[derive(Clone, PartialEq, Eq)]
pub enum Term {
    Var(VarId),
    Int(i64),
    Atom(Atom),
    Compound(Arc<Compound>),
}

pub struct Compound {
    functor: Atom,
    args: Box<[Term]>,
    ground: bool,
}

impl PartialEq for Compound {
    fn eq(&self, other: &Compound) -> bool {
        // loop on the last argument so long lists do not recurse
        let (mut a, mut b) = (self, other);
        loop {
            if a.functor != b.functor || a.args.len() != b.args.len() || a.ground != b.ground {
                return false;
            }
            let n = a.args.len();
            if a.args[..n - 1] != b.args[..n - 1] {
                return false;
            }
            match (&a.args[n - 1], &b.args[n - 1]) {
                (Term::Compound(x), Term::Compound(y)) => {
                    if Arc::ptr_eq(x, y) {
                        return true;
                    }
                    a = x;
                    b = y;
                }
                (x, y) => return x == y,
            }
        }
    }
}

impl Eq for Compound {}

impl Drop for Compound {
    fn drop(&mut self) {
        let Some(last) = self.args.last_mut() else { return };
        let mut tail = std::mem::replace(last, Term::Int(0));
        while let Term::Compound(arc) = tail {
            match Arc::try_unwrap(arc) {
                Ok(mut c) => match c.args.last_mut() {
                    Some(l) => tail = std::mem::replace(l, Term::Int(0)),
                    None => break,
                },
                Err(_) => break,
            }
        }
    }
}

impl Compound {
    pub fn functor(&self) -> Atom {
        self.functor
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// True when no variable occurs anywhere below this node.
    pub fn is_ground(&self) -> bool {
        self.ground
    }
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(Atom::new(name))
    }

    pub fn int(v: i64) -> Term {
        Term::Int(v)
    }

    pub fn var(id: u32) -> Term {
        Term::Var(VarId(id))
    }

    /// Builds `functor(args..)`; an empty argument list yields the atom.
    pub fn compound(functor: Atom, args: Vec<Term>) -> Term {
        if args.is_empty() {
            return Term::Atom(functor);
        }
        let ground = args.iter().all(Term::is_ground);
        Term::Compound(Arc::new(Compound { functor, args: args.into_boxed_slice(), ground }))
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::compound(Atom::new(name), args)
    }

    pub fn nil() -> Term {
        Term::Atom(atoms::NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::compound(atoms::DOT, vec![head, tail])
    }

    pub fn list_with_tail<I>(items: I, tail: Term) -> Term
    where
        I: IntoIterator<Item = Term>,
        I::IntoIter: DoubleEndedIterator,
    {
        items.into_iter().rev().fold(tail, |acc, t| Term::cons(t, acc))
    }

    pub fn list<I>(items: I) -> Term
    where
        I: IntoIterator<Item = Term>,
        I::IntoIter: DoubleEndedIterator,
    {
        Term::list_with_tail(items, Term::nil())
    }

    /// `(a, b)` pair as used for grid coordinates.
    pub fn pair(a: Term, b: Term) -> Term {
        Term::compound(atoms::COMMA, vec![a, b])
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) | Term::Atom(_) => true,
            Term::Compound(c) => c.ground,
        }
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Term::Atom(_) | Term::Compound(_))
    }

    /// Name and arity of a callable term.
    pub fn key(&self) -> Option<(Atom, usize)> {
        match self {
            Term::Atom(a) => Some((*a, 0)),
            Term::Compound(c) => Some((c.functor, c.args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(c) => &c.args,
            _ => &[],
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<Atom> {
        match self {
            Term::Atom(a) => Some(*a),
            _ => None,
        }
    }

    pub fn is_functor(&self, name: Atom, arity: usize) -> bool {
        self.key() == Some((name, arity))
    }

    /// Elements of a proper list, or `None` for partial and improper lists.
    pub fn list_items(&self) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Atom(a) if *a == atoms::NIL => return Some(out),
                Term::Compound(c) if c.functor == atoms::DOT && c.args.len() == 2 => {
                    out.push(c.args[0].clone());
                    cur = &c.args[1];
                }
                _ => return None,
            }
        }
    }

    /// Variables in depth-first, left-to-right order of first occurrence.
    pub fn variables(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                Term::Var(v) => {
                    if !out.contains(v) {
                        out.push(*v);
                    }
                }
                Term::Compound(c) if !c.ground => stack.extend(c.args.iter().rev()),
                _ => {}
            }
        }
        out
    }

    /// Rebuilds the term with every variable replaced by `f(var)`.
    pub fn map_vars(&self, f: &mut impl FnMut(VarId) -> Term) -> Term {
        match self {
            Term::Var(v) => f(*v),
            Term::Compound(c) if !c.ground => {
                // walk list spines iteratively to keep recursion shallow on long lists
                if c.functor == atoms::DOT && c.args.len() == 2 {
                    let mut heads = Vec::new();
                    let mut cur = self;
                    while let Term::Compound(cc) = cur {
                        if cc.functor != atoms::DOT || cc.args.len() != 2 || cc.ground {
                            break;
                        }
                        heads.push(cc.args[0].map_vars(f));
                        cur = &cc.args[1];
                    }
                    let tail = cur.map_vars(f);
                    return Term::list_with_tail(heads, tail);
                }
                Term::compound(c.functor, c.args.iter().map(|a| a.map_vars(f)).collect())
            }
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::write::term_to_string(self))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::write::term_to_string(self))
    }
}
