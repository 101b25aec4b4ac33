//! writeq-style term output with optional depth and list elision.

use crate::ops;
use crate::term::{atoms, Atom, Term, VarId};

#[derive(Debug, Clone)]
pub struct WriteOptions {
    /// Compound nesting beyond this depth prints as `…`.
    pub max_depth: Option<usize>,
    /// Lists longer than this print their first items then `…(+N)`.
    pub max_list: Option<usize>,
    /// Variable names indexed by `VarId`; others print as `_N`.
    pub var_names: Vec<String>,
}

impl WriteOptions {
    pub fn plain() -> Self {
        WriteOptions { max_depth: None, max_list: None, var_names: Vec::new() }
    }

    /// Bounded output for error messages.
    pub fn compact() -> Self {
        WriteOptions { max_depth: Some(6), max_list: Some(12), var_names: Vec::new() }
    }
}

pub fn term_to_string(t: &Term) -> String {
    term_to_string_with(t, &WriteOptions::plain())
}

pub fn term_to_string_with(t: &Term, opts: &WriteOptions) -> String {
    let mut w = Writer { out: String::new(), opts };
    w.term(t, 1200, 0);
    w.out
}

pub fn var_name(v: VarId) -> String {
    format!("_G{}", v.0)
}

/// Atom text as it must appear in source, quoted when necessary.
pub fn atom_text(a: Atom) -> String {
    let name = a.name();
    if atom_needs_quotes(name) {
        quote(name)
    } else {
        name.to_string()
    }
}

fn atom_needs_quotes(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else { return true };
    if matches!(name, "[]" | "{}" | "!" | ";") {
        return false;
    }
    if first.is_lowercase() {
        return !name.chars().all(|c| c.is_alphanumeric() || c == '_');
    }
    if name.chars().all(|c| "+-*/\\^<>=~:.?@#&$".contains(c)) {
        // a lone dot ends a clause and `/*` opens a comment
        return name == "." || name.starts_with("/*");
    }
    true
}

fn quote(name: &str) -> String {
    let mut s = String::from("'");
    for c in name.chars() {
        match c {
            '\'' => s.push_str("\\'"),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\t' => s.push_str("\\t"),
            c if c.is_control() => s.push_str(&format!("\\x{:x}\\", c as u32)),
            c => s.push(c),
        }
    }
    s.push('\'');
    s
}

struct Writer<'o> {
    out: String,
    opts: &'o WriteOptions,
}

fn is_symbolic(c: char) -> bool {
    "+-*/\\^<>=~:.?@#&$".contains(c)
}

impl Writer<'_> {
    fn atom(&mut self, a: Atom, as_operand: bool) {
        let text = atom_text(a);
        if as_operand && ops::is_op(a.name()) && !matches!(a.name(), "[]" | "{}") {
            self.out.push('(');
            self.out.push_str(&text);
            self.out.push(')');
        } else {
            self.out.push_str(&text);
        }
    }

    fn var(&mut self, v: VarId) {
        match self.opts.var_names.get(v.0 as usize) {
            Some(n) if n != "_" => self.out.push_str(n),
            _ => self.out.push_str(&var_name(v)),
        }
    }

    fn too_deep(&mut self, depth: usize) -> bool {
        if self.opts.max_depth.is_some_and(|m| depth >= m) {
            self.out.push('…');
            true
        } else {
            false
        }
    }

    /// Writes `t` in a context accepting priority `max`.
    fn term(&mut self, t: &Term, max: u32, depth: usize) {
        match t {
            Term::Var(v) => self.var(*v),
            Term::Int(i) => self.out.push_str(&i.to_string()),
            Term::Atom(a) => self.atom(*a, false),
            Term::Compound(c) => {
                if self.too_deep(depth) {
                    return;
                }
                let f = c.functor();
                let args = c.args();
                if f == atoms::DOT && args.len() == 2 {
                    return self.list(t, depth);
                }
                if f == atoms::CURLY && args.len() == 1 {
                    self.out.push('{');
                    self.term(&args[0], 1200, depth + 1);
                    self.out.push('}');
                    return;
                }
                if args.len() == 2 {
                    if let Some(op) = ops::infix(f.name()) {
                        return self.infix(f, op, &args[0], &args[1], max, depth);
                    }
                }
                if args.len() == 1 {
                    if let Some(op) = ops::prefix(f.name()) {
                        if f != atoms::MINUS && f != atoms::PLUS || !matches!(args[0], Term::Int(_)) {
                            return self.prefix(f, op, &args[0], max, depth);
                        }
                    }
                }
                self.canonical(f, args, depth);
            }
        }
    }

    fn canonical(&mut self, f: Atom, args: &[Term], depth: usize) {
        let name = f.name();
        if name == "[]" || name == "{}" {
            self.out.push_str(&quote(name));
        } else {
            self.out.push_str(&atom_text(f));
        }
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push(',');
            }
            self.term(a, 999, depth + 1);
        }
        self.out.push(')');
    }

    fn infix(&mut self, f: Atom, op: ops::OpDef, l: &Term, r: &Term, max: u32, depth: usize) {
        let (lmax, rmax) = op.arg_max();
        let paren = op.priority > max;
        if paren {
            self.out.push('(');
        }
        self.operand(l, lmax, depth + 1);
        let name = f.name();
        let mut right = String::new();
        std::mem::swap(&mut right, &mut self.out);
        self.operand(r, rmax, depth + 1);
        std::mem::swap(&mut right, &mut self.out);
        match name {
            "," => self.out.push(','),
            ":" if !right.starts_with(is_symbolic) => self.out.push(':'),
            _ => {
                self.out.push(' ');
                self.out.push_str(&atom_text(f));
                self.out.push(' ');
            }
        }
        self.out.push_str(&right);
        if paren {
            self.out.push(')');
        }
    }

    fn prefix(&mut self, f: Atom, op: ops::OpDef, arg: &Term, max: u32, depth: usize) {
        let (_, amax) = op.arg_max();
        let paren = op.priority > max;
        if paren {
            self.out.push('(');
        }
        self.out.push_str(&atom_text(f));
        let mut inner = String::new();
        std::mem::swap(&mut inner, &mut self.out);
        self.operand(arg, amax, depth + 1);
        std::mem::swap(&mut inner, &mut self.out);
        let alpha = f.name().chars().next().is_some_and(char::is_alphanumeric);
        let first = inner.chars().next();
        let needs_space = alpha
            || first == Some('(')
            || first.is_some_and(is_symbolic)
            || (first.is_some_and(|c| c.is_ascii_digit()) && f == atoms::MINUS);
        if needs_space {
            self.out.push(' ');
        }
        self.out.push_str(&inner);
        if paren {
            self.out.push(')');
        }
    }

    fn operand(&mut self, t: &Term, max: u32, depth: usize) {
        match t {
            Term::Atom(a) => self.atom(*a, true),
            Term::Int(i) if *i < 0 && max < 200 => {
                // keep `- 1` and `(-1)^2` apart
                self.out.push('(');
                self.out.push_str(&i.to_string());
                self.out.push(')');
            }
            _ => {
                let prio = self.priority(t);
                if prio > max {
                    self.out.push('(');
                    self.term(t, 1200, depth);
                    self.out.push(')');
                } else {
                    self.term(t, max, depth);
                }
            }
        }
    }

    fn priority(&self, t: &Term) -> u32 {
        let Term::Compound(c) = t else { return 0 };
        let (f, n) = (c.functor(), c.arity());
        if f == atoms::DOT && n == 2 || f == atoms::CURLY && n == 1 {
            return 0;
        }
        if n == 2 {
            if let Some(op) = ops::infix(f.name()) {
                return op.priority;
            }
        }
        if n == 1 {
            if let Some(op) = ops::prefix(f.name()) {
                if (f == atoms::MINUS || f == atoms::PLUS) && matches!(c.args()[0], Term::Int(_)) {
                    return 0;
                }
                return op.priority;
            }
        }
        0
    }

    fn list(&mut self, t: &Term, depth: usize) {
        self.out.push('[');
        let mut cur = t;
        let mut n = 0usize;
        loop {
            match cur {
                Term::Compound(c) if c.functor() == atoms::DOT && c.arity() == 2 => {
                    if let Some(m) = self.opts.max_list {
                        if n == m {
                            let rest = count_items(cur);
                            self.out.push_str(&format!(",…(+{rest})"));
                            break;
                        }
                    }
                    if n > 0 {
                        self.out.push(',');
                    }
                    self.term(&c.args()[0], 999, depth + 1);
                    n += 1;
                    cur = &c.args()[1];
                }
                Term::Atom(a) if *a == atoms::NIL => break,
                other => {
                    self.out.push('|');
                    self.term(other, 999, depth + 1);
                    break;
                }
            }
        }
        self.out.push(']');
    }
}

fn count_items(mut t: &Term) -> usize {
    let mut n = 0;
    while let Term::Compound(c) = t {
        if c.functor() != atoms::DOT || c.arity() != 2 {
            break;
        }
        n += 1;
        t = &c.args()[1];
    }
    n
}

/// A clause term as source text ending in `.`.
pub fn clause_to_string(t: &Term, var_names: &[String]) -> String {
    let opts = WriteOptions { max_depth: None, max_list: None, var_names: var_names.to_vec() };
    let mut s = term_to_string_with(t, &opts);
    if s.chars().last().is_some_and(is_symbolic) {
        s.push(' ');
    }
    s.push('.');
    s
}
