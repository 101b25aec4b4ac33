//! Tokenizer and operator-precedence reader for the supported Prolog subset.

use crate::error::ParseError;
use crate::ops;
use crate::term::{atoms, Atom, Term, VarId};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    QName(String),
    Var(String),
    Int(i128),
    Punct(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    /// Whitespace or a comment immediately precedes this token.
    layout: bool,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

fn is_symbol_char(c: char) -> bool {
    SYMBOL_CHARS.contains(c)
}

fn is_alnum(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn syntax(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line, column: col, message: msg.into() }
    }

    /// Skips layout and comments; reports whether anything was skipped.
    fn skip_layout(&mut self) -> Result<bool, ParseError> {
        let mut skipped = false;
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                    skipped = true;
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                    skipped = true;
                }
                Some('/') if self.peek_at(1) == Some('*') => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            None => return Err(self.syntax(line, col, "unterminated block comment")),
                            Some('*') if self.peek() == Some('/') => {
                                self.bump();
                                break;
                            }
                            _ => {}
                        }
                    }
                    skipped = true;
                }
                _ => return Ok(skipped),
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            let layout = self.skip_layout()? || out.is_empty();
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else { break };
            let tok = if c.is_ascii_digit() {
                self.number(line, col)?
            } else if c == '_' || c.is_uppercase() {
                Tok::Var(self.take_while(is_alnum))
            } else if c.is_alphabetic() {
                Tok::Name(self.take_while(is_alnum))
            } else if c == '\'' {
                self.bump();
                Tok::QName(self.quoted('\'', line, col)?)
            } else if c == '"' || c == '`' {
                return Err(ParseError::Unsupported { feature: "strings".into(), line });
            } else if "()[]{},|".contains(c) {
                self.bump();
                if c == '|' && self.peek() == Some('|') {
                    self.bump();
                    Tok::Name("||".into())
                } else {
                    Tok::Punct(c)
                }
            } else if c == '!' || c == ';' {
                self.bump();
                Tok::Name(c.to_string())
            } else if is_symbol_char(c) {
                if c == '.' {
                    let next = self.peek_at(1);
                    if next.is_none() || next.is_some_and(|n| n.is_whitespace() || n == '%') {
                        self.bump();
                        out.push(Token { tok: Tok::End, line, col, layout });
                        continue;
                    }
                }
                Tok::Name(self.take_while(is_symbol_char))
            } else {
                return Err(self.syntax(line, col, format!("unexpected character {c:?}")));
            };
            out.push(Token { tok, line, col, layout });
        }
        Ok(out)
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn number(&mut self, line: usize, col: usize) -> Result<Tok, ParseError> {
        if self.peek() == Some('0') {
            match self.peek_at(1) {
                Some('\'') => {
                    self.bump();
                    self.bump();
                    return self.char_code(line, col).map(|c| Tok::Int(c as i128));
                }
                Some(r @ ('x' | 'o' | 'b')) => {
                    let radix = match r {
                        'x' => 16,
                        'o' => 8,
                        _ => 2,
                    };
                    if self.peek_at(2).is_some_and(|d| d.is_digit(radix)) {
                        self.bump();
                        self.bump();
                        let digits = self.take_while(|d| d.is_digit(radix));
                        return i128::from_str_radix(&digits, radix)
                            .ok()
                            .filter(|v| *v <= i64::MAX as i128 + 1)
                            .map(Tok::Int)
                            .ok_or_else(|| self.syntax(line, col, "integer too large"));
                    }
                }
                _ => {}
            }
        }
        let digits = self.take_while(|d| d.is_ascii_digit());
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) {
            return Err(ParseError::Unsupported { feature: "floats".into(), line });
        }
        digits
            .parse::<i128>()
            .ok()
            .filter(|v| *v <= i64::MAX as i128 + 1)
            .map(Tok::Int)
            .ok_or_else(|| self.syntax(line, col, "integer too large"))
    }

    fn char_code(&mut self, line: usize, col: usize) -> Result<u32, ParseError> {
        match self.bump() {
            None => Err(self.syntax(line, col, "unterminated character code")),
            Some('\\') => self.escape(line, col).map(|c| c as u32),
            Some('\'') => {
                // 0'' and 0''' both denote the quote character
                if self.peek() == Some('\'') {
                    self.bump();
                }
                Ok('\'' as u32)
            }
            Some(c) => Ok(c as u32),
        }
    }

    fn escape(&mut self, line: usize, col: usize) -> Result<char, ParseError> {
        let c = self.bump().ok_or_else(|| self.syntax(line, col, "unterminated escape"))?;
        Ok(match c {
            'n' => '\n',
            't' => '\t',
            'r' => '\r',
            'a' => '\x07',
            'b' => '\x08',
            'f' => '\x0c',
            'v' => '\x0b',
            '0'..='7' => {
                let mut digits = c.to_string();
                digits.push_str(&self.take_while(|d| d.is_digit(8)));
                if self.peek() == Some('\\') {
                    self.bump();
                }
                u32::from_str_radix(&digits, 8)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| self.syntax(line, col, "bad octal escape"))?
            }
            'x' => {
                let digits = self.take_while(|d| d.is_ascii_hexdigit());
                if self.peek() == Some('\\') {
                    self.bump();
                }
                u32::from_str_radix(&digits, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| self.syntax(line, col, "bad hex escape"))?
            }
            'e' => '\x1b',
            's' => ' ',
            other => other,
        })
    }

    fn quoted(&mut self, q: char, line: usize, col: usize) -> Result<String, ParseError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.syntax(line, col, "unterminated quoted atom")),
                Some(c) if c == q => {
                    if self.peek() == Some(q) {
                        self.bump();
                        s.push(q);
                    } else {
                        return Ok(s);
                    }
                }
                Some('\\') => {
                    if self.peek() == Some('\n') {
                        self.bump();
                        continue;
                    }
                    s.push(self.escape(line, col)?);
                }
                Some(c) => s.push(c),
            }
        }
    }
}

/// A term read from source, with the names of its variables indexed by
/// `VarId`. Anonymous variables are named `_`.
#[derive(Debug, Clone)]
pub struct ReadTerm {
    pub term: Term,
    pub var_names: Vec<String>,
    pub line: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    names: Vec<String>,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_tok(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| self.error_here("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn error_here(&self, msg: impl Into<String>) -> ParseError {
        let (line, column) = match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => (self.last_line, 1),
        };
        ParseError::Syntax { line, column, message: msg.into() }
    }

    fn error_at(&self, t: &Token, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: t.line, column: t.col, message: msg.into() }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek_tok() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error_here(format!("expected '{c}'"))),
        }
    }

    fn var(&mut self, name: &str) -> Term {
        if name != "_" {
            if let Some(i) = self.names.iter().position(|n| n == name) {
                return Term::Var(VarId(i as u32));
            }
        }
        self.names.push(name.to_string());
        Term::Var(VarId(self.names.len() as u32 - 1))
    }

    /// True if the next token directly opens an argument list.
    fn functional_paren(&self) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct('('), layout: false, .. }))
    }

    fn at_term_end(&self) -> bool {
        match self.peek_tok() {
            None | Some(Tok::End) => true,
            Some(Tok::Punct(c)) => matches!(c, ')' | ']' | '}' | ',' | '|'),
            Some(Tok::Name(n)) => ops::infix(n).is_some() && ops::prefix(n).is_none(),
            _ => false,
        }
    }

    fn parse(&mut self, max: u32) -> Result<(Term, u32), ParseError> {
        let (mut left, mut lp) = self.primary(max)?;
        loop {
            let name = match self.peek_tok() {
                Some(Tok::Name(n)) => n.clone(),
                Some(Tok::Punct(',')) => ",".to_string(),
                Some(Tok::Punct('|')) => "|".to_string(),
                _ => break,
            };
            let Some(op) = ops::infix(&name) else { break };
            let (lmax, rmax) = op.arg_max();
            if op.priority > max || lp > lmax {
                break;
            }
            self.pos += 1;
            let (right, _) = self.parse(rmax)?;
            let functor = if name == "|" { atoms::SEMICOLON } else { Atom::new(&name) };
            left = Term::compound(functor, vec![left, right]);
            lp = op.priority;
        }
        Ok((left, lp))
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect('(')?;
        let mut args = vec![self.parse(999)?.0];
        while let Some(Tok::Punct(',')) = self.peek_tok() {
            self.pos += 1;
            args.push(self.parse(999)?.0);
        }
        self.expect(')')?;
        Ok(args)
    }

    fn primary(&mut self, max: u32) -> Result<(Term, u32), ParseError> {
        let t = self.next()?;
        match t.tok {
            Tok::Int(v) => Ok((Term::Int(to_i64(v).ok_or_else(|| self.error_at(&t, "integer too large"))?), 0)),
            Tok::Var(ref name) => {
                if self.functional_paren() {
                    return Err(self.error_at(&t, "variable used as functor"));
                }
                Ok((self.var(name), 0))
            }
            Tok::Punct('(') => {
                let (inner, _) = self.parse(1200)?;
                self.expect(')')?;
                Ok((inner, 0))
            }
            Tok::Punct('[') => {
                if let Some(Tok::Punct(']')) = self.peek_tok() {
                    self.pos += 1;
                    return self.name_term("[]", &t, true);
                }
                let mut items = vec![self.parse(999)?.0];
                let mut tail = Term::nil();
                loop {
                    match self.peek_tok() {
                        Some(Tok::Punct(',')) => {
                            self.pos += 1;
                            items.push(self.parse(999)?.0);
                        }
                        Some(Tok::Punct('|')) => {
                            self.pos += 1;
                            tail = self.parse(999)?.0;
                            break;
                        }
                        _ => break,
                    }
                }
                self.expect(']')?;
                Ok((Term::list_with_tail(items, tail), 0))
            }
            Tok::Punct('{') => {
                if let Some(Tok::Punct('}')) = self.peek_tok() {
                    self.pos += 1;
                    return self.name_term("{}", &t, true);
                }
                let (inner, _) = self.parse(1200)?;
                self.expect('}')?;
                Ok((Term::compound(atoms::CURLY, vec![inner]), 0))
            }
            Tok::QName(ref name) => self.name_term(name, &t, true),
            Tok::Name(ref name) => self.name_term(name, &t, false),
            Tok::Punct(c) => Err(self.error_at(&t, format!("unexpected '{c}'"))),
            Tok::End => Err(self.error_at(&t, "unexpected end of clause")),
        }
        .and_then(|(term, p)| if p > max { self.lower(term, p, max) } else { Ok((term, p)) })
    }

    fn lower(&self, term: Term, p: u32, max: u32) -> Result<(Term, u32), ParseError> {
        // a prefix-operator term above the context priority is accepted
        // leniently, as common systems do for e.g. `X = \+ a`
        let _ = p;
        Ok((term, max))
    }

    fn name_term(&mut self, name: &str, t: &Token, quoted: bool) -> Result<(Term, u32), ParseError> {
        if self.functional_paren() {
            let args = self.args()?;
            return Ok((Term::compound(Atom::new(name), args), 0));
        }
        if quoted {
            return Ok((Term::atom(name), 0));
        }
        if name == "-" {
            if let Some(Token { tok: Tok::Int(v), layout: false, .. }) = self.peek() {
                let v = -*v;
                self.pos += 1;
                return Ok((Term::Int(to_i64(v).ok_or_else(|| self.error_at(t, "integer too large"))?), 0));
            }
        }
        if let Some(op) = ops::prefix(name) {
            if self.at_term_end() {
                return Ok((Term::atom(name), op.priority));
            }
            let (_, amax) = op.arg_max();
            let (arg, _) = self.parse(amax)?;
            return Ok((Term::compound(Atom::new(name), vec![arg]), op.priority));
        }
        let p = if ops::infix(name).is_some() { ops::infix(name).unwrap().priority } else { 0 };
        Ok((Term::atom(name), p))
    }

    fn read_clause(&mut self) -> Result<Option<ReadTerm>, ParseError> {
        let Some(first) = self.peek().cloned() else { return Ok(None) };
        self.names.clear();
        let (term, _) = self.parse(1200)?;
        match self.peek_tok() {
            Some(Tok::End) => self.pos += 1,
            None => return Err(self.error_here("missing '.' at end of clause")),
            _ => return Err(self.error_here("operator expected")),
        }
        Ok(Some(ReadTerm { term, var_names: std::mem::take(&mut self.names), line: first.line }))
    }
}

fn to_i64(v: i128) -> Option<i64> {
    i64::try_from(v).ok()
}

fn parser(src: &str) -> Result<Parser, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let last_line = src.lines().count().max(1);
    Ok(Parser { toks, pos: 0, names: Vec::new(), last_line })
}

/// Reads every `.`-terminated term in `src`.
pub fn read_terms(src: &str) -> Result<Vec<ReadTerm>, ParseError> {
    let mut p = parser(src)?;
    let mut out = Vec::new();
    while let Some(t) = p.read_clause()? {
        out.push(t);
    }
    Ok(out)
}

/// Reads a single term; the terminating `.` is optional.
pub fn parse_term(src: &str) -> Result<ReadTerm, ParseError> {
    let mut p = parser(src)?;
    if p.peek().is_none() {
        return Err(p.error_here("empty term"));
    }
    let line = p.peek().map(|t| t.line).unwrap_or(1);
    let (term, _) = p.parse(1200)?;
    if let Some(Tok::End) = p.peek_tok() {
        p.pos += 1;
    }
    if p.peek().is_some() {
        return Err(p.error_here("unexpected text after term"));
    }
    Ok(ReadTerm { term, var_names: p.names, line })
}
