//! S-expression reader. `[..]` and `(..)` are interchangeable but must match,
//! `;` starts a line comment, and `:` always reads as its own atom so that
//! `[x:Int]` and `[x : Int]` mean the same thing.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Span {
    /// Byte offsets into the source, end exclusive.
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sexp {
    Atom(String, Span),
    List(Vec<Sexp>, Span),
}

impl Sexp {
    pub fn span(&self) -> Span {
        match self {
            Sexp::Atom(_, s) | Sexp::List(_, s) => *s,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a, _) => Some(a),
            Sexp::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(xs, _) => Some(xs),
            Sexp::Atom(..) => None,
        }
    }

    pub fn is_atom(&self, s: &str) -> bool {
        self.atom() == Some(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ReadError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl Reader<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn here(&self) -> Span {
        Span { start: self.pos, end: self.pos, line: self.line, col: self.col }
    }

    fn err(&self, span: Span, msg: impl Into<String>) -> ReadError {
        ReadError { line: span.line, col: span.col, msg: msg.into() }
    }

    fn read(&mut self) -> Result<Sexp, ReadError> {
        self.skip_trivia();
        let mut span = self.here();
        match self.peek() {
            None => Err(self.err(span, "unexpected end of input")),
            Some(open @ ('(' | '[')) => {
                self.bump();
                let close = if open == '(' { ')' } else { ']' };
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(self.err(span, format!("unclosed '{open}'"))),
                        Some(c) if c == close => {
                            self.bump();
                            break;
                        }
                        Some(c @ (')' | ']')) => {
                            return Err(self.err(self.here(), format!("'{c}' does not match '{open}'")));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
                span.end = self.pos;
                Ok(Sexp::List(items, span))
            }
            Some(c @ (')' | ']')) => Err(self.err(span, format!("unexpected '{c}'"))),
            Some(':') => {
                self.bump();
                span.end = self.pos;
                Ok(Sexp::Atom(":".into(), span))
            }
            Some(_) => {
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | ';' | ':') {
                        break;
                    }
                    self.bump();
                }
                span.end = self.pos;
                Ok(Sexp::Atom(self.src[span.start..span.end].to_string(), span))
            }
        }
    }
}

/// Reads every top-level form in `src`.
pub fn read_all(src: &str) -> Result<Vec<Sexp>, ReadError> {
    let mut r = Reader { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        r.skip_trivia();
        if r.peek().is_none() {
            return Ok(out);
        }
        out.push(r.read()?);
    }
}
