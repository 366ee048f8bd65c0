//! Surface grammar on top of the s-expression reader.

use super::ast::{Ann, Binding, Expr, ExprKind, Item, Module, Param, SType};
use super::sexpr::{read_all, Sexp, Span};
use crate::frontend::ir::Lit;
use crate::types::BaseType;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: syntax error: {msg}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

type PResult<T> = Result<T, SyntaxError>;

fn err<T>(span: Span, msg: impl Into<String>) -> PResult<T> {
    Err(SyntaxError { line: span.line, col: span.col, msg: msg.into() })
}

/// Operators with fixed arity, by surface name.
pub const OPERATORS: &[(&str, usize)] = &[
    ("+", 2),
    ("-", 2),
    ("*", 2),
    ("/", 2),
    ("%", 2),
    ("<", 2),
    (">", 2),
    ("<=", 2),
    (">=", 2),
    ("=", 2),
    ("+.", 2),
    ("-.", 2),
    ("*.", 2),
    ("/.", 2),
    ("<.", 2),
    (">.", 2),
    ("<=.", 2),
    (">=.", 2),
    ("=.", 2),
    ("not", 1),
    ("sqrt", 1),
    ("sin", 1),
    ("cos", 1),
    ("int->float", 1),
    ("float->int", 1),
    ("read-int", 0),
    ("read-float", 0),
];

const KEYWORDS: &[&str] = &[
    "lambda",
    "let",
    "define",
    "if",
    "begin",
    "while",
    "repeat",
    ":",
    "tuple",
    "tuple-proj",
    "box",
    "unbox",
    "set-box!",
    "make-vector",
    "vector-ref",
    "vector-set!",
    "vector-length",
    "and",
    "or",
];

pub fn parse_program(src: &str) -> PResult<Module> {
    let forms = read_all(src).map_err(|e| SyntaxError { line: e.line, col: e.col, msg: e.msg })?;
    let items = forms.iter().map(parse_item).collect::<PResult<_>>()?;
    Ok(Module { items })
}

pub fn parse_expr_text(src: &str) -> PResult<Expr> {
    let forms = read_all(src).map_err(|e| SyntaxError { line: e.line, col: e.col, msg: e.msg })?;
    match forms.as_slice() {
        [one] => parse_expr(one),
        _ => err(Span::default(), "expected exactly one expression"),
    }
}

fn parse_item(s: &Sexp) -> PResult<Item> {
    let Some(xs) = s.list() else { return Ok(Item::Expr(parse_expr(s)?)) };
    if !xs.first().is_some_and(|h| h.is_atom("define")) {
        return Ok(Item::Expr(parse_expr(s)?));
    }
    let span = s.span();
    match xs.get(1) {
        // (define (f params..) [: R] body..)
        Some(Sexp::List(head, hspan)) => {
            let Some((name, params)) = head.split_first() else { return err(*hspan, "empty function header") };
            let name = ident(name)?;
            let params = params.iter().map(parse_param).collect::<PResult<Vec<_>>>()?;
            let (ret, body) = return_ann(&xs[2..])?;
            let body = parse_body(body, span)?;
            let expr = Expr { kind: ExprKind::Lambda { params, ret, body: Box::new(body) }, span };
            Ok(Item::Define { name, ann: None, expr, span, fun_form: true })
        }
        // (define x [: T] e)
        Some(name @ Sexp::Atom(..)) => {
            let name = ident(name)?;
            match &xs[2..] {
                [e] => Ok(Item::Define { name, ann: None, expr: parse_expr(e)?, span, fun_form: false }),
                [colon, t, e] if colon.is_atom(":") => Ok(Item::Define {
                    name,
                    ann: Some(parse_ann(t)?),
                    expr: parse_expr(e)?,
                    span,
                    fun_form: false,
                }),
                _ => err(span, "malformed define"),
            }
        }
        None => err(span, "malformed define"),
    }
}

fn return_ann(rest: &[Sexp]) -> PResult<(Option<Ann>, &[Sexp])> {
    match rest {
        [colon, t, body @ ..] if colon.is_atom(":") => Ok((Some(parse_ann(t)?), body)),
        body => Ok((None, body)),
    }
}

fn ident(s: &Sexp) -> PResult<String> {
    match s.atom() {
        Some(a) if is_ident(a) => Ok(a.to_string()),
        _ => err(s.span(), "expected an identifier"),
    }
}

fn is_ident(a: &str) -> bool {
    !a.is_empty()
        && !a.starts_with('#')
        && a.parse::<i64>().is_err()
        && a.parse::<f64>().is_err()
        && !KEYWORDS.contains(&a)
        && !OPERATORS.iter().any(|(o, _)| *o == a)
}

fn parse_param(s: &Sexp) -> PResult<Param> {
    match s {
        Sexp::Atom(..) => Ok(Param { name: ident(s)?, ann: None, span: s.span() }),
        Sexp::List(xs, span) => match xs.as_slice() {
            [name, colon, t] if colon.is_atom(":") => {
                Ok(Param { name: ident(name)?, ann: Some(parse_ann(t)?), span: *span })
            }
            _ => err(*span, "expected a parameter `x` or `[x : T]`"),
        },
    }
}

fn parse_ann(s: &Sexp) -> PResult<Ann> {
    Ok(Ann { ty: parse_type(s)?, span: s.span() })
}

pub fn parse_type(s: &Sexp) -> PResult<SType> {
    match s {
        Sexp::Atom(a, span) => Ok(match a.as_str() {
            "Dyn" => SType::Dyn,
            "Int" => SType::Base(BaseType::Int),
            "Bool" => SType::Base(BaseType::Bool),
            "Float" => SType::Base(BaseType::Float),
            "Unit" => SType::Base(BaseType::Unit),
            _ => return err(*span, format!("unknown type `{a}`")),
        }),
        Sexp::List(xs, span) => {
            let is_arrow = |x: &Sexp| x.is_atom("->") || x.is_atom("=>");
            match xs.as_slice() {
                [h, ts @ .., r] if is_arrow(h) => Ok(SType::Fun(
                    ts.iter().map(parse_type).collect::<PResult<_>>()?,
                    Box::new(parse_type(r)?),
                )),
                [ts @ .., arrow, r] if is_arrow(arrow) => Ok(SType::Fun(
                    ts.iter().map(parse_type).collect::<PResult<_>>()?,
                    Box::new(parse_type(r)?),
                )),
                [h, ts @ ..] if h.is_atom("Tuple") => {
                    if ts.len() < 2 {
                        return err(*span, "Tuple needs at least two components");
                    }
                    Ok(SType::Tuple(ts.iter().map(parse_type).collect::<PResult<_>>()?))
                }
                [h, t] if h.is_atom("Ref") => Ok(SType::Ref(Box::new(parse_type(t)?))),
                [h, t] if h.is_atom("Vect") => Ok(SType::Vect(Box::new(parse_type(t)?))),
                _ => err(*span, "malformed type"),
            }
        }
    }
}

fn parse_body(xs: &[Sexp], span: Span) -> PResult<Expr> {
    match xs {
        [] => err(span, "empty body"),
        [one] => parse_expr(one),
        many => Ok(Expr {
            kind: ExprKind::Begin(many.iter().map(parse_expr).collect::<PResult<_>>()?),
            span,
        }),
    }
}

fn boxed(s: &Sexp) -> PResult<Box<Expr>> {
    parse_expr(s).map(Box::new)
}

fn literal(a: &str) -> Option<Lit> {
    match a {
        "#t" | "#true" => Some(Lit::Bool(true)),
        "#f" | "#false" => Some(Lit::Bool(false)),
        _ => {
            if let Ok(n) = a.parse::<i64>() {
                Some(Lit::Int(n))
            } else if a.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
                && a.chars().any(|c| c.is_ascii_digit())
            {
                a.parse::<f64>().ok().map(Lit::Float)
            } else {
                None
            }
        }
    }
}

pub fn parse_expr(s: &Sexp) -> PResult<Expr> {
    let span = s.span();
    let kind = match s {
        Sexp::Atom(a, _) => match literal(a) {
            Some(l) => ExprKind::Lit(l),
            None if is_ident(a) => ExprKind::Var(a.clone()),
            None if a.starts_with('#') => return err(span, format!("unknown literal `{a}`")),
            None => return err(span, format!("`{a}` cannot be used as an expression")),
        },
        Sexp::List(xs, _) if xs.is_empty() => ExprKind::Lit(Lit::Unit),
        Sexp::List(xs, _) => {
            let head = xs[0].atom().unwrap_or("");
            let args = &xs[1..];
            match (head, args) {
                ("lambda", [Sexp::List(ps, _), rest @ ..]) => {
                    let params = ps.iter().map(parse_param).collect::<PResult<_>>()?;
                    let (ret, body) = return_ann(rest)?;
                    ExprKind::Lambda { params, ret, body: Box::new(parse_body(body, span)?) }
                }
                ("lambda", _) => return err(span, "malformed lambda"),
                ("let", [Sexp::List(bs, _), body @ ..]) => {
                    let bs = bs.iter().map(parse_binding).collect::<PResult<_>>()?;
                    ExprKind::Let(bs, Box::new(parse_body(body, span)?))
                }
                ("let", _) => return err(span, "malformed let"),
                ("define", _) => return err(span, "define is only allowed at top level"),
                ("if", [c, t, e]) => ExprKind::If(boxed(c)?, boxed(t)?, boxed(e)?),
                ("if", _) => return err(span, "if takes a condition and two branches"),
                ("begin", body) if !body.is_empty() => {
                    ExprKind::Begin(body.iter().map(parse_expr).collect::<PResult<_>>()?)
                }
                ("while", [c, body @ ..]) if !body.is_empty() => {
                    ExprKind::While(boxed(c)?, Box::new(parse_body(body, span)?))
                }
                ("repeat", [Sexp::List(h, hspan), body @ ..]) if !body.is_empty() => match h.as_slice() {
                    [v, from, to] => ExprKind::Repeat {
                        var: ident(v)?,
                        from: boxed(from)?,
                        to: boxed(to)?,
                        body: Box::new(parse_body(body, span)?),
                    },
                    _ => return err(*hspan, "expected (repeat (i from to) body ..)"),
                },
                (":", [e, t]) => ExprKind::Ascribe(boxed(e)?, parse_ann(t)?),
                ("tuple", es) if es.len() >= 2 => ExprKind::Tuple(es.iter().map(parse_expr).collect::<PResult<_>>()?),
                ("tuple", _) => return err(span, "tuple needs at least two components"),
                ("tuple-proj", [e, Sexp::Atom(i, ispan)]) => match i.parse::<usize>() {
                    Ok(i) => ExprKind::Proj(boxed(e)?, i),
                    Err(_) => return err(*ispan, "tuple index must be a literal natural number"),
                },
                ("box", [e]) => ExprKind::MkBox(boxed(e)?),
                ("unbox", [e]) => ExprKind::Unbox(boxed(e)?),
                ("set-box!", [r, v]) => ExprKind::SetBox(boxed(r)?, boxed(v)?),
                ("make-vector", [n, v]) => ExprKind::MkVect(boxed(n)?, boxed(v)?),
                ("vector-ref", [r, i]) => ExprKind::VectRef(boxed(r)?, boxed(i)?),
                ("vector-set!", [r, i, v]) => ExprKind::VectSet(boxed(r)?, boxed(i)?, boxed(v)?),
                ("vector-length", [r]) => ExprKind::VectLen(boxed(r)?),
                ("and", [a, b]) => ExprKind::If(boxed(a)?, boxed(b)?, Box::new(lit(Lit::Bool(false), span))),
                ("or", [a, b]) => ExprKind::If(boxed(a)?, Box::new(lit(Lit::Bool(true), span)), boxed(b)?),
                _ if KEYWORDS.contains(&head) => return err(span, format!("malformed `{head}` form")),
                _ => match OPERATORS.iter().find(|(o, _)| *o == head) {
                    Some((op, arity)) => {
                        if args.len() != *arity {
                            return err(span, format!("`{op}` takes {arity} operand(s)"));
                        }
                        ExprKind::Op(op.to_string(), args.iter().map(parse_expr).collect::<PResult<_>>()?)
                    }
                    None => ExprKind::App(boxed(&xs[0])?, args.iter().map(parse_expr).collect::<PResult<_>>()?),
                },
            }
        }
    };
    Ok(Expr { kind, span })
}

fn lit(l: Lit, span: Span) -> Expr {
    Expr { kind: ExprKind::Lit(l), span }
}

fn parse_binding(s: &Sexp) -> PResult<Binding> {
    let span = s.span();
    match s.list() {
        Some([name, e]) => Ok(Binding { name: ident(name)?, ann: None, expr: parse_expr(e)?, span }),
        Some([name, colon, t, e]) if colon.is_atom(":") => Ok(Binding {
            name: ident(name)?,
            ann: Some(parse_ann(t)?),
            expr: parse_expr(e)?,
            span,
        }),
        _ => err(span, "expected a binding `[x e]` or `[x : T e]`"),
    }
}
