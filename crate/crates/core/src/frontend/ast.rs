//! Surface syntax tree. Every node keeps the span of its source text.

use std::fmt;

use super::sexpr::Span;
use crate::frontend::ir::Lit;
use crate::types::{BaseType, RefMode, Type, TypeId, TypeTable};

/// A type as written in the source, before interning.
#[derive(Clone, Debug, PartialEq)]
pub enum SType {
    Dyn,
    Base(BaseType),
    Fun(Vec<SType>, Box<SType>),
    Tuple(Vec<SType>),
    Ref(Box<SType>),
    Vect(Box<SType>),
}

impl SType {
    /// `(Ref T)` and `(Vect T)` become proxied or monotonic according to `mode`.
    pub fn intern(&self, types: &mut TypeTable, mode: RefMode) -> TypeId {
        match self {
            SType::Dyn => TypeId::DYN,
            SType::Base(b) => b.id(),
            SType::Fun(ps, r) => {
                let ps = ps.iter().map(|p| p.intern(types, mode)).collect();
                let r = r.intern(types, mode);
                types.fun(ps, r)
            }
            SType::Tuple(ts) => {
                let ts = ts.iter().map(|t| t.intern(types, mode)).collect();
                types.tuple(ts)
            }
            SType::Ref(t) => {
                let t = t.intern(types, mode);
                types.reference(mode, t)
            }
            SType::Vect(t) => {
                let t = t.intern(types, mode);
                types.vector(mode, t)
            }
        }
    }

    /// Inverse of [`SType::intern`].
    pub fn from_type(types: &TypeTable, t: TypeId) -> SType {
        match types.get(t) {
            Type::Dyn => SType::Dyn,
            Type::Base(b) => SType::Base(*b),
            Type::Fun(ps, r) => SType::Fun(
                ps.iter().map(|p| SType::from_type(types, *p)).collect(),
                Box::new(SType::from_type(types, *r)),
            ),
            Type::Tuple(ts) => SType::Tuple(ts.iter().map(|t| SType::from_type(types, *t)).collect()),
            Type::RefP(e) | Type::RefM(e) => SType::Ref(Box::new(SType::from_type(types, *e))),
            Type::VectP(e) | Type::VectM(e) => SType::Vect(Box::new(SType::from_type(types, *e))),
        }
    }
}

impl fmt::Display for SType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, head: &str, ts: &[&SType]| {
            write!(f, "({head}")?;
            for t in ts {
                write!(f, " {t}")?;
            }
            write!(f, ")")
        };
        match self {
            SType::Dyn => write!(f, "Dyn"),
            SType::Base(b) => write!(f, "{}", b.name()),
            SType::Fun(ps, r) => {
                let mut ts: Vec<&SType> = ps.iter().collect();
                ts.push(r);
                list(f, "->", &ts)
            }
            SType::Tuple(ts) => list(f, "Tuple", &ts.iter().collect::<Vec<_>>()),
            SType::Ref(t) => list(f, "Ref", &[t]),
            SType::Vect(t) => list(f, "Vect", &[t]),
        }
    }
}

/// A type annotation and where its text sits in the source.
#[derive(Clone, Debug, PartialEq)]
pub struct Ann {
    pub ty: SType,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub ann: Option<Ann>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub name: String,
    pub ann: Option<Ann>,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Lit(Lit),
    Var(String),
    Lambda { params: Vec<Param>, ret: Option<Ann>, body: Box<Expr> },
    App(Box<Expr>, Vec<Expr>),
    Let(Vec<Binding>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Begin(Vec<Expr>),
    While(Box<Expr>, Box<Expr>),
    Repeat { var: String, from: Box<Expr>, to: Box<Expr>, body: Box<Expr> },
    /// Primitive operator by surface name.
    Op(String, Vec<Expr>),
    Tuple(Vec<Expr>),
    Proj(Box<Expr>, usize),
    Ascribe(Box<Expr>, Ann),
    MkBox(Box<Expr>),
    Unbox(Box<Expr>),
    SetBox(Box<Expr>, Box<Expr>),
    MkVect(Box<Expr>, Box<Expr>),
    VectRef(Box<Expr>, Box<Expr>),
    VectSet(Box<Expr>, Box<Expr>, Box<Expr>),
    VectLen(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    /// `fun_form` marks `(define (f ..) ..)`, whose missing return
    /// annotation means `Dyn` so recursive uses have a type up front.
    Define { name: String, ann: Option<Ann>, expr: Expr, span: Span, fun_form: bool },
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Module {
    pub items: Vec<Item>,
}

impl Module {
    /// Every annotation in source order.
    pub fn annotations(&self) -> Vec<&Ann> {
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                Item::Define { ann, expr, .. } => {
                    out.extend(ann.iter());
                    expr.collect_annotations(&mut out);
                }
                Item::Expr(e) => e.collect_annotations(&mut out),
            }
        }
        out.sort_by_key(|a| a.span.start);
        out
    }
}

impl Expr {
    fn collect_annotations<'a>(&'a self, out: &mut Vec<&'a Ann>) {
        match &self.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) => {}
            ExprKind::Lambda { params, ret, body } => {
                out.extend(params.iter().filter_map(|p| p.ann.as_ref()));
                out.extend(ret.iter());
                body.collect_annotations(out);
            }
            ExprKind::Let(bs, body) => {
                for b in bs {
                    out.extend(b.ann.iter());
                    b.expr.collect_annotations(out);
                }
                body.collect_annotations(out);
            }
            ExprKind::Ascribe(e, ann) => {
                e.collect_annotations(out);
                out.push(ann);
            }
            ExprKind::App(f, xs) => {
                f.collect_annotations(out);
                xs.iter().for_each(|x| x.collect_annotations(out));
            }
            ExprKind::Begin(xs) | ExprKind::Op(_, xs) | ExprKind::Tuple(xs) => {
                xs.iter().for_each(|x| x.collect_annotations(out))
            }
            ExprKind::If(a, b, c) | ExprKind::VectSet(a, b, c) => {
                a.collect_annotations(out);
                b.collect_annotations(out);
                c.collect_annotations(out);
            }
            ExprKind::Repeat { from, to, body, .. } => {
                from.collect_annotations(out);
                to.collect_annotations(out);
                body.collect_annotations(out);
            }
            ExprKind::While(a, b) | ExprKind::SetBox(a, b) | ExprKind::MkVect(a, b) | ExprKind::VectRef(a, b) => {
                a.collect_annotations(out);
                b.collect_annotations(out);
            }
            ExprKind::Proj(a, _) | ExprKind::MkBox(a) | ExprKind::Unbox(a) | ExprKind::VectLen(a) => {
                a.collect_annotations(out)
            }
        }
    }
}
