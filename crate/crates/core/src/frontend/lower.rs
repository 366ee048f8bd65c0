//! Cast insertion: every place where a subexpression's type differs from the
//! type its context expects becomes an explicit `Cast` node. Reference
//! operations are lowered to the proxied or monotonic forms.

use std::rc::Rc;

use super::ir::{Expr, Lambda, Program, TopItem};
use super::sexpr::Span;
use super::typecheck::{prim_signature, TExpr, TItem, TKind, TypedProgram};
use crate::coercion::{CoercionPool, Label};
use crate::types::{RefMode, Type, TypeId, TypeTable};

struct Lowerer<'a> {
    types: TypeTable,
    mode: RefMode,
    file: &'a str,
}

impl Lowerer<'_> {
    fn label(&self, span: Span, tag: &str) -> Label {
        Rc::from(format!("{}:{}:{} ({tag})", self.file, span.line, span.col))
    }

    /// Lowers `e` and casts it to `to` if its type differs.
    fn to(&mut self, e: &TExpr, to: TypeId, tag: &str) -> Expr {
        let label = self.label(e.span, tag);
        let from = e.ty;
        let expr = self.lower(e);
        cast(expr, from, to, label)
    }

    fn all(&mut self, es: &[TExpr]) -> Vec<Expr> {
        es.iter().map(|e| self.lower(e)).collect()
    }

    /// Reference operand cast to a box or vector type when it is `Dyn`.
    /// Returns the lowered operand and its element type.
    fn reference(&mut self, r: &TExpr, vector: bool) -> (Expr, TypeId) {
        match self.types.get(r.ty) {
            Type::Dyn => {
                let target = if vector {
                    self.types.vector(self.mode, TypeId::DYN)
                } else {
                    self.types.reference(self.mode, TypeId::DYN)
                };
                (self.to(r, target, "reference"), TypeId::DYN)
            }
            t => {
                let elem = t.elem().expect("typechecked reference");
                (self.lower(r), elem)
            }
        }
    }

    fn mono(&self) -> bool {
        self.mode == RefMode::Monotonic
    }

    fn lower(&mut self, e: &TExpr) -> Expr {
        let b = Box::new;
        match &e.kind {
            TKind::Lit(l) => Expr::Lit(*l),
            TKind::Local(d, i) => Expr::Local(*d, *i),
            TKind::Global(g) => Expr::Global(*g),
            TKind::Lambda { params, ret, body, name } => {
                let body = self.to(body, *ret, "return");
                Expr::Lambda(Rc::new(Lambda { arity: params.len(), body, name: name.clone() }))
            }
            TKind::App(f, args) => match self.types.get(f.ty).clone() {
                Type::Fun(ps, _) => {
                    let f = self.lower(f);
                    let args = args.iter().zip(&ps).map(|(a, p)| self.to(a, *p, "argument")).collect();
                    Expr::App(b(f), args)
                }
                _ => {
                    let target = self.types.fun(vec![TypeId::DYN; args.len()], TypeId::DYN);
                    let f = self.to(f, target, "operator");
                    let args = args.iter().map(|a| self.to(a, TypeId::DYN, "argument")).collect();
                    Expr::App(b(f), args)
                }
            },
            TKind::Let(bs, body) => {
                let bs = bs.iter().map(|(t, v)| self.to(v, *t, "binding")).collect();
                Expr::Let(bs, b(self.lower(body)))
            }
            TKind::If(c, t, f) => Expr::If(
                b(self.to(c, TypeId::BOOL, "condition")),
                b(self.to(t, e.ty, "branch")),
                b(self.to(f, e.ty, "branch")),
            ),
            TKind::Begin(es) => {
                let mut es = self.all(es);
                let last = es.pop().expect("non-empty begin");
                Expr::Begin(es, b(last))
            }
            TKind::While(c, body) => Expr::While(b(self.to(c, TypeId::BOOL, "condition")), b(self.lower(body))),
            TKind::Repeat(from, to, body) => Expr::Repeat(
                b(self.to(from, TypeId::INT, "bound")),
                b(self.to(to, TypeId::INT, "bound")),
                b(self.lower(body)),
            ),
            TKind::Prim(p, args) => {
                let (ps, _) = prim_signature(*p);
                let args = args.iter().zip(ps).map(|(a, t)| self.to(a, *t, "operand")).collect();
                Expr::Prim(*p, args)
            }
            TKind::DynEq(x, y) => {
                let label = self.label(e.span, "comparison");
                Expr::DynEq(b(self.to(x, TypeId::DYN, "operand")), b(self.to(y, TypeId::DYN, "operand")), label)
            }
            TKind::Tuple(es) => Expr::Tuple(self.all(es)),
            TKind::Proj(t, i) => {
                if t.ty == TypeId::DYN {
                    let label = self.label(e.span, "projection");
                    Expr::DynTupleProj(b(self.lower(t)), *i, label)
                } else {
                    Expr::TupleProj(b(self.lower(t)), *i)
                }
            }
            TKind::Ascribe(inner) => {
                let label = self.label(e.span, "ascription");
                let from = inner.ty;
                let inner = self.lower(inner);
                cast(inner, from, e.ty, label)
            }
            TKind::MkBox(v) => {
                let elem = v.ty;
                let v = self.lower(v);
                if self.mono() {
                    Expr::MkBoxM(b(v), elem)
                } else {
                    Expr::MkBoxP(b(v))
                }
            }
            TKind::Unbox(r) => {
                let (r, elem) = self.reference(r, false);
                if !self.mono() {
                    Expr::UnboxP(b(r))
                } else if self.types.is_static(elem) {
                    Expr::UnboxM(b(r))
                } else {
                    Expr::UnboxTM(b(r), elem, self.label(e.span, "read"))
                }
            }
            TKind::SetBox(r, v) => {
                let (r, elem) = self.reference(r, false);
                let v = self.to(v, elem, "write");
                if !self.mono() {
                    Expr::SetBoxP(b(r), b(v))
                } else if self.types.is_static(elem) {
                    Expr::SetBoxM(b(r), b(v))
                } else {
                    Expr::SetBoxTM(b(r), b(v), elem, self.label(e.span, "write"))
                }
            }
            TKind::MkVect(n, v) => {
                let n = self.to(n, TypeId::INT, "size");
                let elem = v.ty;
                let v = self.lower(v);
                if self.mono() {
                    Expr::MkVectM(b(n), b(v), elem)
                } else {
                    Expr::MkVectP(b(n), b(v))
                }
            }
            TKind::VectRef(r, i) => {
                let (r, elem) = self.reference(r, true);
                let i = self.to(i, TypeId::INT, "index");
                if !self.mono() {
                    Expr::VectRefP(b(r), b(i))
                } else if self.types.is_static(elem) {
                    Expr::VectRefM(b(r), b(i))
                } else {
                    Expr::VectRefTM(b(r), b(i), elem, self.label(e.span, "read"))
                }
            }
            TKind::VectSet(r, i, v) => {
                let (r, elem) = self.reference(r, true);
                let i = self.to(i, TypeId::INT, "index");
                let v = self.to(v, elem, "write");
                if !self.mono() {
                    Expr::VectSetP(b(r), b(i), b(v))
                } else if self.types.is_static(elem) {
                    Expr::VectSetM(b(r), b(i), b(v))
                } else {
                    Expr::VectSetTM(b(r), b(i), b(v), elem, self.label(e.span, "write"))
                }
            }
            TKind::VectLen(r) => {
                let (r, _) = self.reference(r, true);
                Expr::VectLen(b(r))
            }
        }
    }
}

fn cast(expr: Expr, src: TypeId, tgt: TypeId, label: Label) -> Expr {
    if src == tgt {
        expr
    } else {
        Expr::Cast { expr: Box::new(expr), src, tgt, label }
    }
}

/// Makes every implicit conversion explicit. `file` prefixes blame labels.
pub fn insert_casts(tp: &TypedProgram, file: &str) -> Program {
    let mut l = Lowerer { types: tp.types.clone(), mode: tp.ref_mode, file };
    let items = tp
        .items
        .iter()
        .map(|item| match item {
            TItem::Define(g, e) => {
                let declared = tp.globals[*g as usize].1;
                TopItem::Define(*g, l.to(e, declared, "definition"))
            }
            TItem::Expr(e) => TopItem::Expr(l.lower(e)),
        })
        .collect();
    Program {
        types: l.types,
        pool: CoercionPool::default(),
        global_names: tp.globals.iter().map(|(n, _)| n.clone()).collect(),
        items,
        ref_mode: tp.ref_mode,
        result_type: tp.result_type,
    }
}
