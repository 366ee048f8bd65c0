//! Gradual typechecking. Produces a tree where every node has a type and
//! variables are resolved; cast insertion reads the expected types off it.

use std::collections::HashMap;

use super::ast::{Expr, ExprKind, Item, Module};
use super::sexpr::Span;
use crate::frontend::ir::{Lit, Prim};
use crate::types::{BaseType, RefMode, Type, TypeId, TypeTable};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: type error: {msg}")]
pub struct TypeError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

#[derive(Clone, Debug)]
pub struct TExpr {
    pub kind: TKind,
    pub ty: TypeId,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum TKind {
    Lit(Lit),
    Local(u32, u32),
    Global(u32),
    Lambda { params: Vec<TypeId>, ret: TypeId, body: Box<TExpr>, name: Option<String> },
    App(Box<TExpr>, Vec<TExpr>),
    /// Declared type of each binding.
    Let(Vec<(TypeId, TExpr)>, Box<TExpr>),
    If(Box<TExpr>, Box<TExpr>, Box<TExpr>),
    Begin(Vec<TExpr>),
    While(Box<TExpr>, Box<TExpr>),
    Repeat(Box<TExpr>, Box<TExpr>, Box<TExpr>),
    Prim(Prim, Vec<TExpr>),
    DynEq(Box<TExpr>, Box<TExpr>),
    Tuple(Vec<TExpr>),
    Proj(Box<TExpr>, usize),
    Ascribe(Box<TExpr>),
    MkBox(Box<TExpr>),
    Unbox(Box<TExpr>),
    SetBox(Box<TExpr>, Box<TExpr>),
    MkVect(Box<TExpr>, Box<TExpr>),
    VectRef(Box<TExpr>, Box<TExpr>),
    VectSet(Box<TExpr>, Box<TExpr>, Box<TExpr>),
    VectLen(Box<TExpr>),
}

#[derive(Clone, Debug)]
pub enum TItem {
    Define(u32, TExpr),
    Expr(TExpr),
}

#[derive(Clone, Debug)]
pub struct TypedProgram {
    pub types: TypeTable,
    pub ref_mode: RefMode,
    /// Name and declared type of each global.
    pub globals: Vec<(String, TypeId)>,
    pub items: Vec<TItem>,
    pub result_type: TypeId,
}

/// Operand types and result type of a fixed primitive.
pub fn prim_signature(p: Prim) -> (&'static [TypeId], TypeId) {
    use Prim::*;
    const I: TypeId = TypeId::INT;
    const F: TypeId = TypeId::FLOAT;
    const B: TypeId = TypeId::BOOL;
    const U: TypeId = TypeId::UNIT;
    match p {
        IAdd | ISub | IMul | IDiv | IRem => (&[I, I], I),
        ILt | IGt | ILe | IGe | IEq => (&[I, I], B),
        FAdd | FSub | FMul | FDiv => (&[F, F], F),
        FLt | FGt | FLe | FGe | FEq => (&[F, F], B),
        BEq => (&[B, B], B),
        UEq => (&[U, U], B),
        Not => (&[B], B),
        Sqrt | Sin | Cos => (&[F], F),
        IntToFloat => (&[I], F),
        FloatToInt => (&[F], I),
        ReadInt => (&[], I),
        ReadFloat => (&[], F),
    }
}

fn fixed_prim(name: &str) -> Option<Prim> {
    use Prim::*;
    Some(match name {
        "+" => IAdd,
        "-" => ISub,
        "*" => IMul,
        "/" => IDiv,
        "%" => IRem,
        "<" => ILt,
        ">" => IGt,
        "<=" => ILe,
        ">=" => IGe,
        "+." => FAdd,
        "-." => FSub,
        "*." => FMul,
        "/." => FDiv,
        "<." => FLt,
        ">." => FGt,
        "<=." => FLe,
        ">=." => FGe,
        "=." => FEq,
        "not" => Not,
        "sqrt" => Sqrt,
        "sin" => Sin,
        "cos" => Cos,
        "int->float" => IntToFloat,
        "float->int" => FloatToInt,
        "read-int" => ReadInt,
        "read-float" => ReadFloat,
        _ => return None,
    })
}

struct Checker {
    types: TypeTable,
    mode: RefMode,
    frames: Vec<Vec<(String, TypeId)>>,
    globals: HashMap<String, u32>,
    /// `None` until an unannotated value define has been checked.
    global_types: Vec<Option<TypeId>>,
}

type TResult<T> = Result<T, TypeError>;

impl Checker {
    fn err<T>(&self, span: Span, msg: impl Into<String>) -> TResult<T> {
        Err(TypeError { line: span.line, col: span.col, msg: msg.into() })
    }

    fn show(&self, t: TypeId) -> String {
        self.types.display(t).to_string()
    }

    fn expect(&self, e: &TExpr, t: TypeId) -> TResult<()> {
        if self.types.consistent(e.ty, t) {
            Ok(())
        } else {
            self.err(e.span, format!("{} is inconsistent with {}", self.show(e.ty), self.show(t)))
        }
    }

    fn lookup(&self, name: &str, span: Span) -> TResult<(TKind, TypeId)> {
        for (depth, frame) in self.frames.iter().rev().enumerate() {
            if let Some(idx) = frame.iter().rposition(|(n, _)| n == name) {
                return Ok((TKind::Local(depth as u32, idx as u32), frame[idx].1));
            }
        }
        match self.globals.get(name) {
            Some(&g) => match self.global_types[g as usize] {
                Some(t) => Ok((TKind::Global(g), t)),
                None => self.err(span, format!("`{name}` is used before its definition; annotate its type")),
            },
            None => self.err(span, format!("unbound variable `{name}`")),
        }
    }

    fn with_frame<T>(&mut self, frame: Vec<(String, TypeId)>, f: impl FnOnce(&mut Self) -> TResult<T>) -> TResult<T> {
        self.frames.push(frame);
        let r = f(self);
        self.frames.pop();
        r
    }

    fn lambda_signature(&mut self, e: &Expr, ret_default: Option<TypeId>) -> Option<(Vec<TypeId>, Option<TypeId>)> {
        let ExprKind::Lambda { params, ret, .. } = &e.kind else { return None };
        let ps = params
            .iter()
            .map(|p| p.ann.as_ref().map_or(TypeId::DYN, |a| a.ty.intern(&mut self.types, self.mode)))
            .collect();
        let r = match ret {
            Some(a) => Some(a.ty.intern(&mut self.types, self.mode)),
            None => ret_default,
        };
        Some((ps, r))
    }

    fn check(&mut self, e: &Expr, name: Option<&str>, ret_default: Option<TypeId>) -> TResult<TExpr> {
        let span = e.span;
        let (kind, ty) = match &e.kind {
            ExprKind::Lit(l) => (
                TKind::Lit(*l),
                match l {
                    Lit::Unit => TypeId::UNIT,
                    Lit::Int(_) => TypeId::INT,
                    Lit::Float(_) => TypeId::FLOAT,
                    Lit::Bool(_) => TypeId::BOOL,
                },
            ),
            ExprKind::Var(x) => self.lookup(x, span)?,
            ExprKind::Lambda { params, body, .. } => {
                let (ps, ret) = self.lambda_signature(e, ret_default).expect("lambda");
                for (i, p) in params.iter().enumerate() {
                    if params[..i].iter().any(|q| q.name == p.name) {
                        return self.err(p.span, format!("duplicate parameter `{}`", p.name));
                    }
                }
                let frame = params.iter().map(|p| p.name.clone()).zip(ps.iter().copied()).collect();
                let body = self.with_frame(frame, |c| c.check(body, None, None))?;
                let ret = ret.unwrap_or(body.ty);
                self.expect(&body, ret)?;
                let ty = self.types.fun(ps.clone(), ret);
                (TKind::Lambda { params: ps, ret, body: Box::new(body), name: name.map(str::to_string) }, ty)
            }
            ExprKind::App(f, args) => {
                let f = self.check(f, None, None)?;
                let args = args.iter().map(|a| self.check(a, None, None)).collect::<TResult<Vec<_>>>()?;
                let ty = match self.types.get(f.ty).clone() {
                    Type::Dyn => TypeId::DYN,
                    Type::Fun(ps, r) if ps.len() == args.len() => {
                        for (a, p) in args.iter().zip(&ps) {
                            self.expect(a, *p)?;
                        }
                        r
                    }
                    Type::Fun(ps, _) => {
                        return self.err(span, format!("expected {} argument(s), found {}", ps.len(), args.len()))
                    }
                    _ => return self.err(f.span, format!("cannot apply a value of type {}", self.show(f.ty))),
                };
                (TKind::App(Box::new(f), args), ty)
            }
            ExprKind::Let(bs, body) => {
                let mut checked = Vec::new();
                let mut frame = Vec::new();
                for b in bs {
                    if frame.iter().any(|(n, _)| n == &b.name) {
                        return self.err(b.span, format!("duplicate binding `{}`", b.name));
                    }
                    let ann = b.ann.as_ref().map(|a| a.ty.intern(&mut self.types, self.mode));
                    let v = self.check(&b.expr, Some(&b.name), None)?;
                    let declared = ann.unwrap_or(v.ty);
                    self.expect(&v, declared)?;
                    frame.push((b.name.clone(), declared));
                    checked.push((declared, v));
                }
                let body = self.with_frame(frame, |c| c.check(body, None, None))?;
                let ty = body.ty;
                (TKind::Let(checked, Box::new(body)), ty)
            }
            ExprKind::If(c, t, f) => {
                let c = self.check(c, None, None)?;
                self.expect(&c, TypeId::BOOL)?;
                let t = self.check(t, None, None)?;
                let f = self.check(f, None, None)?;
                let Ok(ty) = self.types.meet(t.ty, f.ty) else {
                    return self.err(span, format!("branches have inconsistent types {} and {}", self.show(t.ty), self.show(f.ty)));
                };
                (TKind::If(Box::new(c), Box::new(t), Box::new(f)), ty)
            }
            ExprKind::Begin(es) => {
                let es = es.iter().map(|e| self.check(e, None, None)).collect::<TResult<Vec<_>>>()?;
                let ty = es.last().expect("non-empty begin").ty;
                (TKind::Begin(es), ty)
            }
            ExprKind::While(c, body) => {
                let c = self.check(c, None, None)?;
                self.expect(&c, TypeId::BOOL)?;
                let body = self.check(body, None, None)?;
                (TKind::While(Box::new(c), Box::new(body)), TypeId::UNIT)
            }
            ExprKind::Repeat { var, from, to, body } => {
                let from = self.check(from, None, None)?;
                self.expect(&from, TypeId::INT)?;
                let to = self.check(to, None, None)?;
                self.expect(&to, TypeId::INT)?;
                let body = self.with_frame(vec![(var.clone(), TypeId::INT)], |c| c.check(body, None, None))?;
                (TKind::Repeat(Box::new(from), Box::new(to), Box::new(body)), TypeId::UNIT)
            }
            ExprKind::Op(op, args) => {
                let args = args.iter().map(|a| self.check(a, None, None)).collect::<TResult<Vec<_>>>()?;
                if op == "=" {
                    self.check_eq(args, span)?
                } else {
                    let p = fixed_prim(op).expect("parser only admits known operators");
                    let (ps, r) = prim_signature(p);
                    for (a, t) in args.iter().zip(ps) {
                        self.expect(a, *t)?;
                    }
                    (TKind::Prim(p, args), r)
                }
            }
            ExprKind::Tuple(es) => {
                let es = es.iter().map(|e| self.check(e, None, None)).collect::<TResult<Vec<_>>>()?;
                let ty = self.types.tuple(es.iter().map(|e| e.ty).collect());
                (TKind::Tuple(es), ty)
            }
            ExprKind::Proj(t, i) => {
                let t = self.check(t, None, None)?;
                let ty = match self.types.get(t.ty) {
                    Type::Dyn => TypeId::DYN,
                    Type::Tuple(ts) if *i < ts.len() => ts[*i],
                    Type::Tuple(ts) => return self.err(span, format!("index {i} out of range for a {}-tuple", ts.len())),
                    _ => return self.err(t.span, format!("cannot project from {}", self.show(t.ty))),
                };
                (TKind::Proj(Box::new(t), *i), ty)
            }
            ExprKind::Ascribe(inner, ann) => {
                let ty = ann.ty.intern(&mut self.types, self.mode);
                let inner = self.check(inner, name, None)?;
                self.expect(&inner, ty)?;
                (TKind::Ascribe(Box::new(inner)), ty)
            }
            ExprKind::MkBox(v) => {
                let v = self.check(v, None, None)?;
                let ty = self.types.reference(self.mode, v.ty);
                (TKind::MkBox(Box::new(v)), ty)
            }
            ExprKind::Unbox(r) => {
                let r = self.check(r, None, None)?;
                let ty = self.elem_of(&r, false)?;
                (TKind::Unbox(Box::new(r)), ty)
            }
            ExprKind::SetBox(r, v) => {
                let r = self.check(r, None, None)?;
                let elem = self.elem_of(&r, false)?;
                let v = self.check(v, None, None)?;
                self.expect(&v, elem)?;
                (TKind::SetBox(Box::new(r), Box::new(v)), TypeId::UNIT)
            }
            ExprKind::MkVect(n, v) => {
                let n = self.check(n, None, None)?;
                self.expect(&n, TypeId::INT)?;
                let v = self.check(v, None, None)?;
                let ty = self.types.vector(self.mode, v.ty);
                (TKind::MkVect(Box::new(n), Box::new(v)), ty)
            }
            ExprKind::VectRef(r, i) => {
                let r = self.check(r, None, None)?;
                let elem = self.elem_of(&r, true)?;
                let i = self.check(i, None, None)?;
                self.expect(&i, TypeId::INT)?;
                (TKind::VectRef(Box::new(r), Box::new(i)), elem)
            }
            ExprKind::VectSet(r, i, v) => {
                let r = self.check(r, None, None)?;
                let elem = self.elem_of(&r, true)?;
                let i = self.check(i, None, None)?;
                self.expect(&i, TypeId::INT)?;
                let v = self.check(v, None, None)?;
                self.expect(&v, elem)?;
                (TKind::VectSet(Box::new(r), Box::new(i), Box::new(v)), TypeId::UNIT)
            }
            ExprKind::VectLen(r) => {
                let r = self.check(r, None, None)?;
                self.elem_of(&r, true)?;
                (TKind::VectLen(Box::new(r)), TypeId::INT)
            }
        };
        Ok(TExpr { kind, ty, span })
    }

    fn elem_of(&self, r: &TExpr, vector: bool) -> TResult<TypeId> {
        match (self.types.get(r.ty), vector) {
            (Type::Dyn, _) => Ok(TypeId::DYN),
            (Type::RefP(e) | Type::RefM(e), false) | (Type::VectP(e) | Type::VectM(e), true) => Ok(*e),
            _ => {
                let what = if vector { "a vector" } else { "a box" };
                self.err(r.span, format!("expected {what}, found {}", self.show(r.ty)))
            }
        }
    }

    fn check_eq(&mut self, mut args: Vec<TExpr>, span: Span) -> TResult<(TKind, TypeId)> {
        let b = args.pop().expect("binary");
        let a = args.pop().expect("binary");
        if !self.types.consistent(a.ty, b.ty) {
            return self.err(span, format!("cannot compare {} with {}", self.show(a.ty), self.show(b.ty)));
        }
        if a.ty == TypeId::DYN || b.ty == TypeId::DYN {
            return Ok((TKind::DynEq(Box::new(a), Box::new(b)), TypeId::BOOL));
        }
        let p = match self.types.get(a.ty) {
            Type::Base(BaseType::Int) => Prim::IEq,
            Type::Base(BaseType::Float) => Prim::FEq,
            Type::Base(BaseType::Bool) => Prim::BEq,
            Type::Base(BaseType::Unit) => Prim::UEq,
            _ => return self.err(span, format!("`=` compares base values, not {}", self.show(a.ty))),
        };
        Ok((TKind::Prim(p, vec![a, b]), TypeId::BOOL))
    }
}

/// Typechecks a module. `mode` picks what `(Ref T)` and `(Vect T)` denote.
pub fn typecheck(module: &Module, mode: RefMode) -> Result<TypedProgram, TypeError> {
    let mut c = Checker {
        types: TypeTable::new(),
        mode,
        frames: Vec::new(),
        globals: HashMap::new(),
        global_types: Vec::new(),
    };
    // Signatures first so that functions can refer to each other.
    let mut names = Vec::new();
    for item in &module.items {
        if let Item::Define { name, ann, expr, span, fun_form } = item {
            if c.globals.contains_key(name) {
                return c.err(*span, format!("`{name}` is defined twice"));
            }
            c.globals.insert(name.clone(), names.len() as u32);
            names.push(name.clone());
            let ty = match ann {
                Some(a) => Some(a.ty.intern(&mut c.types, mode)),
                None if *fun_form => {
                    let (ps, r) = c.lambda_signature(expr, Some(TypeId::DYN)).expect("function define");
                    Some(c.types.fun(ps, r.expect("defaulted")))
                }
                None => None,
            };
            c.global_types.push(ty);
        }
    }
    let mut items = Vec::new();
    let mut result_type = TypeId::UNIT;
    for item in &module.items {
        match item {
            Item::Define { name, expr, fun_form, .. } => {
                let g = c.globals[name];
                let default = fun_form.then_some(TypeId::DYN);
                let e = c.check(expr, Some(name), default)?;
                let declared = match c.global_types[g as usize] {
                    Some(t) => {
                        c.expect(&e, t)?;
                        t
                    }
                    None => e.ty,
                };
                c.global_types[g as usize] = Some(declared);
                items.push(TItem::Define(g, e));
            }
            Item::Expr(e) => {
                let e = c.check(e, None, None)?;
                result_type = e.ty;
                items.push(TItem::Expr(e));
            }
        }
    }
    let globals = names
        .into_iter()
        .zip(c.global_types.iter().map(|t| t.expect("every global checked")))
        .collect();
    Ok(TypedProgram { types: c.types, ref_mode: mode, globals, items, result_type })
}
