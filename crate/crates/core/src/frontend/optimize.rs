//! IR rewrites: eliding proxies that would be consumed immediately, and
//! partially evaluating casts whose types are known at compile time.

use std::rc::Rc;

use super::ir::{Expr, InlineRefKind, Program, TopItem};
use crate::coercion::make_coercion;
use crate::types::{Type, TypeId};

/// Rebuilds `e` bottom-up, applying `f` to every node after its children.
fn rewrite(e: Expr, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
    use Expr::*;
    let mut go = |x: Box<Expr>| Box::new(rewrite(*x, f));
    let e = match e {
        Lit(_) | Local(..) | Global(_) => e,
        Lambda(l) => {
            let body = rewrite(l.body.clone(), f);
            Lambda(Rc::new(super::ir::Lambda { arity: l.arity, body, name: l.name.clone() }))
        }
        App(a, bs) => {
            let a = go(a);
            App(a, bs.into_iter().map(|b| rewrite(b, f)).collect())
        }
        InlineApp { fun, src, tgt, args, label } => {
            let fun = go(fun);
            InlineApp { fun, src, tgt, args: args.into_iter().map(|b| rewrite(b, f)).collect(), label }
        }
        InlineRef { kind, target, src, tgt, args, label } => {
            let target = go(target);
            InlineRef { kind, target, src, tgt, args: args.into_iter().map(|b| rewrite(b, f)).collect(), label }
        }
        Let(bs, body) => {
            let bs = bs.into_iter().map(|b| rewrite(b, f)).collect();
            Let(bs, Box::new(rewrite(*body, f)))
        }
        Begin(bs, last) => {
            let bs = bs.into_iter().map(|b| rewrite(b, f)).collect();
            Begin(bs, Box::new(rewrite(*last, f)))
        }
        If(a, b, c) => If(go(a), go(b), go(c)),
        Repeat(a, b, c) => Repeat(go(a), go(b), go(c)),
        VectSetP(a, b, c) => VectSetP(go(a), go(b), go(c)),
        VectSetM(a, b, c) => VectSetM(go(a), go(b), go(c)),
        VectSetTM(a, b, c, t, l) => VectSetTM(go(a), go(b), go(c), t, l),
        While(a, b) => While(go(a), go(b)),
        DynEq(a, b, l) => DynEq(go(a), go(b), l),
        SetBoxP(a, b) => SetBoxP(go(a), go(b)),
        MkVectP(a, b) => MkVectP(go(a), go(b)),
        VectRefP(a, b) => VectRefP(go(a), go(b)),
        SetBoxM(a, b) => SetBoxM(go(a), go(b)),
        SetBoxTM(a, b, t, l) => SetBoxTM(go(a), go(b), t, l),
        MkVectM(a, b, t) => MkVectM(go(a), go(b), t),
        VectRefM(a, b) => VectRefM(go(a), go(b)),
        VectRefTM(a, b, t, l) => VectRefTM(go(a), go(b), t, l),
        Prim(p, bs) => Prim(p, bs.into_iter().map(|b| rewrite(b, f)).collect()),
        Tuple(bs) => Tuple(bs.into_iter().map(|b| rewrite(b, f)).collect()),
        TupleProj(a, i) => TupleProj(go(a), i),
        DynTupleProj(a, i, l) => DynTupleProj(go(a), i, l),
        Cast { expr, src, tgt, label } => Cast { expr: go(expr), src, tgt, label },
        MkBoxP(a) => MkBoxP(go(a)),
        UnboxP(a) => UnboxP(go(a)),
        MkBoxM(a, t) => MkBoxM(go(a), t),
        UnboxM(a) => UnboxM(go(a)),
        UnboxTM(a, t, l) => UnboxTM(go(a), t, l),
        VectLen(a) => VectLen(go(a)),
        InlineTupleProj { expr, src, tgt, idx, label } => InlineTupleProj { expr: go(expr), src, tgt, idx, label },
        ProjectBase(a, t, l) => ProjectBase(go(a), t, l),
        Inject(a, t) => Inject(go(a), t),
        ApplyCoercion(a, c) => ApplyCoercion(go(a), c),
    };
    f(e)
}

fn rewrite_program(p: &mut Program, f: &mut dyn FnMut(Expr) -> Expr) {
    let items = std::mem::take(&mut p.items);
    p.items = items
        .into_iter()
        .map(|item| match item {
            TopItem::Define(g, e) => TopItem::Define(g, rewrite(e, f)),
            TopItem::Expr(e) => TopItem::Expr(rewrite(e, f)),
        })
        .collect();
}

/// Fuses a cast with the elimination form consuming it: calls through a
/// function cast, proxied box and vector accesses through a reference cast,
/// and projections from a tuple cast.
pub fn optimize_dyn(p: &mut Program) {
    rewrite_program(p, &mut |e| match e {
        Expr::App(f, args) => match *f {
            Expr::Cast { expr, src, tgt, label } => Expr::InlineApp { fun: expr, src, tgt, args, label },
            f => Expr::App(Box::new(f), args),
        },
        Expr::UnboxP(r) => inline_ref(InlineRefKind::BoxRead, *r, vec![]).unwrap_or_else(|(r, _)| Expr::UnboxP(r)),
        Expr::SetBoxP(r, v) => {
            inline_ref(InlineRefKind::BoxWrite, *r, vec![*v]).unwrap_or_else(|(r, mut args)| {
                Expr::SetBoxP(r, Box::new(args.pop().unwrap()))
            })
        }
        Expr::VectRefP(r, i) => {
            inline_ref(InlineRefKind::VectRead, *r, vec![*i]).unwrap_or_else(|(r, mut args)| {
                Expr::VectRefP(r, Box::new(args.pop().unwrap()))
            })
        }
        Expr::VectSetP(r, i, v) => {
            inline_ref(InlineRefKind::VectWrite, *r, vec![*i, *v]).unwrap_or_else(|(r, mut args)| {
                let v = args.pop().unwrap();
                let i = args.pop().unwrap();
                Expr::VectSetP(r, Box::new(i), Box::new(v))
            })
        }
        Expr::TupleProj(t, idx) => match *t {
            Expr::Cast { expr, src, tgt, label } => Expr::InlineTupleProj { expr, src, tgt, idx, label },
            t => Expr::TupleProj(Box::new(t), idx),
        },
        e => e,
    });
}

type Unfused = (Box<Expr>, Vec<Expr>);

fn inline_ref(kind: InlineRefKind, r: Expr, args: Vec<Expr>) -> Result<Expr, Unfused> {
    match r {
        Expr::Cast { expr, src, tgt, label } => Ok(Expr::InlineRef { kind, target: expr, src, tgt, args, label }),
        r => Err((Box::new(r), args)),
    }
}

/// Replaces each cast by an injection, a base-type projection, or an
/// application of a precomputed coercion from the program's pool.
pub fn specialize_casts(p: &mut Program) {
    let types = p.types.clone();
    let mut pool = std::mem::take(&mut p.pool);
    rewrite_program(p, &mut |e| match e {
        Expr::Cast { expr, src, tgt, label } => {
            if src == tgt {
                *expr
            } else if tgt == TypeId::DYN {
                Expr::Inject(expr, src)
            } else if src == TypeId::DYN && matches!(types.get(tgt), Type::Base(_)) {
                Expr::ProjectBase(expr, tgt, label)
            } else {
                let c = make_coercion(&types, src, tgt, &label);
                Expr::ApplyCoercion(expr, pool.intern(c))
            }
        }
        e => e,
    });
    p.pool = pool;
}
