//! Space-efficient lazy-D coercions.
//!
//! A coercion is kept in a three-layer normal form:
//!
//! ```text
//! top    c ::= ι | I?p ; f | f
//! final  f ::= ⊥{I,p,J} | m ; I! | m
//! middle m ::= ι | (c.. → c) | ⟨c , ..⟩ | Ref c c | MRef T | Vect c c | MVect T
//! ```
//!
//! Composing two normal coercions yields a normal coercion whose size is
//! bounded by the types involved, which is what keeps proxies from piling up.

use std::fmt;
use std::rc::Rc;

use crate::types::{Type, TypeId, TypeTable};

/// Blame label: a `file:line:col` string naming the responsible cast.
pub type Label = Rc<str>;

pub type Crcn = Rc<Coercion>;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Coercion {
    Id,
    /// Project from `Dyn` to `ty`, then continue with a final coercion.
    Proj { ty: TypeId, label: Label, rest: Crcn },
    /// Always fails. When `src` is a monotonic reference type the address is
    /// first cast to `src`'s element type, because a failure can be composed
    /// onto a monotonic cast that still has to happen. That cast blames `pre`
    /// when set, `label` otherwise.
    Fail { src: TypeId, label: Label, tgt: TypeId, pre: Option<Label> },
    /// Apply a middle coercion, then inject at `ty`.
    Inj { mid: Crcn, ty: TypeId },
    /// Argument coercions are stored contravariantly.
    Fun { args: Vec<Crcn>, ret: Crcn },
    Tuple(Vec<Crcn>),
    RefP { write: Crcn, read: Crcn },
    RefM { ty: TypeId, label: Label },
    VectP { write: Crcn, read: Crcn },
    VectM { ty: TypeId, label: Label },
}

thread_local! {
    static IDENTITY: Crcn = Rc::new(Coercion::Id);
}

pub fn identity() -> Crcn {
    IDENTITY.with(Rc::clone)
}

impl Coercion {
    pub fn is_id(&self) -> bool {
        matches!(self, Coercion::Id)
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            Coercion::Id | Coercion::Fail { .. } | Coercion::RefM { .. } | Coercion::VectM { .. } => 1,
            Coercion::Proj { rest, .. } => 1 + rest.size(),
            Coercion::Inj { mid, .. } => 1 + mid.size(),
            Coercion::Fun { args, ret } => 1 + ret.size() + args.iter().map(|a| a.size()).sum::<usize>(),
            Coercion::Tuple(cs) => 1 + cs.iter().map(|c| c.size()).sum::<usize>(),
            Coercion::RefP { write, read } | Coercion::VectP { write, read } => {
                1 + write.size() + read.size()
            }
        }
    }

    /// Fails on every input before anything after it could run.
    pub fn is_doomed(&self) -> bool {
        match self {
            Coercion::Fail { .. } => true,
            Coercion::Proj { rest, .. } => rest.is_doomed(),
            Coercion::Inj { mid, .. } => mid.is_doomed(),
            Coercion::Tuple(cs) => cs.iter().any(|c| c.is_doomed()),
            _ => false,
        }
    }

    pub fn display<'a>(&'a self, types: &'a TypeTable) -> CoercionDisplay<'a> {
        CoercionDisplay { c: self, types }
    }
}

/// True iff `c` follows the top / final / middle stratification.
pub fn is_normal(c: &Coercion) -> bool {
    match c {
        Coercion::Id => true,
        Coercion::Proj { ty, rest, .. } => *ty != TypeId::DYN && is_final(rest),
        _ => is_final(c),
    }
}

fn is_final(c: &Coercion) -> bool {
    match c {
        Coercion::Fail { src, tgt, .. } => *src != TypeId::DYN && *tgt != TypeId::DYN,
        Coercion::Inj { mid, ty } => *ty != TypeId::DYN && is_middle(mid),
        _ => is_middle(c),
    }
}

fn is_middle(c: &Coercion) -> bool {
    match c {
        Coercion::Id | Coercion::RefM { .. } | Coercion::VectM { .. } => true,
        Coercion::Fun { args, ret } => is_normal(ret) && args.iter().all(|a| is_normal(a)),
        Coercion::Tuple(cs) => cs.len() >= 2 && cs.iter().all(|c| is_normal(c)),
        Coercion::RefP { write, read } | Coercion::VectP { write, read } => {
            is_normal(write) && is_normal(read)
        }
        _ => false,
    }
}

fn all_id(cs: &[Crcn]) -> bool {
    cs.iter().all(|c| c.is_id())
}

fn mk_fun(args: Vec<Crcn>, ret: Crcn) -> Crcn {
    if ret.is_id() && all_id(&args) {
        identity()
    } else {
        Rc::new(Coercion::Fun { args, ret })
    }
}

fn mk_tuple(cs: Vec<Crcn>) -> Crcn {
    if all_id(&cs) {
        identity()
    } else {
        Rc::new(Coercion::Tuple(cs))
    }
}

fn mk_refp(write: Crcn, read: Crcn) -> Crcn {
    if write.is_id() && read.is_id() {
        identity()
    } else {
        Rc::new(Coercion::RefP { write, read })
    }
}

fn mk_vectp(write: Crcn, read: Crcn) -> Crcn {
    if write.is_id() && read.is_id() {
        identity()
    } else {
        Rc::new(Coercion::VectP { write, read })
    }
}

/// Build the coercion for a cast from `src` to `tgt`. Inconsistent pairs
/// give a failure coercion rather than an error.
pub fn make_coercion(types: &TypeTable, src: TypeId, tgt: TypeId, label: &Label) -> Crcn {
    if src == tgt {
        return identity();
    }
    if src == TypeId::DYN {
        return Rc::new(Coercion::Proj {
            ty: tgt,
            label: label.clone(),
            rest: identity(),
        });
    }
    if tgt == TypeId::DYN {
        return Rc::new(Coercion::Inj {
            mid: identity(),
            ty: src,
        });
    }
    let fail = || {
        Rc::new(Coercion::Fail {
            src,
            label: label.clone(),
            tgt,
            pre: None,
        })
    };
    match (types.get(src), types.get(tgt)) {
        (Type::Fun(ps, r), Type::Fun(qs, s)) if ps.len() == qs.len() => {
            let args = ps
                .iter()
                .zip(qs)
                .map(|(p, q)| make_coercion(types, *q, *p, label))
                .collect();
            mk_fun(args, make_coercion(types, *r, *s, label))
        }
        (Type::Tuple(ts), Type::Tuple(us)) if ts.len() == us.len() => mk_tuple(
            ts.iter()
                .zip(us)
                .map(|(t, u)| make_coercion(types, *t, *u, label))
                .collect(),
        ),
        (Type::RefP(a), Type::RefP(b)) => mk_refp(
            make_coercion(types, *b, *a, label),
            make_coercion(types, *a, *b, label),
        ),
        (Type::VectP(a), Type::VectP(b)) => mk_vectp(
            make_coercion(types, *b, *a, label),
            make_coercion(types, *a, *b, label),
        ),
        (Type::RefM(_), Type::RefM(b)) => Rc::new(Coercion::RefM {
            ty: *b,
            label: label.clone(),
        }),
        (Type::VectM(_), Type::VectM(b)) => Rc::new(Coercion::VectM {
            ty: *b,
            label: label.clone(),
        }),
        _ => fail(),
    }
}

/// `c1 ; c2`: first `c1`, then `c2`.
pub fn compose(types: &mut TypeTable, c1: &Crcn, c2: &Crcn) -> Crcn {
    if c1.is_id() {
        return c2.clone();
    }
    if c2.is_id() || c1.is_doomed() {
        return c1.clone();
    }
    match &**c1 {
        Coercion::Proj { ty, label, rest } => Rc::new(Coercion::Proj {
            ty: *ty,
            label: label.clone(),
            rest: compose(types, rest, c2),
        }),
        Coercion::Inj { mid, ty } => match &**c2 {
            Coercion::Proj {
                ty: target,
                label,
                rest,
            } => {
                let bridge = make_coercion(types, *ty, *target, label);
                let tail = compose(types, &bridge, rest);
                compose(types, mid, &tail)
            }
            // A failure pushed into a tuple component by `fail_after`.
            Coercion::Fail { .. } => fail_after(types, c1, c2),
            _ => panic!("ill-typed composition: injection followed by {c2:?}"),
        },
        _ => compose_middle(types, c1, c2),
    }
}

fn compose_middle(types: &mut TypeTable, m1: &Crcn, c2: &Crcn) -> Crcn {
    match (&**m1, &**c2) {
        (_, Coercion::Fail { .. }) => fail_after(types, m1, c2),
        (_, Coercion::Inj { mid, ty }) => {
            let m = compose(types, m1, mid);
            if matches!(*m, Coercion::Fail { .. }) {
                m
            } else {
                Rc::new(Coercion::Inj { mid: m, ty: *ty })
            }
        }
        (Coercion::Fun { args: a1, ret: r1 }, Coercion::Fun { args: a2, ret: r2 }) => {
            let args = a1
                .iter()
                .zip(a2)
                .map(|(x, y)| compose(types, y, x))
                .collect();
            let ret = compose(types, r1, r2);
            mk_fun(args, ret)
        }
        (Coercion::Tuple(xs), Coercion::Tuple(ys)) => mk_tuple(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| compose(types, x, y))
                .collect(),
        ),
        (Coercion::RefP { write: w1, read: r1 }, Coercion::RefP { write: w2, read: r2 }) => {
            let w = compose(types, w2, w1);
            let r = compose(types, r1, r2);
            mk_refp(w, r)
        }
        (Coercion::VectP { write: w1, read: r1 }, Coercion::VectP { write: w2, read: r2 }) => {
            let w = compose(types, w2, w1);
            let r = compose(types, r1, r2);
            mk_vectp(w, r)
        }
        (Coercion::RefM { ty: t1, label: l1 }, Coercion::RefM { ty: t2, label }) => {
            match types.meet(*t1, *t2) {
                Ok(t) => Rc::new(Coercion::RefM {
                    ty: t,
                    label: if t == *t1 { l1.clone() } else { label.clone() },
                }),
                Err(_) => mono_conflict(types, Type::RefM(*t1), Type::RefM(*t2), l1, label),
            }
        }
        (Coercion::VectM { ty: t1, label: l1 }, Coercion::VectM { ty: t2, label }) => {
            match types.meet(*t1, *t2) {
                Ok(t) => Rc::new(Coercion::VectM {
                    ty: t,
                    label: if t == *t1 { l1.clone() } else { label.clone() },
                }),
                Err(_) => mono_conflict(types, Type::VectM(*t1), Type::VectM(*t2), l1, label),
            }
        }
        _ => panic!("ill-typed composition: {m1:?} followed by {c2:?}"),
    }
}

/// Failure between two monotonic types with the same head: applying it raises
/// the inconsistent-rtti error rather than blame.
fn mono_conflict(types: &mut TypeTable, a: Type, b: Type, first: &Label, label: &Label) -> Crcn {
    Rc::new(Coercion::Fail {
        src: types.intern(a),
        label: label.clone(),
        tgt: types.intern(b),
        pre: Some(first.clone()),
    })
}

/// `c ; ⊥`: run every eager part of `c` that could itself fail or mutate the
/// heap, then fail with `fail`'s label. Lazy parts (function and proxied
/// reference coercions) are dropped since they would only wrap the value.
fn fail_after(types: &mut TypeTable, c: &Crcn, fail: &Crcn) -> Crcn {
    if c.is_id() {
        return fail.clone();
    }
    if c.is_doomed() {
        return c.clone();
    }
    match &**c {
        Coercion::Proj { ty, label, rest } => Rc::new(Coercion::Proj {
            ty: *ty,
            label: label.clone(),
            rest: fail_after(types, rest, fail),
        }),
        Coercion::Inj { mid, .. } => fail_after(types, mid, fail),
        Coercion::Tuple(cs) => {
            let mut cs = cs.clone();
            let last = cs.pop().expect("tuple coercion has components");
            cs.push(fail_after(types, &last, fail));
            Rc::new(Coercion::Tuple(cs))
        }
        Coercion::RefM { ty, label } => mono_fail_after(types, *ty, label, fail, false),
        Coercion::VectM { ty, label } => mono_fail_after(types, *ty, label, fail, true),
        _ => fail.clone(),
    }
}

fn mono_fail_after(types: &mut TypeTable, elem: TypeId, own: &Label, fail: &Crcn, vect: bool) -> Crcn {
    let Coercion::Fail { src, label, tgt, pre } = &**fail else {
        unreachable!("fail_after called with a non-failure")
    };
    let fail_pre = pre.as_ref().unwrap_or(label);
    let wrap = |e| if vect { Type::VectM(e) } else { Type::RefM(e) };
    let src_elem = match types.get(*src) {
        Type::RefM(e) if !vect => Some(*e),
        Type::VectM(e) if vect => Some(*e),
        _ => None,
    };
    let merged = match src_elem {
        None => Ok(elem),
        Some(e) => types.meet(elem, e),
    };
    match merged {
        // Two casts fold into one here, so only one label can survive; the
        // earlier cast's when the later one adds nothing.
        Ok(m) => Rc::new(Coercion::Fail {
            src: types.intern(wrap(m)),
            label: label.clone(),
            tgt: *tgt,
            pre: Some(if m == elem { own.clone() } else { fail_pre.clone() }),
        }),
        Err(_) => {
            let a = types.intern(wrap(elem));
            Rc::new(Coercion::Fail {
                src: a,
                label: fail_pre.clone(),
                tgt: *src,
                pre: Some(own.clone()),
            })
        }
    }
}

/// Whether applying the failure raises the monotonic inconsistency error
/// (both endpoints share a monotonic head) instead of blame.
pub fn fail_is_dynamic_error(types: &TypeTable, src: TypeId, tgt: TypeId) -> bool {
    matches!(
        (types.get(src), types.get(tgt)),
        (Type::RefM(_), Type::RefM(_)) | (Type::VectM(_), Type::VectM(_))
    )
}

/// Pool of coercions known before the program runs, addressed by index.
#[derive(Clone, Debug, Default)]
pub struct CoercionPool {
    items: Vec<Crcn>,
    index: std::collections::HashMap<Crcn, CoercionId>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct CoercionId(u32);

impl CoercionPool {
    pub fn intern(&mut self, c: Crcn) -> CoercionId {
        if let Some(id) = self.index.get(&c) {
            return *id;
        }
        let id = CoercionId(self.items.len() as u32);
        self.items.push(c.clone());
        self.index.insert(c, id);
        id
    }

    pub fn get(&self, id: CoercionId) -> &Crcn {
        &self.items[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub struct CoercionDisplay<'a> {
    c: &'a Coercion,
    types: &'a TypeTable,
}

impl<'a> fmt::Display for CoercionDisplay<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ty = |t| self.types.display(t);
        let sub = |c: &'a Crcn| CoercionDisplay { c, types: self.types };
        // Reference coercions print their children bare, so nest them in parens.
        let arg = |c: &'a Crcn| {
            let s = sub(c).to_string();
            match **c {
                Coercion::RefP { .. } | Coercion::VectP { .. } | Coercion::RefM { .. } | Coercion::VectM { .. } => {
                    format!("({s})")
                }
                _ => s,
            }
        };
        match self.c {
            Coercion::Id => write!(f, "ι"),
            Coercion::Proj { ty: t, label, rest } if rest.is_id() => write!(f, "{}?^{}", ty(*t), label),
            Coercion::Proj { ty: t, label, rest } => write!(f, "({}?^{} ; {})", ty(*t), label, sub(rest)),
            Coercion::Fail { src, label, tgt, .. } => write!(f, "⊥{{{},{},{}}}", ty(*src), label, ty(*tgt)),
            Coercion::Inj { mid, ty: t } if mid.is_id() => write!(f, "{}!", ty(*t)),
            Coercion::Inj { mid, ty: t } => write!(f, "({} ; {}!)", sub(mid), ty(*t)),
            Coercion::Fun { args, ret } => {
                write!(f, "(")?;
                for a in args {
                    write!(f, "{} ", sub(a))?;
                }
                write!(f, "→ {})", sub(ret))
            }
            Coercion::Tuple(cs) => {
                write!(f, "⟨")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " , ")?;
                    }
                    write!(f, "{}", sub(c))?;
                }
                write!(f, "⟩")
            }
            Coercion::RefP { write, read } => write!(f, "Ref {} {}", arg(write), arg(read)),
            Coercion::VectP { write, read } => write!(f, "Vect {} {}", arg(write), arg(read)),
            Coercion::RefM { ty: t, .. } => write!(f, "MRef {}", ty(*t)),
            Coercion::VectM { ty: t, .. } => write!(f, "MVect {}", ty(*t)),
        }
    }
}
