use std::rc::Rc;

use super::heap::Cell;
use super::value::{Closure, Env, Payload, Value};
use super::{CastRep, Halt, Machine, Res};
use crate::coercion::{Coercion, Crcn, Label};
use crate::frontend::ir::{Expr, InlineRefKind, Lit, Prim};
use crate::types::{Type, TypeId};

fn fault<T>(msg: impl Into<String>) -> Res<T> {
    Err(Halt::Fault(msg.into()))
}

enum RefView {
    Plain,
    Cast(TypeId, TypeId, Label),
    Coerced(Crcn, Crcn),
}

const RED_ZONE: usize = 128 * 1024;
const STACK_GROWTH: usize = 16 * 1024 * 1024;

impl Machine<'_> {
    pub fn eval(&mut self, e: &Expr, env: &Env) -> Res<Value> {
        match e {
            Expr::Lit(l) => Ok(match *l {
                Lit::Unit => Value::Unit,
                Lit::Int(n) => Value::Int(n),
                Lit::Float(x) => Value::Float(x),
                Lit::Bool(b) => Value::Bool(b),
            }),
            Expr::Local(d, i) => Ok(env.lookup(*d, *i).clone()),
            Expr::Global(g) => match &self.globals[*g as usize] {
                Some(v) => Ok(v.clone()),
                None => fault("global used before its definition"),
            },
            Expr::Lambda(l) => Ok(Value::Closure(Rc::new(Closure {
                lambda: l.clone(),
                env: env.clone(),
            }))),
            Expr::App(f, args) => {
                let f = self.eval(f, env)?;
                let args = self.eval_all(args, env)?;
                self.call(&f, args)
            }
            Expr::Let(bs, body) => {
                let vals = self.eval_all(bs, env)?;
                self.eval(body, &env.push(vals))
            }
            Expr::If(c, t, f) => {
                if self.eval(c, env)?.as_bool() {
                    self.eval(t, env)
                } else {
                    self.eval(f, env)
                }
            }
            Expr::Begin(es, last) => {
                for e in es {
                    self.eval(e, env)?;
                }
                self.eval(last, env)
            }
            Expr::While(c, body) => {
                while self.eval(c, env)?.as_bool() {
                    self.eval(body, env)?;
                }
                Ok(Value::Unit)
            }
            Expr::Repeat(from, to, body) => {
                let lo = self.eval(from, env)?.as_int();
                let hi = self.eval(to, env)?.as_int();
                for i in lo..hi {
                    self.eval(body, &env.push(vec![Value::Int(i)]))?;
                }
                Ok(Value::Unit)
            }
            Expr::Prim(p, args) => {
                let args = self.eval_all(args, env)?;
                self.prim(*p, &args)
            }
            Expr::DynEq(a, b, label) => {
                let a = self.eval(a, env)?;
                let b = self.eval(b, env)?;
                dyn_eq(&a, &b, label)
            }
            Expr::Tuple(es) => Ok(Value::tuple(self.eval_all(es, env)?)),
            Expr::TupleProj(e, i) => match self.eval(e, env)? {
                Value::Tuple(vs) => Ok(vs[*i].clone()),
                other => fault(format!("projection from {other:?}")),
            },
            Expr::DynTupleProj(e, i, label) => {
                let v = self.eval(e, env)?;
                self.dyn_tuple_proj(v, *i, label)
            }
            Expr::Cast { expr, src, tgt, label } => {
                let v = self.eval(expr, env)?;
                let v = self.cast(v, *src, *tgt, label)?;
                self.settle()?;
                Ok(v)
            }

            Expr::MkBoxP(e) => {
                let v = self.eval(e, env)?;
                self.alloc(Cell::Plain(v))
            }
            Expr::UnboxP(r) => {
                let r = self.eval(r, env)?;
                self.box_read(&r)
            }
            Expr::SetBoxP(r, v) => {
                let r = self.eval(r, env)?;
                let v = self.eval(v, env)?;
                self.box_write(&r, v)?;
                Ok(Value::Unit)
            }
            Expr::MkVectP(n, init) => {
                let n = self.eval(n, env)?.as_int();
                let init = self.eval(init, env)?;
                let n = vect_size(n)?;
                self.alloc(Cell::PlainVec(vec![init; n]))
            }
            Expr::VectRefP(r, i) => {
                let r = self.eval(r, env)?;
                let i = self.eval(i, env)?.as_int();
                self.vect_read(&r, i)
            }
            Expr::VectSetP(r, i, v) => {
                let r = self.eval(r, env)?;
                let i = self.eval(i, env)?.as_int();
                let v = self.eval(v, env)?;
                self.vect_write(&r, i, v)?;
                Ok(Value::Unit)
            }

            Expr::MkBoxM(e, t) => {
                let val = self.eval(e, env)?;
                let r = self.alloc(Cell::Mono { val, rtti: *t, pending: None })?;
                self.note_alloc(&r, *t);
                Ok(r)
            }
            Expr::UnboxM(r) => {
                let r = self.eval(r, env)?;
                self.mono_read(&r, None)
            }
            Expr::UnboxTM(r, t, label) => {
                let r = self.eval(r, env)?;
                let v = self.mono_read_typed(&r, None, *t, label)?;
                self.settle()?;
                Ok(v)
            }
            Expr::SetBoxM(r, v) => {
                let r = self.eval(r, env)?;
                let v = self.eval(v, env)?;
                self.mono_write(&r, None, v)?;
                Ok(Value::Unit)
            }
            Expr::SetBoxTM(r, v, t, label) => {
                let r = self.eval(r, env)?;
                let v = self.eval(v, env)?;
                self.mono_write_typed(&r, None, v, *t, label)?;
                self.settle()?;
                Ok(Value::Unit)
            }
            Expr::MkVectM(n, init, t) => {
                let n = self.eval(n, env)?.as_int();
                let init = self.eval(init, env)?;
                let n = vect_size(n)?;
                let r = self.alloc(Cell::MonoVec { vals: vec![init; n], rtti: *t, pending: None })?;
                self.note_alloc(&r, *t);
                Ok(r)
            }
            Expr::VectRefM(r, i) => {
                let r = self.eval(r, env)?;
                let i = self.eval(i, env)?.as_int();
                self.mono_read(&r, Some(i))
            }
            Expr::VectRefTM(r, i, t, label) => {
                let r = self.eval(r, env)?;
                let i = self.eval(i, env)?.as_int();
                let v = self.mono_read_typed(&r, Some(i), *t, label)?;
                self.settle()?;
                Ok(v)
            }
            Expr::VectSetM(r, i, v) => {
                let r = self.eval(r, env)?;
                let i = self.eval(i, env)?.as_int();
                let v = self.eval(v, env)?;
                self.mono_write(&r, Some(i), v)?;
                Ok(Value::Unit)
            }
            Expr::VectSetTM(r, i, v, t, label) => {
                let r = self.eval(r, env)?;
                let i = self.eval(i, env)?.as_int();
                let v = self.eval(v, env)?;
                self.mono_write_typed(&r, Some(i), v, *t, label)?;
                self.settle()?;
                Ok(Value::Unit)
            }
            Expr::VectLen(r) => {
                let r = self.eval(r, env)?;
                Ok(Value::Int(self.vect_len(&r)?))
            }

            Expr::InlineApp { fun, src, tgt, args, label } => {
                let f = self.eval(fun, env)?;
                let (f, payload) = self.prepare_fun(f, *src, *tgt, label)?;
                self.settle()?;
                let args = self.eval_all(args, env)?;
                let v = self.finish_app(&f, payload, args)?;
                self.settle()?;
                Ok(v)
            }
            Expr::InlineRef { kind, target, src, tgt, args, label } => {
                let r = self.eval(target, env)?;
                let vector = matches!(kind, InlineRefKind::VectRead | InlineRefKind::VectWrite);
                let (r, view) = self.prepare_ref(vector, r, *src, *tgt, label)?;
                self.settle()?;
                let args = self.eval_all(args, env)?;
                let v = self.finish_ref(*kind, &r, view, args)?;
                self.settle()?;
                Ok(v)
            }
            Expr::InlineTupleProj { expr, src, tgt, idx, label } => {
                let v = self.eval(expr, env)?;
                let v = self.inline_tuple_proj(v, *src, *tgt, *idx, label)?;
                self.settle()?;
                Ok(v)
            }
            Expr::ProjectBase(e, b, label) => match self.eval(e, env)? {
                Value::Dyn(d) => {
                    self.counters.casts_executed += 1;
                    if d.ty == *b {
                        Ok(d.val.clone())
                    } else {
                        Err(Halt::Blame(label.clone()))
                    }
                }
                other => fault(format!("projection of untagged {other:?}")),
            },
            Expr::Inject(e, ty) => {
                let v = self.eval(e, env)?;
                self.counters.casts_executed += 1;
                Ok(Value::dyn_of(v, *ty))
            }
            Expr::ApplyCoercion(e, id) => {
                let v = self.eval(e, env)?;
                let c = self.pool.get(*id).clone();
                let v = self.apply_coercion(v, &c)?;
                self.settle()?;
                Ok(v)
            }
        }
    }

    fn note_alloc(&mut self, r: &Value, rtti: TypeId) {
        if let (Some(t), Value::Addr(a)) = (&mut self.trace, r) {
            t.push((*a, rtti));
        }
    }

    fn eval_all(&mut self, es: &[Expr], env: &Env) -> Res<Vec<Value>> {
        es.iter().map(|e| self.eval(e, env)).collect()
    }

    fn alloc(&mut self, cell: Cell) -> Res<Value> {
        match self.heap.alloc(cell) {
            Ok(a) => Ok(Value::Addr(a)),
            Err(e) => fault(e.to_string()),
        }
    }

    /// Applies a closure or function proxy.
    pub fn call(&mut self, f: &Value, args: Vec<Value>) -> Res<Value> {
        match f {
            Value::Closure(c) => {
                if c.lambda.arity != args.len() {
                    return fault("arity mismatch");
                }
                if self.depth >= self.max_depth {
                    return fault(format!("call depth limit of {} exceeded", self.max_depth));
                }
                self.depth += 1;
                let env = c.env.push(args);
                let r = stacker::maybe_grow(RED_ZONE, STACK_GROWTH, || self.eval(&c.lambda.body, &env));
                self.depth -= 1;
                r
            }
            Value::FunProxy(p) => self.call_through(&p.inner, &p.payload, args),
            other => fault(format!("application of {other:?}")),
        }
    }

    /// What a function proxy does on a call: cast the arguments, call the
    /// wrapped function, cast the result.
    fn call_through(&mut self, inner: &Value, payload: &Payload, args: Vec<Value>) -> Res<Value> {
        match payload {
            Payload::Cast { src, tgt, label } => {
                let (Type::Fun(ps, r), Type::Fun(qs, s)) = (self.types.get(*src).clone(), self.types.get(*tgt).clone())
                else {
                    return fault("function proxy over non-function types");
                };
                if args.len() != ps.len() {
                    return fault("arity mismatch");
                }
                let mut cast_args = Vec::with_capacity(args.len());
                for ((a, q), p) in args.into_iter().zip(&qs).zip(&ps) {
                    cast_args.push(self.apply_cast(a, *q, *p, label)?);
                }
                self.settle()?;
                let out = self.call(inner, cast_args)?;
                let out = self.apply_cast(out, r, s, label)?;
                self.settle()?;
                Ok(out)
            }
            Payload::Coercion(c) => {
                let Coercion::Fun { args: cs, ret } = &**c else {
                    return fault("function proxy without a function coercion");
                };
                if args.len() != cs.len() {
                    return fault("arity mismatch");
                }
                let mut cast_args = Vec::with_capacity(args.len());
                for (a, c) in args.into_iter().zip(cs) {
                    cast_args.push(self.apply_coercion(a, c)?);
                }
                self.settle()?;
                let out = self.call(inner, cast_args)?;
                let out = self.apply_coercion(out, ret)?;
                self.settle()?;
                Ok(out)
            }
        }
    }

    /// Strips `Dyn` for an inline elimination: the underlying value and its
    /// runtime type.
    fn open(v: Value, src: TypeId) -> Res<(Value, TypeId)> {
        if src != TypeId::DYN {
            return Ok((v, src));
        }
        match v {
            Value::Dyn(d) => Ok((d.val.clone(), d.ty)),
            other => fault(format!("expected a dynamically typed value, found {other:?}")),
        }
    }

    /// Coercion that a proxy for `v` cast to `tgt` would carry: the existing
    /// proxy's coercion composed with the new one. Returns the bare inner
    /// value alongside.
    fn fused(&mut self, v: Value, ty: TypeId, tgt: TypeId, label: &Label) -> Res<(Value, Crcn)> {
        let c = self.make(ty, tgt, label);
        if let Coercion::Fail { src, label, tgt, pre } = &*c {
            let (s, l, t, pre) = (*src, label.clone(), *tgt, pre.clone());
            self.counters.casts_executed += 1;
            self.fail(&v, s, t, &l, pre.as_ref())?;
            unreachable!("a failure coercion always halts");
        }
        match &v {
            Value::FunProxy(p) | Value::RefProxy(p) => {
                let Payload::Coercion(old) = &p.payload else {
                    return fault("type-based proxy under coercions");
                };
                let old = old.clone();
                let composed = self.compose(&old, &c);
                Ok((p.inner.clone(), composed))
            }
            _ => Ok((v, c)),
        }
    }

    /// The cast half of an inline application: checks the operator and
    /// returns what a proxy would hold, without allocating it.
    fn prepare_fun(&mut self, f: Value, src: TypeId, tgt: TypeId, label: &Label) -> Res<(Value, Option<Payload>)> {
        let (u, ty) = Self::open(f, src)?;
        if ty == tgt {
            return Ok((u, None));
        }
        self.counters.casts_executed += 1;
        let arity_ok = matches!(
            (self.types.get(ty), self.types.get(tgt)),
            (Type::Fun(ps, _), Type::Fun(qs, _)) if ps.len() == qs.len()
        );
        match self.cast_rep {
            CastRep::TypeBased if arity_ok => Ok((u, Some(Payload::Cast { src: ty, tgt, label: label.clone() }))),
            CastRep::TypeBased => Err(Halt::Blame(label.clone())),
            CastRep::Coercions => {
                let (inner, c) = self.fused(u, ty, tgt, label)?;
                Ok((inner, (!c.is_id()).then_some(Payload::Coercion(c))))
            }
        }
    }

    fn finish_app(&mut self, f: &Value, payload: Option<Payload>, args: Vec<Value>) -> Res<Value> {
        match payload {
            None => self.call(f, args),
            Some(p) => self.call_through(f, &p, args),
        }
    }

    /// The cast half of an inline reference operation.
    fn prepare_ref(&mut self, vector: bool, r: Value, src: TypeId, tgt: TypeId, label: &Label) -> Res<(Value, RefView)> {
        let (u, ty) = Self::open(r, src)?;
        if ty == tgt {
            return Ok((u, RefView::Plain));
        }
        self.counters.casts_executed += 1;
        let shapes = match (self.types.get(ty), self.types.get(tgt)) {
            (Type::RefP(a), Type::RefP(b)) if !vector => Some((*a, *b)),
            (Type::VectP(a), Type::VectP(b)) if vector => Some((*a, *b)),
            _ => None,
        };
        match self.cast_rep {
            CastRep::TypeBased => match shapes {
                Some((es, et)) => Ok((u, RefView::Cast(es, et, label.clone()))),
                None => Err(Halt::Blame(label.clone())),
            },
            CastRep::Coercions => {
                let (inner, c) = self.fused(u, ty, tgt, label)?;
                match &*c {
                    Coercion::RefP { write, read } | Coercion::VectP { write, read } => {
                        Ok((inner, RefView::Coerced(write.clone(), read.clone())))
                    }
                    Coercion::Id => Ok((inner, RefView::Plain)),
                    _ => fault("reference cast produced a non-reference coercion"),
                }
            }
        }
    }

    fn finish_ref(&mut self, kind: InlineRefKind, r: &Value, view: RefView, mut args: Vec<Value>) -> Res<Value> {
        let read = matches!(kind, InlineRefKind::BoxRead | InlineRefKind::VectRead);
        match view {
            RefView::Plain => self.ref_op(kind, r, args),
            RefView::Cast(es, et, label) if read => {
                let v = self.ref_op(kind, r, args)?;
                self.apply_cast(v, es, et, &label)
            }
            RefView::Cast(es, et, label) => {
                let v = args.pop().expect("written value");
                args.push(self.apply_cast(v, et, es, &label)?);
                self.ref_op(kind, r, args)
            }
            RefView::Coerced(_, rd) if read => {
                let v = self.ref_op(kind, r, args)?;
                self.apply_coercion(v, &rd)
            }
            RefView::Coerced(wr, _) => {
                let v = args.pop().expect("written value");
                args.push(self.apply_coercion(v, &wr)?);
                self.ref_op(kind, r, args)
            }
        }
    }

    fn ref_op(&mut self, kind: InlineRefKind, r: &Value, args: Vec<Value>) -> Res<Value> {
        match kind {
            InlineRefKind::BoxRead => self.box_read(r),
            InlineRefKind::BoxWrite => {
                let v = args.into_iter().next().expect("written value");
                self.box_write(r, v)?;
                Ok(Value::Unit)
            }
            InlineRefKind::VectRead => self.vect_read(r, args[0].as_int()),
            InlineRefKind::VectWrite => {
                let mut it = args.into_iter();
                let i = it.next().expect("index").as_int();
                let v = it.next().expect("written value");
                self.vect_write(r, i, v)?;
                Ok(Value::Unit)
            }
        }
    }

    /// A cast whose result cannot fail and has no heap effect.
    fn pure_total(&self, s: TypeId, t: TypeId) -> bool {
        if s == t || t == TypeId::DYN {
            return true;
        }
        match (self.types.get(s), self.types.get(t)) {
            (Type::Fun(ps, _), Type::Fun(qs, _)) => ps.len() == qs.len(),
            (Type::RefP(_), Type::RefP(_)) | (Type::VectP(_), Type::VectP(_)) => true,
            _ => false,
        }
    }

    fn inline_tuple_proj(&mut self, v: Value, src: TypeId, tgt: TypeId, idx: usize, label: &Label) -> Res<Value> {
        let (u, ty) = Self::open(v.clone(), src)?;
        let fast = match (self.types.get(ty), self.types.get(tgt)) {
            (Type::Tuple(ss), Type::Tuple(ts)) if ss.len() == ts.len() => {
                let (ss, ts) = (ss.clone(), ts.clone());
                (0..ss.len()).all(|j| j == idx || self.pure_total(ss[j], ts[j])).then(|| (ss[idx], ts[idx]))
            }
            _ => None,
        };
        match (fast, u) {
            (Some((s, t)), Value::Tuple(vs)) => {
                let x = vs[idx].clone();
                if ty != tgt {
                    self.counters.casts_executed += 1;
                }
                match self.cast_rep {
                    CastRep::TypeBased => self.cast_tb(x, s, t, label),
                    CastRep::Coercions if self.lazy => self.by_types(x, s, t, label),
                    CastRep::Coercions => {
                        let c = self.make(s, t, label);
                        self.coerce(x, &c)
                    }
                }
            }
            _ => match self.cast(v, src, tgt, label)? {
                Value::Tuple(vs) => Ok(vs[idx].clone()),
                other => fault(format!("projection from {other:?}")),
            },
        }
    }

    fn dyn_tuple_proj(&mut self, v: Value, i: usize, label: &Label) -> Res<Value> {
        let Value::Dyn(d) = v else {
            return fault("dynamic projection of an untagged value");
        };
        match (self.types.get(d.ty), &d.val) {
            (Type::Tuple(ts), Value::Tuple(vs)) if i < ts.len() => {
                let t = ts[i];
                let x = vs[i].clone();
                Ok(if t == TypeId::DYN { x } else { Value::dyn_of(x, t) })
            }
            _ => Err(Halt::Blame(label.clone())),
        }
    }

    fn next_token(&mut self) -> Res<String> {
        match self.input.get(self.input_pos) {
            Some(t) => {
                self.input_pos += 1;
                Ok(t.clone())
            }
            None => fault("input exhausted"),
        }
    }

    fn prim(&mut self, p: Prim, a: &[Value]) -> Res<Value> {
        use Prim::*;
        let int = |i: usize| a[i].as_int();
        let flt = |i: usize| a[i].as_float();
        Ok(match p {
            IAdd => Value::Int(int(0).wrapping_add(int(1))),
            ISub => Value::Int(int(0).wrapping_sub(int(1))),
            IMul => Value::Int(int(0).wrapping_mul(int(1))),
            IDiv | IRem => {
                if int(1) == 0 {
                    return fault("division by zero");
                }
                Value::Int(if p == IDiv { int(0).wrapping_div(int(1)) } else { int(0).wrapping_rem(int(1)) })
            }
            ILt => Value::Bool(int(0) < int(1)),
            IGt => Value::Bool(int(0) > int(1)),
            ILe => Value::Bool(int(0) <= int(1)),
            IGe => Value::Bool(int(0) >= int(1)),
            IEq => Value::Bool(int(0) == int(1)),
            FAdd => Value::Float(flt(0) + flt(1)),
            FSub => Value::Float(flt(0) - flt(1)),
            FMul => Value::Float(flt(0) * flt(1)),
            FDiv => Value::Float(flt(0) / flt(1)),
            FLt => Value::Bool(flt(0) < flt(1)),
            FGt => Value::Bool(flt(0) > flt(1)),
            FLe => Value::Bool(flt(0) <= flt(1)),
            FGe => Value::Bool(flt(0) >= flt(1)),
            FEq => Value::Bool(flt(0) == flt(1)),
            BEq => Value::Bool(a[0].as_bool() == a[1].as_bool()),
            UEq => Value::Bool(true),
            Not => Value::Bool(!a[0].as_bool()),
            Sqrt => Value::Float(flt(0).sqrt()),
            Sin => Value::Float(flt(0).sin()),
            Cos => Value::Float(flt(0).cos()),
            IntToFloat => Value::Float(int(0) as f64),
            FloatToInt => Value::Int(flt(0) as i64),
            ReadInt => {
                let t = self.next_token()?;
                match t.parse() {
                    Ok(n) => Value::Int(n),
                    Err(_) => return fault(format!("read-int: malformed input {t:?}")),
                }
            }
            ReadFloat => {
                let t = self.next_token()?;
                match t.parse() {
                    Ok(x) => Value::Float(x),
                    Err(_) => return fault(format!("read-float: malformed input {t:?}")),
                }
            }
        })
    }
}

fn vect_size(n: i64) -> Res<usize> {
    if n < 0 {
        fault(format!("negative vector size {n}"))
    } else {
        Ok(n as usize)
    }
}

/// `=` on dynamically typed operands compares base values of the same type.
fn dyn_eq(a: &Value, b: &Value, label: &Label) -> Res<Value> {
    let unwrap = |v: &Value| match v {
        Value::Dyn(d) => d.val.clone(),
        other => other.clone(),
    };
    Ok(Value::Bool(match (unwrap(a), unwrap(b)) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Unit, Value::Unit) => true,
        _ => return Err(Halt::Blame(label.clone())),
    }))
}
