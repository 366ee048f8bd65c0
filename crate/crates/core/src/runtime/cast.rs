//! Applying casts and coercions to values, proxied reference access, and
//! monotonic heap casts with the evolving-heap worklist.

use std::rc::Rc;

use super::heap::{Cell, Pending};
use super::value::{Addr, Payload, Proxy, Value};
use super::{CastRep, Halt, Machine, Res};
use crate::coercion::{self, Coercion, Crcn, Label};
use crate::types::{Type, TypeId};

fn fault<T>(msg: impl Into<String>) -> Res<T> {
    Err(Halt::Fault(msg.into()))
}

impl Machine<'_> {
    /// A cast from the IR, in whichever representation the machine uses.
    pub fn cast(&mut self, v: Value, src: TypeId, tgt: TypeId, label: &Label) -> Res<Value> {
        if src == tgt {
            return Ok(v);
        }
        match self.cast_rep {
            CastRep::TypeBased => self.apply_cast(v, src, tgt, label),
            CastRep::Coercions if self.lazy => self.cast_by_types(v, src, tgt, label),
            CastRep::Coercions => {
                let c = self.make(src, tgt, label);
                self.apply_coercion(v, &c)
            }
        }
    }

    /// Type-based cast; function and reference casts nest proxies.
    pub fn apply_cast(&mut self, v: Value, src: TypeId, tgt: TypeId, label: &Label) -> Res<Value> {
        if src == tgt {
            return Ok(v);
        }
        self.counters.casts_executed += 1;
        self.cast_tb(v, src, tgt, label)
    }

    pub fn apply_coercion(&mut self, v: Value, c: &Crcn) -> Res<Value> {
        if c.is_id() {
            return Ok(v);
        }
        self.counters.casts_executed += 1;
        self.coerce(v, c)
    }

    /// Behaves as `apply_coercion(v, make(src, tgt, label))` but only builds
    /// the coercion when a proxy has to hold it.
    pub fn cast_by_types(&mut self, v: Value, src: TypeId, tgt: TypeId, label: &Label) -> Res<Value> {
        if src == tgt {
            return Ok(v);
        }
        self.counters.casts_executed += 1;
        self.by_types(v, src, tgt, label)
    }

    /// Runtime coercion creation.
    pub fn make(&mut self, src: TypeId, tgt: TypeId, label: &Label) -> Crcn {
        if src == tgt {
            return coercion::identity();
        }
        self.counters.coercions_created_at_runtime += 1;
        coercion::make_coercion(&self.types, src, tgt, label)
    }

    pub fn compose(&mut self, a: &Crcn, b: &Crcn) -> Crcn {
        self.counters.coercions_composed += 1;
        coercion::compose(&mut self.types, a, b)
    }

    fn untag(v: Value) -> Res<(Value, TypeId)> {
        match v {
            Value::Dyn(d) => Ok((d.val.clone(), d.ty)),
            other => fault(format!("expected a dynamically typed value, found {other:?}")),
        }
    }

    pub(super) fn cast_tb(&mut self, v: Value, src: TypeId, tgt: TypeId, label: &Label) -> Res<Value> {
        if src == tgt {
            return Ok(v);
        }
        if src == TypeId::DYN {
            let (u, ty) = Self::untag(v)?;
            return self.cast_tb(u, ty, tgt, label);
        }
        if tgt == TypeId::DYN {
            return Ok(Value::dyn_of(v, src));
        }
        let (s, t) = (self.types.get(src).clone(), self.types.get(tgt).clone());
        match (&s, &t) {
            (Type::Fun(ps, _), Type::Fun(qs, _)) if ps.len() == qs.len() => {
                let depth = v.fun_depth() + 1;
                self.counters.note_fun_proxy(depth);
                Ok(Value::FunProxy(Rc::new(Proxy {
                    inner: v,
                    payload: Payload::Cast { src, tgt, label: label.clone() },
                    depth,
                })))
            }
            (Type::Tuple(ss), Type::Tuple(ts)) if ss.len() == ts.len() => {
                let Value::Tuple(vs) = v else { return fault("tuple cast on a non-tuple") };
                let mut out = Vec::with_capacity(vs.len());
                for ((x, s), t) in vs.iter().zip(ss).zip(ts) {
                    out.push(self.cast_tb(x.clone(), *s, *t, label)?);
                }
                Ok(Value::tuple(out))
            }
            (Type::RefP(a), Type::RefP(b)) | (Type::VectP(a), Type::VectP(b)) => {
                let depth = v.ref_depth() + 1;
                self.counters.note_ref_proxy(depth);
                Ok(Value::RefProxy(Rc::new(Proxy {
                    inner: v,
                    payload: Payload::Cast { src: *a, tgt: *b, label: label.clone() },
                    depth,
                })))
            }
            (Type::RefM(_), Type::RefM(b)) | (Type::VectM(_), Type::VectM(b)) => {
                let a = Self::addr(&v)?;
                self.mono_cast(a, *b, label)?;
                Ok(v)
            }
            _ => Err(Halt::Blame(label.clone())),
        }
    }

    fn addr(v: &Value) -> Res<Addr> {
        match v {
            Value::Addr(a) => Ok(*a),
            other => fault(format!("expected an address, found {other:?}")),
        }
    }

    pub(super) fn coerce(&mut self, v: Value, c: &Crcn) -> Res<Value> {
        match &**c {
            Coercion::Id => Ok(v),
            Coercion::Proj { ty, label, rest } => {
                let (u, src) = Self::untag(v)?;
                let u = if self.lazy {
                    self.by_types(u, src, *ty, label)?
                } else {
                    let k = self.make(src, *ty, label);
                    self.coerce(u, &k)?
                };
                self.coerce(u, rest)
            }
            Coercion::Fail { src, label, tgt, pre } => self.fail(&v, *src, *tgt, label, pre.as_ref()),
            Coercion::Inj { mid, ty } => {
                let u = self.coerce(v, mid)?;
                Ok(Value::dyn_of(u, *ty))
            }
            Coercion::Fun { .. } => match v {
                Value::FunProxy(p) => {
                    let Payload::Coercion(old) = &p.payload else {
                        return fault("type-based proxy under coercions");
                    };
                    let composed = self.compose(old, c);
                    if composed.is_id() {
                        return Ok(p.inner.clone());
                    }
                    self.counters.note_fun_proxy(1);
                    Ok(Value::FunProxy(Rc::new(Proxy {
                        inner: p.inner.clone(),
                        payload: Payload::Coercion(composed),
                        depth: 1,
                    })))
                }
                Value::Closure(_) => {
                    self.counters.note_fun_proxy(1);
                    Ok(Value::FunProxy(Rc::new(Proxy {
                        inner: v,
                        payload: Payload::Coercion(c.clone()),
                        depth: 1,
                    })))
                }
                other => fault(format!("function coercion on {other:?}")),
            },
            Coercion::RefP { .. } | Coercion::VectP { .. } => match v {
                Value::RefProxy(p) => {
                    let Payload::Coercion(old) = &p.payload else {
                        return fault("type-based proxy under coercions");
                    };
                    let composed = self.compose(old, c);
                    if composed.is_id() {
                        return Ok(p.inner.clone());
                    }
                    self.counters.note_ref_proxy(1);
                    Ok(Value::RefProxy(Rc::new(Proxy {
                        inner: p.inner.clone(),
                        payload: Payload::Coercion(composed),
                        depth: 1,
                    })))
                }
                Value::Addr(_) => {
                    self.counters.note_ref_proxy(1);
                    Ok(Value::RefProxy(Rc::new(Proxy {
                        inner: v,
                        payload: Payload::Coercion(c.clone()),
                        depth: 1,
                    })))
                }
                other => fault(format!("reference coercion on {other:?}")),
            },
            Coercion::Tuple(cs) => {
                let Value::Tuple(vs) = v else { return fault("tuple coercion on a non-tuple") };
                if vs.len() != cs.len() {
                    return fault("tuple coercion arity mismatch");
                }
                let mut out = Vec::with_capacity(vs.len());
                for (x, c) in vs.iter().zip(cs) {
                    out.push(self.coerce(x.clone(), c)?);
                }
                Ok(Value::tuple(out))
            }
            Coercion::RefM { ty, label } | Coercion::VectM { ty, label } => {
                let a = Self::addr(&v)?;
                self.mono_cast(a, *ty, label)?;
                Ok(v)
            }
        }
    }

    /// Failure coercion. A monotonic source still gets its pending cast.
    pub(super) fn fail(&mut self, v: &Value, src: TypeId, tgt: TypeId, label: &Label, pre: Option<&Label>) -> Res<Value> {
        if let (Type::RefM(e) | Type::VectM(e), Value::Addr(a)) = (self.types.get(src), v) {
            let e = *e;
            self.mono_cast(*a, e, pre.unwrap_or(label))?;
        }
        if coercion::fail_is_dynamic_error(&self.types, src, tgt) {
            Err(Halt::Error(label.clone()))
        } else {
            Err(Halt::Blame(label.clone()))
        }
    }

    pub(super) fn by_types(&mut self, v: Value, src: TypeId, tgt: TypeId, label: &Label) -> Res<Value> {
        if src == tgt {
            return Ok(v);
        }
        if src == TypeId::DYN {
            let (u, ty) = Self::untag(v)?;
            return self.by_types(u, ty, tgt, label);
        }
        if tgt == TypeId::DYN {
            return Ok(Value::dyn_of(v, src));
        }
        let (s, t) = (self.types.get(src).clone(), self.types.get(tgt).clone());
        match (&s, &t) {
            (Type::Tuple(ss), Type::Tuple(ts)) if ss.len() == ts.len() => {
                let Value::Tuple(vs) = v else { return fault("tuple cast on a non-tuple") };
                let mut out = Vec::with_capacity(vs.len());
                for ((x, s), t) in vs.iter().zip(ss).zip(ts) {
                    out.push(self.by_types(x.clone(), *s, *t, label)?);
                }
                Ok(Value::tuple(out))
            }
            (Type::RefM(_), Type::RefM(b)) | (Type::VectM(_), Type::VectM(b)) => {
                let a = Self::addr(&v)?;
                self.mono_cast(a, *b, label)?;
                Ok(v)
            }
            (Type::Fun(ps, _), Type::Fun(qs, _)) if ps.len() == qs.len() => {
                let c = self.make(src, tgt, label);
                self.coerce(v, &c)
            }
            (Type::RefP(_), Type::RefP(_)) | (Type::VectP(_), Type::VectP(_)) => {
                let c = self.make(src, tgt, label);
                self.coerce(v, &c)
            }
            _ => self.fail(&v, src, tgt, label, None),
        }
    }

    /// Cast the monotonic cell at `a` towards element type `tgt`: the rtti
    /// becomes the meet and the contents get a pending cast.
    pub fn mono_cast(&mut self, a: Addr, tgt: TypeId, label: &Label) -> Res<()> {
        let old = match self.heap.cell(a).rtti() {
            Some(r) => r,
            None => return fault("monotonic cast on a proxied cell"),
        };
        let new = self.types.meet(old, tgt).map_err(|_| Halt::Error(label.clone()))?;
        if new == old {
            return Ok(());
        }
        let step = match (self.cast_rep, self.lazy) {
            (CastRep::Coercions, false) => Some(self.make(old, new, label)),
            _ => None,
        };
        let prev = match self.heap.cell_mut(a) {
            Cell::Mono { rtti, pending, .. } | Cell::MonoVec { rtti, pending, .. } => {
                *rtti = new;
                pending.take()
            }
            _ => unreachable!(),
        };
        let next = match (prev, step) {
            (None, Some(c)) => Pending::Coercion(c),
            (Some(Pending::Coercion(p)), Some(c)) => Pending::Coercion(self.compose(&p, &c)),
            (None, None) => Pending::Casts(vec![(old, new, label.clone())]),
            (Some(Pending::Casts(mut cs)), None) => {
                cs.push((old, new, label.clone()));
                Pending::Casts(cs)
            }
            _ => unreachable!("pending representation is fixed per run"),
        };
        match self.heap.cell_mut(a) {
            Cell::Mono { pending, .. } | Cell::MonoVec { pending, .. } => *pending = Some(next),
            _ => unreachable!(),
        }
        self.counters.rtti_updates += 1;
        if let Some(t) = &mut self.trace {
            t.push((a, new));
        }
        self.heap.worklist.push_back(a);
        Ok(())
    }

    fn apply_pending(&mut self, v: Value, p: &Pending) -> Res<Value> {
        match p {
            Pending::Coercion(c) => self.apply_coercion(v, c),
            Pending::Casts(cs) => {
                let mut v = v;
                for (s, t, l) in cs {
                    v = match self.cast_rep {
                        CastRep::TypeBased => self.apply_cast(v, *s, *t, l)?,
                        CastRep::Coercions => self.cast_by_types(v, *s, *t, l)?,
                    };
                }
                Ok(v)
            }
        }
    }

    /// Applies the pending cast of one queued cell. The result is committed
    /// only if the rtti did not move while the cast ran. Returns whether more
    /// work is queued.
    pub fn evolve_step(&mut self) -> Res<bool> {
        let Some(a) = self.heap.worklist.pop_front() else {
            return Ok(false);
        };
        let cell = self.heap.cell(a);
        let (Some(p), Some(rtti)) = (cell.pending().cloned(), cell.rtti()) else {
            return Ok(!self.heap.worklist.is_empty());
        };
        self.counters.heap_evolve_steps += 1;
        match self.heap.cell(a).clone() {
            Cell::Mono { val, .. } => {
                let v = self.apply_pending(val, &p)?;
                if let Cell::Mono { val, rtti: now, pending } = self.heap.cell_mut(a) {
                    if *now == rtti {
                        *val = v;
                        *pending = None;
                    }
                }
            }
            Cell::MonoVec { vals, .. } => {
                let mut out = Vec::with_capacity(vals.len());
                for v in vals {
                    out.push(self.apply_pending(v, &p)?);
                }
                if let Cell::MonoVec { vals, rtti: now, pending } = self.heap.cell_mut(a) {
                    if *now == rtti {
                        *vals = out;
                        *pending = None;
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(!self.heap.worklist.is_empty())
    }

    /// Drains the worklist so every monotonic cell is settled.
    pub fn settle(&mut self) -> Res<()> {
        while self.evolve_step()? {}
        Ok(())
    }

    // Proxied references and vectors.

    pub fn box_read(&mut self, r: &Value) -> Res<Value> {
        self.counters.ref_reads += 1;
        self.box_read_at(r)
    }

    fn box_read_at(&mut self, r: &Value) -> Res<Value> {
        match r {
            Value::Addr(a) => match self.heap.cell(*a) {
                Cell::Plain(v) => Ok(v.clone()),
                _ => fault("proxied read of a non-box cell"),
            },
            Value::RefProxy(p) => match &p.payload {
                Payload::Cast { src, tgt, label } => {
                    let v = self.box_read_at(&p.inner)?;
                    self.apply_cast(v, *src, *tgt, label)
                }
                Payload::Coercion(c) => {
                    let Coercion::RefP { read, .. } = &**c else { return fault("box proxy without a box coercion") };
                    let v = self.box_read_at(&p.inner)?;
                    self.apply_coercion(v, read)
                }
            },
            other => fault(format!("box read on {other:?}")),
        }
    }

    pub fn box_write(&mut self, r: &Value, v: Value) -> Res<()> {
        self.counters.ref_writes += 1;
        self.box_write_at(r, v)
    }

    fn box_write_at(&mut self, r: &Value, v: Value) -> Res<()> {
        match r {
            Value::Addr(a) => match self.heap.cell_mut(*a) {
                Cell::Plain(slot) => {
                    *slot = v;
                    Ok(())
                }
                _ => fault("proxied write of a non-box cell"),
            },
            Value::RefProxy(p) => match &p.payload {
                Payload::Cast { src, tgt, label } => {
                    let v = self.apply_cast(v, *tgt, *src, label)?;
                    self.box_write_at(&p.inner, v)
                }
                Payload::Coercion(c) => {
                    let Coercion::RefP { write, .. } = &**c else { return fault("box proxy without a box coercion") };
                    let v = self.apply_coercion(v, write)?;
                    self.box_write_at(&p.inner, v)
                }
            },
            other => fault(format!("box write on {other:?}")),
        }
    }

    fn index(len: usize, i: i64) -> Res<usize> {
        if i < 0 || i as usize >= len {
            fault(format!("vector index {i} out of bounds for length {len}"))
        } else {
            Ok(i as usize)
        }
    }

    pub fn vect_read(&mut self, r: &Value, i: i64) -> Res<Value> {
        self.counters.ref_reads += 1;
        self.vect_read_at(r, i)
    }

    fn vect_read_at(&mut self, r: &Value, i: i64) -> Res<Value> {
        match r {
            Value::Addr(a) => match self.heap.cell(*a) {
                Cell::PlainVec(vs) => Ok(vs[Self::index(vs.len(), i)?].clone()),
                _ => fault("proxied read of a non-vector cell"),
            },
            Value::RefProxy(p) => match &p.payload {
                Payload::Cast { src, tgt, label } => {
                    let v = self.vect_read_at(&p.inner, i)?;
                    self.apply_cast(v, *src, *tgt, label)
                }
                Payload::Coercion(c) => {
                    let Coercion::VectP { read, .. } = &**c else {
                        return fault("vector proxy without a vector coercion");
                    };
                    let v = self.vect_read_at(&p.inner, i)?;
                    self.apply_coercion(v, read)
                }
            },
            other => fault(format!("vector read on {other:?}")),
        }
    }

    pub fn vect_write(&mut self, r: &Value, i: i64, v: Value) -> Res<()> {
        self.counters.ref_writes += 1;
        self.vect_write_at(r, i, v)
    }

    fn vect_write_at(&mut self, r: &Value, i: i64, v: Value) -> Res<()> {
        match r {
            Value::Addr(a) => match self.heap.cell_mut(*a) {
                Cell::PlainVec(vs) => {
                    let k = Self::index(vs.len(), i)?;
                    vs[k] = v;
                    Ok(())
                }
                _ => fault("proxied write of a non-vector cell"),
            },
            Value::RefProxy(p) => match &p.payload {
                Payload::Cast { src, tgt, label } => {
                    let v = self.apply_cast(v, *tgt, *src, label)?;
                    self.vect_write_at(&p.inner, i, v)
                }
                Payload::Coercion(c) => {
                    let Coercion::VectP { write, .. } = &**c else {
                        return fault("vector proxy without a vector coercion");
                    };
                    let v = self.apply_coercion(v, write)?;
                    self.vect_write_at(&p.inner, i, v)
                }
            },
            other => fault(format!("vector write on {other:?}")),
        }
    }

    pub fn vect_len(&self, r: &Value) -> Res<i64> {
        match r {
            Value::Addr(a) => match self.heap.cell(*a) {
                Cell::PlainVec(vs) | Cell::MonoVec { vals: vs, .. } => Ok(vs.len() as i64),
                _ => fault("vector-length of a box"),
            },
            Value::RefProxy(p) => self.vect_len(&p.inner),
            other => fault(format!("vector-length on {other:?}")),
        }
    }

    // Monotonic references and vectors.

    fn mono_slot(&self, r: &Value, i: Option<i64>) -> Res<(Value, TypeId)> {
        let a = Self::addr(r)?;
        match (self.heap.cell(a), i) {
            (Cell::Mono { val, rtti, .. }, None) => Ok((val.clone(), *rtti)),
            (Cell::MonoVec { vals, rtti, .. }, Some(i)) => Ok((vals[Self::index(vals.len(), i)?].clone(), *rtti)),
            _ => fault("monotonic access to the wrong kind of cell"),
        }
    }

    fn mono_store(&mut self, r: &Value, i: Option<i64>, v: Value) -> Res<()> {
        let a = Self::addr(r)?;
        match (self.heap.cell_mut(a), i) {
            (Cell::Mono { val, .. }, None) => *val = v,
            (Cell::MonoVec { vals, .. }, Some(i)) => {
                let k = Self::index(vals.len(), i)?;
                vals[k] = v;
            }
            _ => return fault("monotonic access to the wrong kind of cell"),
        }
        Ok(())
    }

    /// Read of a fully static monotonic reference: no cast.
    pub fn mono_read(&mut self, r: &Value, i: Option<i64>) -> Res<Value> {
        self.counters.ref_reads += 1;
        Ok(self.mono_slot(r, i)?.0)
    }

    /// Read at a partially dynamic type: cast from the rtti to `expect`.
    pub fn mono_read_typed(&mut self, r: &Value, i: Option<i64>, expect: TypeId, label: &Label) -> Res<Value> {
        self.counters.ref_reads += 1;
        let (v, rtti) = self.mono_slot(r, i)?;
        self.cast(v, rtti, expect, label)
    }

    pub fn mono_write(&mut self, r: &Value, i: Option<i64>, v: Value) -> Res<()> {
        self.counters.ref_writes += 1;
        self.mono_store(r, i, v)
    }

    /// Write at a partially dynamic type: cast to the current rtti, and store
    /// only if the rtti did not change while casting.
    pub fn mono_write_typed(&mut self, r: &Value, i: Option<i64>, v: Value, stated: TypeId, label: &Label) -> Res<()> {
        self.counters.ref_writes += 1;
        let a = Self::addr(r)?;
        let rtti = self.heap.cell(a).rtti().ok_or_else(|| Halt::Fault("typed write to a proxied cell".into()))?;
        let v = self.cast(v, stated, rtti, label)?;
        if self.heap.cell(a).rtti() == Some(rtti) {
            self.mono_store(r, i, v)?;
        }
        Ok(())
    }
}
