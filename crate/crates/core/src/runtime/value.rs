use std::fmt;
use std::rc::Rc;

use crate::coercion::{Crcn, Label};
use crate::frontend::ir::Lambda;
use crate::types::TypeId;

/// Heap address. Refs and vectors share one address space.
pub type Addr = u32;

#[derive(Clone, Debug)]
pub enum Value {
    Unit,
    Int(i64),
    Float(f64),
    Bool(bool),
    Closure(Rc<Closure>),
    FunProxy(Rc<Proxy>),
    Addr(Addr),
    RefProxy(Rc<Proxy>),
    Tuple(Rc<[Value]>),
    /// A value injected into `Dyn` together with its runtime type, never `Dyn`.
    Dyn(Rc<DynBox>),
}

#[derive(Debug)]
pub struct Closure {
    pub lambda: Rc<Lambda>,
    pub env: Env,
}

#[derive(Debug)]
pub struct DynBox {
    pub val: Value,
    pub ty: TypeId,
}

/// What a proxy does to the values crossing it.
#[derive(Clone, Debug)]
pub enum Payload {
    /// Type-based: for function proxies the two function types, for reference
    /// proxies the two element types.
    Cast { src: TypeId, tgt: TypeId, label: Label },
    Coercion(Crcn),
}

/// Wrapper around a closure or a reference. `depth` counts the proxies in the
/// chain including this one.
#[derive(Debug)]
pub struct Proxy {
    pub inner: Value,
    pub payload: Payload,
    pub depth: u32,
}

/// Immutable environment frame chain.
#[derive(Clone, Debug, Default)]
pub struct Env(pub Option<Rc<Frame>>);

#[derive(Debug)]
pub struct Frame {
    pub slots: Vec<Value>,
    pub parent: Env,
}

impl Env {
    pub fn push(&self, slots: Vec<Value>) -> Env {
        Env(Some(Rc::new(Frame {
            slots,
            parent: self.clone(),
        })))
    }

    pub fn lookup(&self, depth: u32, idx: u32) -> &Value {
        let mut frame = self.0.as_ref().expect("unbound local");
        for _ in 0..depth {
            frame = frame.parent.0.as_ref().expect("unbound local");
        }
        &frame.slots[idx as usize]
    }
}

impl Value {
    pub fn dyn_of(val: Value, ty: TypeId) -> Value {
        debug_assert!(ty != TypeId::DYN);
        Value::Dyn(Rc::new(DynBox { val, ty }))
    }

    pub fn tuple(vals: Vec<Value>) -> Value {
        Value::Tuple(vals.into())
    }

    pub fn fun_depth(&self) -> u32 {
        match self {
            Value::FunProxy(p) => p.depth,
            _ => 0,
        }
    }

    pub fn ref_depth(&self) -> u32 {
        match self {
            Value::RefProxy(p) => p.depth,
            _ => 0,
        }
    }

    pub fn as_int(&self) -> i64 {
        match self {
            Value::Int(n) => *n,
            v => panic!("expected an Int, found {v:?}"),
        }
    }

    pub fn as_float(&self) -> f64 {
        match self {
            Value::Float(x) => *x,
            v => panic!("expected a Float, found {v:?}"),
        }
    }

    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            v => panic!("expected a Bool, found {v:?}"),
        }
    }
}

/// Surface-syntax printing. References print opaquely since their contents
/// live in the heap.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Float(x) => write!(f, "{}", FloatText(*x)),
            Value::Bool(true) => write!(f, "#t"),
            Value::Bool(false) => write!(f, "#f"),
            Value::Closure(_) | Value::FunProxy(_) => write!(f, "#<procedure>"),
            Value::Addr(_) | Value::RefProxy(_) => write!(f, "#<reference>"),
            Value::Tuple(vs) => {
                write!(f, "(tuple")?;
                for v in vs.iter() {
                    write!(f, " {v}")?;
                }
                write!(f, ")")
            }
            Value::Dyn(d) => d.val.fmt(f),
        }
    }
}

/// Floats always carry a decimal point or exponent.
pub struct FloatText(pub f64);

impl fmt::Display for FloatText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        if x.is_nan() {
            write!(f, "+nan.0")
        } else if x.is_infinite() {
            write!(f, "{}inf.0", if x > 0.0 { "+" } else { "-" })
        } else if x.fract() == 0.0 && x.abs() < 1e16 {
            write!(f, "{x:.1}")
        } else {
            write!(f, "{x}")
        }
    }
}
