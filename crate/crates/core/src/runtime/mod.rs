//! Instrumented evaluator for the cast intermediate language.
//!
//! One [`Machine`] owns the heap, the counters and a private copy of the type
//! table (monotonic casts intern new meets while running). Casts run either
//! as type-based casts, which nest proxies, or as coercions, which compose.

mod cast;
mod counters;
mod eval;
mod heap;
mod value;

use serde::{Deserialize, Serialize};

pub use counters::Counters;
pub use heap::{Cell, Heap, HeapFull, Pending};
pub use value::{Addr, Closure, DynBox, Env, FloatText, Frame, Payload, Proxy, Value};

use crate::coercion::{CoercionPool, Label};
use crate::frontend::ir::{Program, TopItem};
use crate::types::{Type, TypeId, TypeTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CastRep {
    TypeBased,
    Coercions,
}

impl CastRep {
    pub fn name(self) -> &'static str {
        match self {
            CastRep::TypeBased => "type-based",
            CastRep::Coercions => "coercions",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub cast_rep: CastRep,
    pub lazy_coercions: bool,
    /// Maximum nesting of function calls.
    pub max_depth: usize,
    /// Maximum number of heap cells, 0 for unbounded.
    pub heap_limit: usize,
    /// Record every rtti written to a monotonic cell.
    pub trace_rtti: bool,
    /// Whitespace separated tokens consumed by `read-int` / `read-float`.
    pub input: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cast_rep: CastRep::Coercions,
            lazy_coercions: false,
            max_depth: DEFAULT_MAX_DEPTH,
            heap_limit: 0,
            trace_rtti: false,
            input: Vec::new(),
        }
    }
}

pub const DEFAULT_MAX_DEPTH: usize = 1_000_000;

/// Why evaluation stopped early.
#[derive(Clone, Debug, PartialEq)]
pub enum Halt {
    Blame(Label),
    /// Monotonic rtti inconsistency.
    Error(Label),
    /// Not part of the language semantics: division by zero, bounds, stack
    /// depth, heap exhaustion, missing input.
    Fault(String),
}

pub type Res<T> = Result<T, Halt>;

/// Result of a run, in printable form so it can leave the evaluating thread.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "snake_case")]
pub enum Outcome {
    Result(String),
    Blame(String),
    DynamicError(String),
}

impl Outcome {
    /// Text printed on standard output.
    pub fn render(&self) -> String {
        match self {
            Outcome::Result(v) => v.clone(),
            Outcome::Blame(l) => format!("blame {l}"),
            Outcome::DynamicError(l) => format!("error: inconsistent types at {l}"),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Result(_) => 0,
            Outcome::Blame(_) => 2,
            Outcome::DynamicError(_) => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub outcome: Outcome,
    pub counters: Counters,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("runtime fault: {0}")]
pub struct RunError(pub String);

pub struct Machine<'p> {
    pub types: TypeTable,
    pub heap: Heap,
    pub counters: Counters,
    pub cast_rep: CastRep,
    pub lazy: bool,
    pool: &'p CoercionPool,
    globals: Vec<Option<Value>>,
    /// `(address, rtti)` for every allocation and rtti update, in order.
    pub trace: Option<Vec<(Addr, TypeId)>>,
    depth: usize,
    max_depth: usize,
    input: Vec<String>,
    input_pos: usize,
}

impl<'p> Machine<'p> {
    pub fn new(types: TypeTable, pool: &'p CoercionPool, globals: usize, config: &RunConfig) -> Self {
        Machine {
            types,
            heap: Heap::with_limit(config.heap_limit),
            counters: Counters::default(),
            cast_rep: config.cast_rep,
            lazy: config.lazy_coercions,
            pool,
            globals: vec![None; globals],
            trace: config.trace_rtti.then(Vec::new),
            depth: 0,
            max_depth: config.max_depth,
            input: config.input.clone(),
            input_pos: 0,
        }
    }

    /// Runs every top-level item in order and returns the last expression's value.
    pub fn run_items(&mut self, program: &Program) -> Res<Value> {
        let env = Env::default();
        let mut last = Value::Unit;
        for item in &program.items {
            match item {
                TopItem::Define(g, e) => {
                    let v = self.eval(e, &env)?;
                    self.settle()?;
                    self.globals[*g as usize] = Some(v);
                }
                TopItem::Expr(e) => {
                    last = self.eval(e, &env)?;
                    self.settle()?;
                }
            }
        }
        Ok(last)
    }

    /// Surface text of a value.
    pub fn render(&self, v: &Value) -> String {
        let mut out = String::new();
        self.render_into(v, &mut out);
        out
    }

    fn render_into(&self, v: &Value, out: &mut String) {
        match v {
            Value::Addr(a) => out.push_str(if self.heap.cell(*a).is_vector() { "#<vector>" } else { "#<box>" }),
            Value::RefProxy(p) => self.render_into(&p.inner, out),
            Value::Dyn(d) => self.render_into(&d.val, out),
            Value::Tuple(vs) => {
                out.push_str("(tuple");
                for v in vs.iter() {
                    out.push(' ');
                    self.render_into(v, out);
                }
                out.push(')');
            }
            other => out.push_str(&other.to_string()),
        }
    }

    /// Whether `v` is a value of type `t` given the current heap. References
    /// are checked by kind and, for monotonic cells, by rtti precision.
    pub fn inhabits(&self, v: &Value, t: TypeId) -> bool {
        match (v, self.types.get(t)) {
            (_, Type::Dyn) => match v {
                Value::Dyn(d) => d.ty != TypeId::DYN && self.inhabits(&d.val, d.ty),
                _ => false,
            },
            (Value::Int(_), Type::Base(crate::types::BaseType::Int))
            | (Value::Bool(_), Type::Base(crate::types::BaseType::Bool))
            | (Value::Float(_), Type::Base(crate::types::BaseType::Float))
            | (Value::Unit, Type::Base(crate::types::BaseType::Unit)) => true,
            (Value::Closure(c), Type::Fun(ps, _)) => c.lambda.arity == ps.len(),
            (Value::FunProxy(_), Type::Fun(..)) => true,
            (Value::Tuple(vs), Type::Tuple(ts)) => {
                vs.len() == ts.len() && vs.iter().zip(ts).all(|(v, t)| self.inhabits(v, *t))
            }
            (Value::Addr(a), Type::RefM(e)) => match self.heap.cell(*a) {
                Cell::Mono { rtti, .. } => self.types.precision_leq(*e, *rtti),
                _ => false,
            },
            (Value::Addr(a), Type::VectM(e)) => match self.heap.cell(*a) {
                Cell::MonoVec { rtti, .. } => self.types.precision_leq(*e, *rtti),
                _ => false,
            },
            (Value::Addr(a), Type::RefP(_)) => matches!(self.heap.cell(*a), Cell::Plain(_)),
            (Value::Addr(a), Type::VectP(_)) => matches!(self.heap.cell(*a), Cell::PlainVec(_)),
            (Value::RefProxy(_), Type::RefP(_) | Type::VectP(_)) => true,
            _ => false,
        }
    }

    /// Every settled monotonic cell holds values of its rtti.
    pub fn heap_is_sound(&self) -> bool {
        self.heap.cells().all(|(_, cell)| match cell {
            Cell::Mono { val, rtti, pending: None } => self.inhabits(val, *rtti),
            Cell::MonoVec { vals, rtti, pending: None } => vals.iter().all(|v| self.inhabits(v, *rtti)),
            _ => true,
        })
    }
}

/// Runs a compiled program on the current thread.
pub fn run_program(program: &Program, config: &RunConfig) -> Result<Run, RunError> {
    let globals = program.global_names.len();
    let mut m = Machine::new(program.types.clone(), &program.pool, globals, config);
    let outcome = match m.run_items(program) {
        Ok(v) => Outcome::Result(m.render(&v)),
        Err(Halt::Blame(l)) => Outcome::Blame(l.to_string()),
        Err(Halt::Error(l)) => Outcome::DynamicError(l.to_string()),
        Err(Halt::Fault(msg)) => return Err(RunError(msg)),
    };
    Ok(Run {
        outcome,
        counters: m.counters,
    })
}
