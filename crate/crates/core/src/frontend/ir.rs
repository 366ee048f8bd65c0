//! Explicitly cast intermediate language.
//!
//! Variables are resolved to de Bruijn style `(depth, idx)` pairs: each lambda
//! call, `let` and `repeat` iteration pushes one frame.

use std::rc::Rc;

use crate::coercion::{CoercionId, CoercionPool, Label};
use crate::types::{RefMode, TypeId, TypeTable};

#[derive(Debug)]
pub struct Lambda {
    pub arity: usize,
    pub body: Expr,
    pub name: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prim {
    IAdd,
    ISub,
    IMul,
    IDiv,
    IRem,
    ILt,
    IGt,
    ILe,
    IGe,
    IEq,
    FAdd,
    FSub,
    FMul,
    FDiv,
    FLt,
    FGt,
    FLe,
    FGe,
    FEq,
    BEq,
    UEq,
    Not,
    Sqrt,
    Sin,
    Cos,
    IntToFloat,
    FloatToInt,
    ReadInt,
    ReadFloat,
}

impl Prim {
    pub fn name(self) -> &'static str {
        use Prim::*;
        match self {
            IAdd => "+",
            ISub => "-",
            IMul => "*",
            IDiv => "/",
            IRem => "%",
            ILt => "<",
            IGt => ">",
            ILe => "<=",
            IGe => ">=",
            IEq | BEq | UEq => "=",
            FAdd => "+.",
            FSub => "-.",
            FMul => "*.",
            FDiv => "/.",
            FLt => "<.",
            FGt => ">.",
            FLe => "<=.",
            FGe => ">=.",
            FEq => "=.",
            Not => "not",
            Sqrt => "sqrt",
            Sin => "sin",
            Cos => "cos",
            IntToFloat => "int->float",
            FloatToInt => "float->int",
            ReadInt => "read-int",
            ReadFloat => "read-float",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lit {
    Unit,
    Int(i64),
    Float(f64),
    Bool(bool),
}

/// Reference operation performed inline on a cast reference, without
/// allocating the proxy the cast would create.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InlineRefKind {
    BoxRead,
    BoxWrite,
    VectRead,
    VectWrite,
}

#[derive(Clone, Debug)]
pub enum Expr {
    Lit(Lit),
    Local(u32, u32),
    Global(u32),
    Lambda(Rc<Lambda>),
    App(Box<Expr>, Vec<Expr>),
    Let(Vec<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Begin(Vec<Expr>, Box<Expr>),
    While(Box<Expr>, Box<Expr>),
    /// Binds the counter in a fresh frame for each iteration of `[from, to)`.
    Repeat(Box<Expr>, Box<Expr>, Box<Expr>),
    Prim(Prim, Vec<Expr>),
    /// `=` with a dynamically typed operand.
    DynEq(Box<Expr>, Box<Expr>, Label),
    Tuple(Vec<Expr>),
    TupleProj(Box<Expr>, usize),
    /// Projection from a dynamically typed tuple; the component is returned
    /// injected into `Dyn`.
    DynTupleProj(Box<Expr>, usize, Label),
    Cast { expr: Box<Expr>, src: TypeId, tgt: TypeId, label: Label },

    MkBoxP(Box<Expr>),
    UnboxP(Box<Expr>),
    SetBoxP(Box<Expr>, Box<Expr>),
    MkVectP(Box<Expr>, Box<Expr>),
    VectRefP(Box<Expr>, Box<Expr>),
    VectSetP(Box<Expr>, Box<Expr>, Box<Expr>),

    /// Carries the element type used as the initial rtti.
    MkBoxM(Box<Expr>, TypeId),
    UnboxM(Box<Expr>),
    UnboxTM(Box<Expr>, TypeId, Label),
    SetBoxM(Box<Expr>, Box<Expr>),
    SetBoxTM(Box<Expr>, Box<Expr>, TypeId, Label),
    MkVectM(Box<Expr>, Box<Expr>, TypeId),
    VectRefM(Box<Expr>, Box<Expr>),
    VectRefTM(Box<Expr>, Box<Expr>, TypeId, Label),
    VectSetM(Box<Expr>, Box<Expr>, Box<Expr>),
    VectSetTM(Box<Expr>, Box<Expr>, Box<Expr>, TypeId, Label),
    VectLen(Box<Expr>),

    /// `((cast f src tgt label) args..)` without building the function proxy.
    InlineApp { fun: Box<Expr>, src: TypeId, tgt: TypeId, args: Vec<Expr>, label: Label },
    /// Proxied box or vector access through a cast of the reference. `src`
    /// and `tgt` are the reference types of the elided cast; `args` holds the
    /// index and/or written value.
    InlineRef { kind: InlineRefKind, target: Box<Expr>, src: TypeId, tgt: TypeId, args: Vec<Expr>, label: Label },
    /// `(tuple-proj (cast e src tgt label) idx)` casting only the needed
    /// component when the others cannot fail.
    InlineTupleProj { expr: Box<Expr>, src: TypeId, tgt: TypeId, idx: usize, label: Label },

    /// Specialized `Dyn ⇒ B` for a base type `B`.
    ProjectBase(Box<Expr>, TypeId, Label),
    /// Specialized `I ⇒ Dyn`.
    Inject(Box<Expr>, TypeId),
    ApplyCoercion(Box<Expr>, CoercionId),
}

#[derive(Clone, Debug)]
pub enum TopItem {
    Define(u32, Expr),
    Expr(Expr),
}

/// A whole program after cast insertion.
#[derive(Clone, Debug)]
pub struct Program {
    pub types: TypeTable,
    pub pool: CoercionPool,
    pub global_names: Vec<String>,
    pub items: Vec<TopItem>,
    pub ref_mode: RefMode,
    /// Type of the last top-level expression, `Unit` if there is none.
    pub result_type: TypeId,
}

impl Expr {
    pub fn boxed(self) -> Box<Expr> {
        Box::new(self)
    }

    /// Calls `f` on every direct child expression.
    pub fn for_each_child(&self, f: &mut dyn FnMut(&Expr)) {
        use Expr::*;
        match self {
            Lit(_) | Local(..) | Global(_) => {}
            Lambda(l) => f(&l.body),
            App(a, bs) | InlineApp { fun: a, args: bs, .. } | InlineRef { target: a, args: bs, .. } => {
                f(a);
                bs.iter().for_each(f);
            }
            Let(bs, a) | Begin(bs, a) => {
                bs.iter().for_each(&mut *f);
                f(a);
            }
            If(a, b, c) | Repeat(a, b, c) | VectSetP(a, b, c) | VectSetM(a, b, c) | VectSetTM(a, b, c, ..) => {
                f(a);
                f(b);
                f(c);
            }
            While(a, b)
            | DynEq(a, b, _)
            | SetBoxP(a, b)
            | MkVectP(a, b)
            | VectRefP(a, b)
            | SetBoxM(a, b)
            | SetBoxTM(a, b, ..)
            | MkVectM(a, b, _)
            | VectRefM(a, b)
            | VectRefTM(a, b, ..) => {
                f(a);
                f(b);
            }
            Prim(_, bs) | Tuple(bs) => bs.iter().for_each(f),
            TupleProj(a, _)
            | DynTupleProj(a, ..)
            | Cast { expr: a, .. }
            | MkBoxP(a)
            | UnboxP(a)
            | MkBoxM(a, _)
            | UnboxM(a)
            | UnboxTM(a, ..)
            | VectLen(a)
            | InlineTupleProj { expr: a, .. }
            | ProjectBase(a, ..)
            | Inject(a, _)
            | ApplyCoercion(a, _) => f(a),
        }
    }

    /// Number of `Cast` nodes in the tree, counting lambda bodies.
    pub fn count_casts(&self) -> usize {
        let mut n = usize::from(matches!(self, Expr::Cast { .. }));
        self.for_each_child(&mut |c| n += c.count_casts());
        n
    }
}

impl Program {
    pub fn count_casts(&self) -> usize {
        self.items
            .iter()
            .map(|i| match i {
                TopItem::Define(_, e) | TopItem::Expr(e) => e.count_casts(),
            })
            .sum()
    }
}
