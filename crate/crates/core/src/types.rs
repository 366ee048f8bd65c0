//! The gradual type algebra.
//!
//! Types are hash-consed into a [`TypeTable`]: every structurally distinct
//! type gets exactly one [`TypeId`], so type equality is id equality. All
//! operations (consistency, meet, precision) work on ids and recurse through
//! the table.

use std::collections::HashMap;
use std::fmt;

/// Handle for an interned type. Equal ids mean structurally equal types.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TypeId(u32);

impl TypeId {
    pub const DYN: TypeId = TypeId(0);
    pub const INT: TypeId = TypeId(1);
    pub const BOOL: TypeId = TypeId(2);
    pub const FLOAT: TypeId = TypeId(3);
    pub const UNIT: TypeId = TypeId(4);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BaseType {
    Int,
    Bool,
    Float,
    Unit,
}

impl BaseType {
    pub fn id(self) -> TypeId {
        match self {
            BaseType::Int => TypeId::INT,
            BaseType::Bool => TypeId::BOOL,
            BaseType::Float => TypeId::FLOAT,
            BaseType::Unit => TypeId::UNIT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseType::Int => "Int",
            BaseType::Bool => "Bool",
            BaseType::Float => "Float",
            BaseType::Unit => "Unit",
        }
    }
}

/// Which reference semantics a program is compiled under. The surface
/// constructors `(Ref T)` and `(Vect T)` resolve to the proxied or the
/// monotonic variant depending on this flag.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefMode {
    Proxied,
    Monotonic,
}

/// One node of a type. Children are already interned.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Type {
    Dyn,
    Base(BaseType),
    Fun(Vec<TypeId>, TypeId),
    Tuple(Vec<TypeId>),
    RefP(TypeId),
    RefM(TypeId),
    VectP(TypeId),
    VectM(TypeId),
}

impl Type {
    /// Element type of a reference or vector type.
    pub fn elem(&self) -> Option<TypeId> {
        match *self {
            Type::RefP(t) | Type::RefM(t) | Type::VectP(t) | Type::VectM(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_monotonic(&self) -> bool {
        matches!(self, Type::RefM(_) | Type::VectM(_))
    }

    fn children(&self) -> Vec<TypeId> {
        match self {
            Type::Dyn | Type::Base(_) => vec![],
            Type::Fun(ps, r) => ps.iter().copied().chain(std::iter::once(*r)).collect(),
            Type::Tuple(ts) => ts.clone(),
            Type::RefP(t) | Type::RefM(t) | Type::VectP(t) | Type::VectM(t) => vec![*t],
        }
    }

    /// Rebuild this node with new children (same shape, same order as `children`).
    fn with_children(&self, kids: &[TypeId]) -> Type {
        match self {
            Type::Dyn | Type::Base(_) => self.clone(),
            Type::Fun(ps, _) => Type::Fun(kids[..ps.len()].to_vec(), kids[ps.len()]),
            Type::Tuple(_) => Type::Tuple(kids.to_vec()),
            Type::RefP(_) => Type::RefP(kids[0]),
            Type::RefM(_) => Type::RefM(kids[0]),
            Type::VectP(_) => Type::VectP(kids[0]),
            Type::VectM(_) => Type::VectM(kids[0]),
        }
    }

    /// Constructors agree on head and arity.
    fn same_head(&self, other: &Type) -> bool {
        match (self, other) {
            (Type::Fun(a, _), Type::Fun(b, _)) => a.len() == b.len(),
            (Type::Tuple(a), Type::Tuple(b)) => a.len() == b.len(),
            (Type::RefP(_), Type::RefP(_))
            | (Type::RefM(_), Type::RefM(_))
            | (Type::VectP(_), Type::VectP(_))
            | (Type::VectM(_), Type::VectM(_)) => true,
            (Type::Base(a), Type::Base(b)) => a == b,
            (Type::Dyn, Type::Dyn) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, thiserror::Error)]
#[error("inconsistent types")]
pub struct Inconsistent;

#[derive(Clone, Debug)]
struct Entry {
    ty: Type,
    is_static: bool,
    nodes: u32,
}

/// Hash-consing table for types, plus a memo for meets.
#[derive(Clone, Debug)]
pub struct TypeTable {
    entries: Vec<Entry>,
    index: HashMap<Type, TypeId>,
    meets: HashMap<(TypeId, TypeId), Option<TypeId>>,
}

impl Default for TypeTable {
    fn default() -> Self {
        Self::new()
    }
}

impl TypeTable {
    pub fn new() -> Self {
        let mut table = TypeTable {
            entries: Vec::new(),
            index: HashMap::new(),
            meets: HashMap::new(),
        };
        // Order fixes the well-known ids on `TypeId`.
        for t in [
            Type::Dyn,
            Type::Base(BaseType::Int),
            Type::Base(BaseType::Bool),
            Type::Base(BaseType::Float),
            Type::Base(BaseType::Unit),
        ] {
            table.intern(t);
        }
        table
    }

    pub fn intern(&mut self, ty: Type) -> TypeId {
        if let Some(&id) = self.index.get(&ty) {
            return id;
        }
        let kids = ty.children();
        let is_static = !matches!(ty, Type::Dyn) && kids.iter().all(|k| self.is_static(*k));
        let nodes = 1 + kids.iter().map(|k| self.node_count(*k)).sum::<u32>();
        let id = TypeId(self.entries.len() as u32);
        self.entries.push(Entry {
            ty: ty.clone(),
            is_static,
            nodes,
        });
        self.index.insert(ty, id);
        id
    }

    pub fn get(&self, id: TypeId) -> &Type {
        &self.entries[id.index()].ty
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fun(&mut self, params: Vec<TypeId>, ret: TypeId) -> TypeId {
        self.intern(Type::Fun(params, ret))
    }

    pub fn tuple(&mut self, elems: Vec<TypeId>) -> TypeId {
        debug_assert!(elems.len() >= 2, "tuples have arity >= 2");
        self.intern(Type::Tuple(elems))
    }

    pub fn reference(&mut self, mode: RefMode, elem: TypeId) -> TypeId {
        match mode {
            RefMode::Proxied => self.intern(Type::RefP(elem)),
            RefMode::Monotonic => self.intern(Type::RefM(elem)),
        }
    }

    pub fn vector(&mut self, mode: RefMode, elem: TypeId) -> TypeId {
        match mode {
            RefMode::Proxied => self.intern(Type::VectP(elem)),
            RefMode::Monotonic => self.intern(Type::VectM(elem)),
        }
    }

    /// True iff `Dyn` occurs nowhere in the type.
    pub fn is_static(&self, id: TypeId) -> bool {
        self.entries[id.index()].is_static
    }

    /// Number of type constructor nodes, counting `Dyn` and base types as one.
    pub fn node_count(&self, id: TypeId) -> u32 {
        self.entries[id.index()].nodes
    }

    /// Number of non-`Dyn` nodes.
    pub fn static_node_count(&self, id: TypeId) -> u32 {
        match self.get(id) {
            Type::Dyn => 0,
            t => 1 + t.children().iter().map(|k| self.static_node_count(*k)).sum::<u32>(),
        }
    }

    pub fn consistent(&self, a: TypeId, b: TypeId) -> bool {
        if a == b || a == TypeId::DYN || b == TypeId::DYN {
            return true;
        }
        let (ta, tb) = (self.get(a), self.get(b));
        if !ta.same_head(tb) {
            return false;
        }
        ta.children()
            .into_iter()
            .zip(tb.children())
            .all(|(x, y)| self.consistent(x, y))
    }

    /// Greatest lower bound with respect to precision. Defined exactly when
    /// the two types are consistent.
    pub fn meet(&mut self, a: TypeId, b: TypeId) -> Result<TypeId, Inconsistent> {
        if a == b || b == TypeId::DYN {
            return Ok(a);
        }
        if a == TypeId::DYN {
            return Ok(b);
        }
        if let Some(hit) = self.meets.get(&(a, b)) {
            return hit.ok_or(Inconsistent);
        }
        let result = self.meet_uncached(a, b);
        self.meets.insert((a, b), result.ok());
        result
    }

    fn meet_uncached(&mut self, a: TypeId, b: TypeId) -> Result<TypeId, Inconsistent> {
        let (ta, tb) = (self.get(a).clone(), self.get(b).clone());
        if !ta.same_head(&tb) {
            return Err(Inconsistent);
        }
        let kids = ta
            .children()
            .into_iter()
            .zip(tb.children())
            .map(|(x, y)| self.meet(x, y))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.intern(ta.with_children(&kids)))
    }

    /// `a ⊑ b`: `a` is less than or equally precise as `b`.
    pub fn precision_leq(&self, a: TypeId, b: TypeId) -> bool {
        if a == b || a == TypeId::DYN {
            return true;
        }
        let (ta, tb) = (self.get(a), self.get(b));
        if !ta.same_head(tb) {
            return false;
        }
        ta.children()
            .into_iter()
            .zip(tb.children())
            .all(|(x, y)| self.precision_leq(x, y))
    }

    /// Every type less or equally precise than `t`, in a deterministic order
    /// (`Dyn` first, then the constructor with child choices in lexicographic
    /// order). Fails if the lattice would exceed `cap` elements.
    pub fn less_precise(&mut self, t: TypeId, cap: usize) -> Result<Vec<TypeId>, LatticeTooLarge> {
        let ty = self.get(t).clone();
        let kids = ty.children();
        let mut out = vec![TypeId::DYN];
        if matches!(ty, Type::Dyn) {
            return Ok(out);
        }
        let mut choices = Vec::with_capacity(kids.len());
        let mut total: usize = 1;
        for k in &kids {
            let c = self.less_precise(*k, cap)?;
            total = total.saturating_mul(c.len());
            if total.saturating_add(1) > cap {
                return Err(LatticeTooLarge { cap });
            }
            choices.push(c);
        }
        // Odometer over the child choices.
        let mut idx = vec![0usize; kids.len()];
        loop {
            let picked: Vec<TypeId> = idx.iter().zip(&choices).map(|(i, c)| c[*i]).collect();
            out.push(self.intern(ty.with_children(&picked)));
            let mut pos = kids.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < choices[pos].len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    pub fn display(&self, id: TypeId) -> TypeDisplay<'_> {
        TypeDisplay { table: self, id }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, thiserror::Error)]
#[error("type lattice exceeds {cap} elements")]
pub struct LatticeTooLarge {
    pub cap: usize,
}

/// Surface-syntax printer for interned types.
pub struct TypeDisplay<'a> {
    table: &'a TypeTable,
    id: TypeId,
}

impl fmt::Display for TypeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.table;
        let sub = |id| t.display(id);
        match t.get(self.id) {
            Type::Dyn => write!(f, "Dyn"),
            Type::Base(b) => write!(f, "{}", b.name()),
            Type::Fun(ps, r) => {
                write!(f, "(->")?;
                for p in ps {
                    write!(f, " {}", sub(*p))?;
                }
                write!(f, " {})", sub(*r))
            }
            Type::Tuple(ts) => {
                write!(f, "(Tuple")?;
                for e in ts {
                    write!(f, " {}", sub(*e))?;
                }
                write!(f, ")")
            }
            Type::RefP(e) | Type::RefM(e) => write!(f, "(Ref {})", sub(*e)),
            Type::VectP(e) | Type::VectM(e) => write!(f, "(Vect {})", sub(*e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrow(t: &mut TypeTable, p: TypeId, r: TypeId) -> TypeId {
        t.fun(vec![p], r)
    }

    #[test]
    fn intern_is_idempotent_and_structural() {
        let mut t = TypeTable::new();
        assert_eq!(t.intern(Type::Base(BaseType::Int)), TypeId::INT);
        let a = arrow(&mut t, TypeId::INT, TypeId::INT);
        let b = arrow(&mut t, TypeId::INT, TypeId::BOOL);
        assert_ne!(a, b);
        let d1 = arrow(&mut t, TypeId::DYN, TypeId::DYN);
        let d2 = t.intern(Type::Fun(vec![TypeId::DYN], TypeId::DYN));
        assert_eq!(d1, d2);
        assert_eq!(t.intern(t.get(a).clone()), a);
    }

    #[test]
    fn consistency_examples() {
        let mut t = TypeTable::new();
        let ii = arrow(&mut t, TypeId::INT, TypeId::INT);
        let id = arrow(&mut t, TypeId::INT, TypeId::DYN);
        let db = arrow(&mut t, TypeId::DYN, TypeId::BOOL);
        assert!(t.consistent(TypeId::DYN, ii));
        assert!(!t.consistent(TypeId::INT, TypeId::BOOL));
        assert!(t.consistent(id, db));
        // non-transitivity witness
        assert!(t.consistent(TypeId::INT, TypeId::DYN));
        assert!(t.consistent(TypeId::DYN, TypeId::BOOL));
        assert!(!t.consistent(TypeId::INT, TypeId::BOOL));
    }

    #[test]
    fn meet_examples() {
        let mut t = TypeTable::new();
        let id = arrow(&mut t, TypeId::INT, TypeId::DYN);
        let db = arrow(&mut t, TypeId::DYN, TypeId::BOOL);
        let ib = arrow(&mut t, TypeId::INT, TypeId::BOOL);
        assert_eq!(t.meet(TypeId::DYN, TypeId::INT), Ok(TypeId::INT));
        assert_eq!(t.meet(id, db), Ok(ib));
        assert_eq!(t.meet(TypeId::INT, TypeId::BOOL), Err(Inconsistent));
        let r1 = t.intern(Type::RefP(TypeId::INT));
        let r2 = t.intern(Type::RefM(TypeId::INT));
        assert_eq!(t.meet(r1, r2), Err(Inconsistent));
    }

    #[test]
    fn static_and_precision() {
        let mut t = TypeTable::new();
        assert!(t.is_static(TypeId::INT));
        assert!(!t.is_static(TypeId::DYN));
        let tup = t.tuple(vec![TypeId::INT, TypeId::DYN]);
        let r = t.intern(Type::RefM(tup));
        assert!(!t.is_static(r));
        let ii = arrow(&mut t, TypeId::INT, TypeId::INT);
        let id = arrow(&mut t, TypeId::INT, TypeId::DYN);
        assert!(t.precision_leq(TypeId::DYN, ii));
        assert!(t.precision_leq(id, ii));
        assert!(!t.precision_leq(ii, id));
        assert!(!t.precision_leq(TypeId::INT, TypeId::BOOL));
    }

    #[test]
    fn less_precise_lattices() {
        let mut t = TypeTable::new();
        assert_eq!(t.less_precise(TypeId::INT, 100).unwrap(), vec![TypeId::DYN, TypeId::INT]);
        let ii = arrow(&mut t, TypeId::INT, TypeId::INT);
        assert_eq!(t.less_precise(ii, 100).unwrap().len(), 5);
        let tup = t.tuple(vec![TypeId::INT, TypeId::BOOL]);
        assert_eq!(t.less_precise(tup, 100).unwrap().len(), 5);
        assert!(t.less_precise(tup, 3).is_err());
    }

    #[test]
    fn printing() {
        let mut t = TypeTable::new();
        let ii = t.fun(vec![TypeId::INT, TypeId::DYN], TypeId::BOOL);
        let v = t.intern(Type::VectM(ii));
        assert_eq!(t.display(v).to_string(), "(Vect (-> Int Dyn Bool))");
        assert_eq!(t.display(TypeId::UNIT).to_string(), "Unit");
    }
}
