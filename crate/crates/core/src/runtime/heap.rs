use std::collections::VecDeque;

use super::value::{Addr, Value};
use crate::coercion::{Crcn, Label};
use crate::types::TypeId;

/// A cast waiting to be applied to a monotonic cell's contents.
#[derive(Clone, Debug)]
pub enum Pending {
    Coercion(Crcn),
    /// Casts applied in order. Used by type-based casts and lazy coercions.
    Casts(Vec<(TypeId, TypeId, Label)>),
}

#[derive(Clone, Debug)]
pub enum Cell {
    Plain(Value),
    PlainVec(Vec<Value>),
    /// `rtti` is the element type.
    Mono { val: Value, rtti: TypeId, pending: Option<Pending> },
    MonoVec { vals: Vec<Value>, rtti: TypeId, pending: Option<Pending> },
}

impl Cell {
    pub fn is_vector(&self) -> bool {
        matches!(self, Cell::PlainVec(_) | Cell::MonoVec { .. })
    }

    pub fn rtti(&self) -> Option<TypeId> {
        match self {
            Cell::Mono { rtti, .. } | Cell::MonoVec { rtti, .. } => Some(*rtti),
            _ => None,
        }
    }

    pub fn pending(&self) -> Option<&Pending> {
        match self {
            Cell::Mono { pending, .. } | Cell::MonoVec { pending, .. } => pending.as_ref(),
            _ => None,
        }
    }
}

/// Cells plus the worklist of monotonic cells whose contents still carry a
/// pending cast.
#[derive(Clone, Debug, Default)]
pub struct Heap {
    cells: Vec<Cell>,
    pub worklist: VecDeque<Addr>,
    limit: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("heap limit of {0} cells exceeded")]
pub struct HeapFull(pub usize);

impl Heap {
    pub fn with_limit(limit: usize) -> Self {
        Heap {
            cells: Vec::new(),
            worklist: VecDeque::new(),
            limit,
        }
    }

    pub fn alloc(&mut self, cell: Cell) -> Result<Addr, HeapFull> {
        if self.limit != 0 && self.cells.len() >= self.limit {
            return Err(HeapFull(self.limit));
        }
        self.cells.push(cell);
        Ok((self.cells.len() - 1) as Addr)
    }

    pub fn cell(&self, a: Addr) -> &Cell {
        &self.cells[a as usize]
    }

    pub fn cell_mut(&mut self, a: Addr) -> &mut Cell {
        &mut self.cells[a as usize]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (Addr, &Cell)> {
        self.cells.iter().enumerate().map(|(i, c)| (i as Addr, c))
    }
}
