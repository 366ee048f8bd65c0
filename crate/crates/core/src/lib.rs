//! A gradually typed language: typechecking and cast insertion, a runtime with
//! type-based casts or space-efficient coercions over proxied or monotonic
//! references, and tooling to sample and measure the migration lattice.

pub mod coercion;
pub mod frontend;
pub mod harness;
pub mod lattice;
pub mod pipeline;
pub mod runtime;
pub mod testgen;
pub mod types;
