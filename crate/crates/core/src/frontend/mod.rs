//! Parsing, gradual typechecking, cast insertion and IR optimizations.

pub mod ast;
pub mod ir;
pub mod lower;
pub mod optimize;
pub mod parse;
pub mod sexpr;
pub mod typecheck;

use crate::types::RefMode;

pub use lower::insert_casts;
pub use optimize::{optimize_dyn, specialize_casts};
pub use parse::{parse_program, SyntaxError};
pub use typecheck::{typecheck, TypeError};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("{file}:{0}", file = .1)]
    Syntax(SyntaxError, String),
    #[error("{file}:{0}", file = .1)]
    Type(TypeError, String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub ref_mode: RefMode,
    pub optimize_dyn: bool,
    /// Only meaningful when casts run as coercions.
    pub specialize: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { ref_mode: RefMode::Monotonic, optimize_dyn: false, specialize: false }
    }
}

/// Source text to cast IR. `file` names the source in blame labels.
pub fn compile(src: &str, file: &str, opts: &CompileOptions) -> Result<ir::Program, CompileError> {
    let module = parse_program(src).map_err(|e| CompileError::Syntax(e, file.to_string()))?;
    let typed = typecheck(&module, opts.ref_mode).map_err(|e| CompileError::Type(e, file.to_string()))?;
    let mut program = insert_casts(&typed, file);
    if opts.optimize_dyn {
        optimize_dyn(&mut program);
    }
    if opts.specialize {
        specialize_casts(&mut program);
    }
    Ok(program)
}
