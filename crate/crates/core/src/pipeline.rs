//! Source text to outcome under a chosen mode.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::{self, ir::Program, CompileError, CompileOptions};
use crate::runtime::{self, Addr, CastRep, Halt, Machine, Outcome, Run, RunConfig, RunError};
use crate::types::{RefMode, TypeId, TypeTable};

/// Compiler and runtime configuration for one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub cast_rep: CastRep,
    pub ref_mode: RefMode,
    pub lazy_coercions: bool,
    pub specialize: bool,
    pub optimize_dyn: bool,
}

impl Default for Mode {
    fn default() -> Self {
        Mode {
            cast_rep: CastRep::Coercions,
            ref_mode: RefMode::Monotonic,
            lazy_coercions: false,
            specialize: false,
            optimize_dyn: false,
        }
    }
}

impl Mode {
    pub fn new(cast_rep: CastRep, ref_mode: RefMode) -> Self {
        Mode { cast_rep, ref_mode, ..Mode::default() }
    }

    pub fn optimized(self) -> Self {
        Mode { specialize: true, optimize_dyn: true, ..self }
    }

    pub fn compile_options(&self) -> CompileOptions {
        CompileOptions {
            ref_mode: self.ref_mode,
            optimize_dyn: self.optimize_dyn,
            specialize: self.specialize && self.cast_rep == CastRep::Coercions,
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig { cast_rep: self.cast_rep, lazy_coercions: self.lazy_coercions, ..RunConfig::default() }
    }

    /// Parses `type-based+proxied`, optionally followed by `+lazy`, `+specialize`
    /// and `+optimize-dyn`.
    pub fn parse(s: &str) -> Option<Mode> {
        let mut parts = s.split('+');
        let cast_rep = match parts.next()? {
            "type-based" => CastRep::TypeBased,
            "coercions" => CastRep::Coercions,
            _ => return None,
        };
        let ref_mode = match parts.next()? {
            "proxied" => RefMode::Proxied,
            "monotonic" => RefMode::Monotonic,
            _ => return None,
        };
        let mut m = Mode::new(cast_rep, ref_mode);
        for flag in parts {
            match flag {
                "lazy" => m.lazy_coercions = true,
                "specialize" => m.specialize = true,
                "optimize-dyn" => m.optimize_dyn = true,
                _ => return None,
            }
        }
        Some(m)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let refs = match self.ref_mode {
            RefMode::Proxied => "proxied",
            RefMode::Monotonic => "monotonic",
        };
        write!(f, "{}+{refs}", self.cast_rep.name())?;
        if self.lazy_coercions {
            write!(f, "+lazy")?;
        }
        if self.specialize {
            write!(f, "+specialize")?;
        }
        if self.optimize_dyn {
            write!(f, "+optimize-dyn")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Runtime(#[from] RunError),
}

impl Error {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Compile(_) => 1,
            Error::Runtime(_) => 5,
        }
    }
}

pub fn compile(src: &str, file: &str, mode: &Mode) -> Result<Program, CompileError> {
    frontend::compile(src, file, &mode.compile_options())
}

/// Input tokens for `read-int` / `read-float`.
pub fn tokens(input: &str) -> Vec<String> {
    input.split_whitespace().map(str::to_string).collect()
}

pub fn run(src: &str, file: &str, mode: &Mode, input: &[String]) -> Result<Run, Error> {
    let program = compile(src, file, mode)?;
    let config = RunConfig { input: input.to_vec(), ..mode.run_config() };
    Ok(runtime::run_program(&program, &config)?)
}

/// A run with the monotonic rtti history recorded.
#[derive(Clone, Debug)]
pub struct Traced {
    pub run: Run,
    /// Every rtti written, in order, as `(address, rtti)`. A cell's first
    /// entry is its rtti at allocation.
    pub trace: Vec<(Addr, TypeId)>,
    /// Types referenced by the trace.
    pub types: TypeTable,
    /// Whether every settled monotonic cell held a value of its rtti at the end.
    pub heap_sound: bool,
}

pub fn run_traced(src: &str, file: &str, mode: &Mode, input: &[String]) -> Result<Traced, Error> {
    let program = compile(src, file, mode)?;
    let config = RunConfig { input: input.to_vec(), trace_rtti: true, ..mode.run_config() };
    let mut m = Machine::new(program.types.clone(), &program.pool, program.global_names.len(), &config);
    let outcome = match m.run_items(&program) {
        Ok(v) => Outcome::Result(m.render(&v)),
        Err(Halt::Blame(l)) => Outcome::Blame(l.to_string()),
        Err(Halt::Error(l)) => Outcome::DynamicError(l.to_string()),
        Err(Halt::Fault(msg)) => return Err(Error::Runtime(RunError(msg))),
    };
    let trace = m.trace.take().unwrap_or_default();
    let heap_sound = m.heap_is_sound();
    Ok(Traced { run: Run { outcome, counters: m.counters }, trace, types: m.types, heap_sound })
}
