//! Shared inputs: the corpus, generated programs, and small type universes.

use std::path::PathBuf;
use std::sync::OnceLock;

use gradual::frontend::ast::SType;
use gradual::harness::BenchProgram;
use gradual::pipeline::Mode;
use gradual::runtime::CastRep;
use gradual::testgen;
use gradual::types::{BaseType, RefMode};
use rand::Rng;

pub const GENERATED: u64 = 1000;
pub const INT: SType = SType::Base(BaseType::Int);
pub const BOOL: SType = SType::Base(BaseType::Bool);

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus() -> &'static [BenchProgram] {
    static CORPUS: OnceLock<Vec<BenchProgram>> = OnceLock::new();
    CORPUS.get_or_init(|| BenchProgram::load_dir(&corpus_dir()).expect("corpus loads"))
}

pub fn bench(name: &str) -> &'static BenchProgram {
    corpus().iter().find(|p| p.bench == name).unwrap_or_else(|| panic!("no corpus program {name}"))
}

pub fn generated() -> &'static [String] {
    static PROGRAMS: OnceLock<Vec<String>> = OnceLock::new();
    PROGRAMS.get_or_init(|| (0..GENERATED).map(testgen::program).collect())
}

pub fn mode(rep: CastRep, refs: RefMode) -> Mode {
    Mode::new(rep, refs)
}

/// A source program with its input tokens and a name for messages.
pub struct Job<'a> {
    pub name: String,
    pub src: &'a str,
    pub input: Vec<String>,
}

/// The corpus at its fixture inputs followed by every generated program.
pub fn everything() -> Vec<Job<'static>> {
    let mut jobs: Vec<Job> = corpus()
        .iter()
        .map(|p| Job { name: p.bench.clone(), src: &p.src, input: p.input_for(None) })
        .collect();
    jobs.extend(
        generated().iter().enumerate().map(|(i, src)| Job { name: format!("generated #{i}"), src, input: Vec::new() }),
    );
    jobs
}

/// Every type over `Dyn`, `Int` and `Bool` built with unary functions, pairs
/// and references, up to `depth` levels of nesting.
pub fn universe(depth: u32) -> Vec<SType> {
    let mut level = vec![SType::Dyn, INT, BOOL];
    for _ in 1..depth {
        let mut next = vec![SType::Dyn, INT, BOOL];
        for a in &level {
            for b in &level {
                next.push(SType::Fun(vec![a.clone()], Box::new(b.clone())));
                next.push(SType::Tuple(vec![a.clone(), b.clone()]));
            }
            next.push(SType::Ref(Box::new(a.clone())));
        }
        level = next;
    }
    level
}

/// A random fully static type with at most `depth` levels.
pub fn static_type(rng: &mut impl Rng, depth: u32) -> SType {
    if depth <= 1 || rng.gen_bool(0.35) {
        return if rng.gen_bool(0.5) { INT } else { BOOL };
    }
    let d = depth - 1;
    match rng.gen_range(0..5) {
        0 => SType::Fun(vec![static_type(rng, d)], Box::new(static_type(rng, d))),
        1 => SType::Fun(vec![static_type(rng, d), static_type(rng, d)], Box::new(static_type(rng, d))),
        2 => SType::Tuple(vec![static_type(rng, d), static_type(rng, d)]),
        3 => SType::Ref(Box::new(static_type(rng, d))),
        _ => SType::Vect(Box::new(static_type(rng, d))),
    }
}

/// Replace parts of `t` by `Dyn`, and rarely by an unrelated static type.
pub fn perturb(rng: &mut impl Rng, t: &SType, depth: u32) -> SType {
    if rng.gen_bool(0.3) {
        return SType::Dyn;
    }
    if rng.gen_bool(0.05) {
        return static_type(rng, depth);
    }
    let d = depth.saturating_sub(1);
    match t {
        SType::Dyn | SType::Base(_) => t.clone(),
        SType::Fun(ps, r) => {
            SType::Fun(ps.iter().map(|p| perturb(rng, p, d)).collect(), Box::new(perturb(rng, r, d)))
        }
        SType::Tuple(ts) => SType::Tuple(ts.iter().map(|x| perturb(rng, x, d)).collect()),
        SType::Ref(x) => SType::Ref(Box::new(perturb(rng, x, d))),
        SType::Vect(x) => SType::Vect(Box::new(perturb(rng, x, d))),
    }
}
