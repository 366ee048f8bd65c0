//! Criteria checked by running programs and reading their counters.

use gradual::frontend::ast::SType;
use gradual::harness::{self, BenchProgram, FLOAT_TOLERANCE};
use gradual::lattice::{Bucket, Lattice, LatticeError, Strategy, DEFAULT_SITE_CAP};
use gradual::pipeline::{self, Mode};
use gradual::runtime::{CastRep, Outcome, Run};
use gradual::types::RefMode;

use crate::support::{bench, everything, generated, mode, Job};
use crate::Verdict;

/// Corpus benchmarks written fully statically.
const STATIC: [&str; 5] = ["tak", "matmult", "quicksort", "fft", "n-body"];
const ADVERSARIAL: &str = "quicksort-adversarial";

fn run(src: &str, mode: &Mode, input: &[String]) -> Result<Run, String> {
    pipeline::run(src, "t.grift", mode, input).map_err(|e| e.to_string())
}

fn coercion_modes() -> Vec<Mode> {
    let mut out = Vec::new();
    for refs in [RefMode::Proxied, RefMode::Monotonic] {
        let m = mode(CastRep::Coercions, refs);
        out.push(m);
        out.push(Mode { lazy_coercions: true, ..m });
    }
    out
}

pub fn proxy_depth() -> Verdict {
    let jobs = everything();
    let (mut fun, mut refs, mut runs) = (0, 0, 0);
    let mut errors = Vec::new();
    for job in &jobs {
        for m in coercion_modes() {
            match run(job.src, &m, &job.input) {
                Ok(r) => {
                    runs += 1;
                    fun = fun.max(r.counters.max_fun_proxy_depth);
                    refs = refs.max(r.counters.max_ref_proxy_depth);
                }
                Err(e) => errors.push(format!("{} under {m}: {e}", job.name)),
            }
        }
    }
    let n = 100;
    let q = bench(ADVERSARIAL);
    let tb = run(&q.src, &mode(CastRep::TypeBased, RefMode::Proxied), &q.input_for(Some(n)));
    let tb_depth = tb.as_ref().map(|r| r.counters.max_ref_proxy_depth).unwrap_or(0);
    errors.truncate(3);
    Verdict::check(
        errors.is_empty() && fun <= 1 && refs <= 1 && tb_depth >= n / 2,
        format!(
            "{runs} coercion runs: max function proxy depth {fun}, max reference proxy depth {refs}; \
             type-based {ADVERSARIAL} at n={n} reaches depth {tb_depth} (need >= {})",
            n / 2
        ),
    )
    .with_notes(errors)
}

pub fn growth_exponents() -> Verdict {
    let q = bench(ADVERSARIAL);
    let sizes = [250u64, 500, 1000];
    let targets = [(CastRep::TypeBased, 3.0, 0.4), (CastRep::Coercions, 2.0, 0.3)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (rep, want, tol) in targets {
        let m = mode(rep, RefMode::Proxied);
        let mut points = Vec::new();
        for n in sizes {
            match run(&q.src, &m, &q.input_for(Some(n))) {
                Ok(r) if matches!(r.outcome, Outcome::Result(_)) => {
                    points.push((n as f64, harness::cost(&r.counters) as f64));
                }
                Ok(r) => return Verdict::fail(format!("{m} at n={n}: {}", r.outcome.render())),
                Err(e) => return Verdict::fail(format!("{m} at n={n}: {e}")),
            }
        }
        let k = harness::fit_exponent(&points);
        pass &= (k - want).abs() <= tol;
        parts.push(format!("{m} exponent {k:.3} (want {want} +- {tol})"));
    }
    Verdict::check(pass, parts.join("; "))
}

fn fixture(p: &BenchProgram) -> &str {
    p.expected.as_deref().unwrap_or_else(|| panic!("{} has no expected output", p.bench))
}

fn has_dyn(t: &SType) -> bool {
    match t {
        SType::Dyn => true,
        SType::Base(_) => false,
        SType::Fun(ps, r) => ps.iter().any(has_dyn) || has_dyn(r),
        SType::Tuple(ts) => ts.iter().any(has_dyn),
        SType::Ref(x) | SType::Vect(x) => has_dyn(x),
    }
}

pub fn static_zero_overhead() -> Verdict {
    let mut problems = Vec::new();
    let modes = [mode(CastRep::Coercions, RefMode::Monotonic), mode(CastRep::TypeBased, RefMode::Monotonic)];
    for name in STATIC {
        let p = bench(name);
        match Lattice::of_source(&p.src, DEFAULT_SITE_CAP) {
            Ok(l) if l.sites.iter().all(|s| !has_dyn(&s.full)) => {}
            Ok(_) => problems.push(format!("{name} has a Dyn annotation")),
            Err(e) => problems.push(format!("{name}: {e}")),
        }
        for m in &modes {
            match run(&p.src, m, &p.input_for(None)) {
                Ok(r) => {
                    let c = r.counters;
                    if c.casts_executed + c.proxies_allocated + c.coercions_created_at_runtime != 0 {
                        problems.push(format!(
                            "{name} under {m}: casts {}, proxies {}, runtime coercions {}",
                            c.casts_executed, c.proxies_allocated, c.coercions_created_at_runtime
                        ));
                    }
                    if !harness::outputs_match(&r.outcome.render(), fixture(p), FLOAT_TOLERANCE) {
                        problems.push(format!("{name} under {m} printed {}", r.outcome.render()));
                    }
                }
                Err(e) => problems.push(format!("{name} under {m}: {e}")),
            }
        }
    }
    Verdict::check(
        problems.is_empty(),
        format!("{} static benchmarks under {} monotonic modes, {} problems", STATIC.len(), modes.len(), problems.len()),
    )
    .with_notes(problems)
}

pub fn representation_equivalence() -> Verdict {
    let (mut same, mut labels, mut runs) = (0, 0, 0);
    let mut value_level = Vec::new();
    let mut label_notes = Vec::new();
    for (i, src) in generated().iter().enumerate() {
        for refs in [RefMode::Proxied, RefMode::Monotonic] {
            runs += 1;
            let tb = run(src, &mode(CastRep::TypeBased, refs), &[]);
            let co = run(src, &mode(CastRep::Coercions, refs), &[]);
            match (tb, co) {
                (Ok(a), Ok(b)) if a.outcome == b.outcome => same += 1,
                (Ok(a), Ok(b)) => match (&a.outcome, &b.outcome) {
                    (Outcome::Blame(x), Outcome::Blame(y)) => {
                        labels += 1;
                        label_notes.push(format!("generated #{i} ({refs:?}): type-based blames {x}, coercions blame {y}"));
                    }
                    _ => value_level.push(format!(
                        "generated #{i} ({refs:?}): type-based {}, coercions {}",
                        a.outcome.render(),
                        b.outcome.render()
                    )),
                },
                (a, b) => value_level.push(format!("generated #{i} ({refs:?}): {:?} vs {:?}", a.err(), b.err())),
            }
        }
    }
    let mut notes: Vec<String> = value_level.iter().take(3).cloned().collect();
    notes.extend(label_notes.into_iter().take(3));
    Verdict::check(
        value_level.is_empty(),
        format!(
            "{runs} program runs: {same} identical, {labels} differ only in blame label, {} differ in value or kind",
            value_level.len()
        ),
    )
    .with_notes(notes)
}

pub const PER_BUCKET: usize = 90;

/// Largest lattice enumerated to confirm that a bucket is empty.
const ENUMERATION_LIMIT: f64 = 1e6;

pub fn gradual_guarantee() -> Verdict {
    let m = Mode::default();
    let mut runs = 0;
    let mut problems = Vec::new();
    let mut empty = Vec::new();
    let mut unconfirmed = Vec::new();
    for name in STATIC {
        let p = bench(name);
        let lattice = match Lattice::of_source(&p.src, DEFAULT_SITE_CAP) {
            Ok(l) => l,
            Err(e) => return Verdict::fail(format!("{name}: {e}")),
        };
        let mut configs = vec![("static".to_string(), lattice.full()), ("dynamic".to_string(), vec![0; lattice.sites.len()])];
        for (d, bucket) in Bucket::deciles().into_iter().enumerate() {
            match lattice.sample(bucket, d as u64, PER_BUCKET, Strategy::Exact) {
                Ok(samples) => {
                    configs.extend(samples.into_iter().enumerate().map(|(k, s)| (format!("{bucket} #{k}"), s.choice)))
                }
                // Small lattices leave some deciles with nothing in them. That
                // only counts as empty once every configuration is checked.
                Err(LatticeError::EmptyBucket(_)) => {
                    let confirmed = lattice.size() <= ENUMERATION_LIMIT
                        && lattice.enumerate().iter().all(|c| !bucket.contains(lattice.ratio(c)));
                    if confirmed {
                        empty.push(format!("{name} {bucket}"));
                    } else {
                        unconfirmed.push(format!("{name} {bucket}"));
                    }
                }
                Err(e) => return Verdict::fail(format!("{name} {bucket}: {e}")),
            }
        }
        let input = p.input_for(None);
        for (label, choice) in configs {
            runs += 1;
            let src = lattice.render(&p.src, &choice);
            match run(&src, &m, &input) {
                Ok(r) if harness::outputs_match(&r.outcome.render(), fixture(p), FLOAT_TOLERANCE) => {}
                Ok(r) => problems.push(format!("{name} {label}: printed {}", r.outcome.render())),
                Err(e) => problems.push(format!("{name} {label}: {e}")),
            }
        }
    }
    let count = problems.len();
    problems.truncate(3);
    problems.extend(unconfirmed.iter().map(|b| format!("bucket {b} reported empty but has configurations")));
    Verdict::check(
        count == 0 && unconfirmed.is_empty(),
        format!(
            "{runs} configurations of {} benchmarks under {m}, {count} differ from the fixture; {} buckets hold no configuration ({})",
            STATIC.len(),
            empty.len(),
            empty.join(", ")
        ),
    )
    .with_notes(problems)
}

/// The mode pairs compared: (unoptimized, optimized).
fn optimization_pairs() -> Vec<(Mode, Mode)> {
    let mut pairs = Vec::new();
    for refs in [RefMode::Proxied, RefMode::Monotonic] {
        let tb = mode(CastRep::TypeBased, refs);
        pairs.push((tb, Mode { optimize_dyn: true, ..tb }));
        let co = mode(CastRep::Coercions, refs);
        pairs.push((co, Mode { specialize: true, ..co }));
        pairs.push((co, Mode { optimize_dyn: true, ..co }));
        pairs.push((co, co.optimized()));
        pairs.push((co, Mode { lazy_coercions: true, ..co }));
    }
    pairs
}

const DYN_CALL: &str = "(define apply42 (lambda (f) (f 42)))
(apply42 (lambda ([x : Int]) : Int (+ x 1)))";

const TYPED_READS: &str = "(let ([r : (Ref Dyn) (box (: 1 Dyn))])
  (let ([s : (Ref Int) r])
    (let ([acc : (Ref Dyn) (box (: 0 Dyn))])
      (begin (repeat (i 0 100) (set-box! acc (: (+ (: (unbox acc) Int) (: (unbox r) Int)) Dyn)))
             (+ (unbox s) (: (unbox acc) Int))))))";

pub fn optimization_safety() -> Verdict {
    let jobs: Vec<Job> = everything();
    let pairs = optimization_pairs();
    let mut problems = Vec::new();
    let mut comparisons = 0;
    for job in &jobs {
        for (base, opt) in &pairs {
            comparisons += 1;
            let (a, b) = match (run(job.src, base, &job.input), run(job.src, opt, &job.input)) {
                (Ok(a), Ok(b)) => (a, b),
                (a, b) => {
                    problems.push(format!("{} {base} vs {opt}: {:?} / {:?}", job.name, a.err(), b.err()));
                    continue;
                }
            };
            if a.outcome != b.outcome {
                problems.push(format!("{} {opt}: {} instead of {}", job.name, b.outcome.render(), a.outcome.render()));
            }
            let (x, y) = (a.counters, b.counters);
            if y.proxies_allocated > x.proxies_allocated || y.coercions_created_at_runtime > x.coercions_created_at_runtime {
                problems.push(format!(
                    "{} {opt}: proxies {} -> {}, runtime coercions {} -> {}",
                    job.name, x.proxies_allocated, y.proxies_allocated, x.coercions_created_at_runtime,
                    y.coercions_created_at_runtime
                ));
            }
        }
    }
    let mut strict = Vec::new();
    let mut strict_ok = true;
    for refs in [RefMode::Proxied, RefMode::Monotonic] {
        let base = mode(CastRep::Coercions, refs);
        let opt = Mode { optimize_dyn: true, ..base };
        match (run(DYN_CALL, &base, &[]), run(DYN_CALL, &opt, &[])) {
            (Ok(a), Ok(b)) => {
                strict_ok &= b.counters.proxies_allocated < a.counters.proxies_allocated && a.outcome == b.outcome;
                strict.push(format!("dynamic call {refs:?} proxies {} -> {}", a.counters.proxies_allocated, b.counters.proxies_allocated));
            }
            (a, b) => return Verdict::fail(format!("dynamic call program: {:?} / {:?}", a.err(), b.err())),
        }
    }
    let base = mode(CastRep::Coercions, RefMode::Monotonic);
    let lazy = Mode { lazy_coercions: true, ..base };
    match (run(TYPED_READS, &base, &[]), run(TYPED_READS, &lazy, &[])) {
        (Ok(a), Ok(b)) => {
            strict_ok &= b.counters.coercions_created_at_runtime < a.counters.coercions_created_at_runtime
                && a.outcome == b.outcome;
            strict.push(format!(
                "typed reads runtime coercions {} -> {}",
                a.counters.coercions_created_at_runtime, b.counters.coercions_created_at_runtime
            ));
        }
        (a, b) => return Verdict::fail(format!("typed read program: {:?} / {:?}", a.err(), b.err())),
    }
    let count = problems.len();
    problems.truncate(3);
    Verdict::check(
        count == 0 && strict_ok,
        format!("{comparisons} comparisons, {count} problems; {}", strict.join(", ")),
    )
    .with_notes(problems)
}
