//! Acceptance suite: one line per criterion, nonzero exit if any fails
//! other than a known failure whose cause is documented in the README.
//!
//! `cargo test --test acceptance -- 4 8` runs only criteria 4 and 8.

mod algebra;
mod heap;
mod runs;
mod sampler;
mod support;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

pub struct Verdict {
    pass: bool,
    detail: String,
    notes: Vec<String>,
    known: bool,
}

impl Verdict {
    pub fn check(pass: bool, detail: impl Into<String>) -> Verdict {
        Verdict { pass, detail: detail.into(), notes: Vec::new(), known: false }
    }

    pub fn fail(detail: impl Into<String>) -> Verdict {
        Verdict::check(false, detail)
    }

    pub fn with_notes(mut self, notes: Vec<String>) -> Verdict {
        self.notes = notes;
        self
    }

    /// Marks a failure as already analyzed. It is still reported as FAIL.
    pub fn known_if(mut self, known: bool) -> Verdict {
        self.known = known;
        self
    }
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 11] = [
    (1, "coercion composition oracle", algebra::compose_oracle),
    (2, "normal form closure and size plateau", algebra::normal_form_closure),
    (3, "proxy depth bounded under coercions", runs::proxy_depth),
    (4, "worst-case quicksort growth exponents", runs::growth_exponents),
    (5, "static programs run cast-free under monotonic references", runs::static_zero_overhead),
    (6, "monotonic rtti only gains precision", heap::monotonic_rtti),
    (7, "type-based and coercion runs agree", runs::representation_equivalence),
    (8, "gradual guarantee over sampled configurations", runs::gradual_guarantee),
    (9, "type algebra on the depth 3 universe", algebra::type_algebra),
    (10, "sampler uniformity and determinism", sampler::uniformity),
    (11, "optimizations keep outcomes and never add work", runs::optimization_safety),
];

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (mut passed, mut failed, mut known) = (0, 0, 0);
    for (n, name, f) in CRITERIA {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::fail(format!("panicked: {msg}"))
        });
        let status = match (verdict.pass, verdict.known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2} {status}  {name}: {} [{:.1}s]", verdict.detail, start.elapsed().as_secs_f64());
        for note in &verdict.notes {
            println!("    {note}");
        }
        if verdict.pass {
            passed += 1;
        } else if verdict.known {
            known += 1;
        } else {
            failed += 1;
        }
    }
    println!("acceptance: {passed} passed, {known} failed as known, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
