//! Uniformity of configuration sampling.

use std::collections::HashMap;

use gradual::lattice::{Bucket, Lattice, Strategy, DEFAULT_SITE_CAP};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::Verdict;

const PROGRAM: &str = "(define (f [x : (Tuple Int Bool)] [g : (Int -> Int)]) : Int
  (if (tuple-proj x 1) (g (tuple-proj x 0)) 0))
(f (tuple 1 #t) (lambda ([y : Int]) : Int (+ y 1)))";

const DRAWS: usize = 100_000;

pub fn uniformity() -> Verdict {
    let lattice = Lattice::of_source(PROGRAM, DEFAULT_SITE_CAP).expect("sampler program typechecks");
    let all = lattice.enumerate();
    if all.len() > 4096 {
        return Verdict::fail(format!("{} configurations, too many for the test", all.len()));
    }
    let bucket = Bucket::new(0.4, 0.6);
    let inside: HashMap<Vec<usize>, usize> = all
        .iter()
        .filter(|c| bucket.contains(lattice.ratio(c)))
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    let k = inside.len();
    let mut parts = vec![format!("{} configurations, {k} in {bucket}", all.len())];
    let mut pass = k > 1;
    for (name, strategy) in [("exact", Strategy::Exact), ("rejection", Strategy::Rejection { budget: 100_000_000 })] {
        let samples = match lattice.sample(bucket, 11, DRAWS, strategy) {
            Ok(s) => s,
            Err(e) => return Verdict::fail(format!("{name}: {e}")),
        };
        let mut counts = vec![0u64; k];
        for s in &samples {
            match inside.get(&s.choice) {
                Some(&i) => counts[i] += 1,
                None => return Verdict::fail(format!("{name} drew {:?} outside the bucket", s.choice)),
            }
        }
        let expected = DRAWS as f64 / k as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom").sf(stat);
        pass &= p > 0.01;
        let again = lattice.sample(bucket, 11, 1000, strategy).expect("sampled once already");
        let other = lattice.sample(bucket, 12, 1000, strategy).expect("sampled once already");
        let deterministic = again[..] == samples[..1000];
        let seeded = other[..] != samples[..1000];
        pass &= deterministic && seeded;
        parts.push(format!(
            "{name}: chi2 {stat:.1} on {} df, p = {p:.3}, same seed repeats: {deterministic}, new seed differs: {seeded}",
            k - 1
        ));
    }
    Verdict::check(pass, parts.join("; "))
}
