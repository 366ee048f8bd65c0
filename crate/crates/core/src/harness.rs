//! Benchmark driver: runs programs under several modes and sizes, records
//! counters and wall time, and fits growth exponents over a size ladder.
//!
//! Runs are independent, so a batch can be spread over threads with the
//! `parallel` feature. Without it, or when parallelism is not requested,
//! runs go one after another, which keeps wall times comparable.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::pipeline::{self, Mode};
use crate::runtime::{Counters, Outcome};

/// Version of the report JSON layout.
pub const REPORT_SCHEMA: u32 = 1;

/// Relative tolerance when comparing printed floats.
pub const FLOAT_TOLERANCE: f64 = 1e-6;

/// Runs `f` over `items`, on the rayon pool when `parallel` is set and the
/// feature is enabled. Results keep the order of `items`.
pub fn map_jobs<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Compares two printed outcomes token by token; numeric tokens that are not
/// both integers match within `rel` relative error.
pub fn outputs_match(a: &str, b: &str, rel: f64) -> bool {
    let toks = |s: &str| -> Vec<String> {
        s.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_string).collect()
    };
    let (xs, ys) = (toks(a), toks(b));
    xs.len() == ys.len()
        && xs.iter().zip(&ys).all(|(x, y)| {
            if x == y {
                return true;
            }
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(p), Ok(q)) if x.contains(['.', 'e']) || y.contains(['.', 'e']) => {
                    (p - q).abs() <= rel * p.abs().max(q.abs())
                }
                _ => false,
            }
        })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Work measure used for growth fits: every reference read plus every cast.
pub fn cost(c: &Counters) -> u64 {
    c.ref_reads + c.casts_executed
}

pub const COST_COUNTER: &str = "ref_reads+casts_executed";

/// A program with its fixtures: `<bench>.input` and `<bench>.expected` next to
/// the file or in its parent directory.
#[derive(Clone, Debug)]
pub struct BenchProgram {
    pub bench: String,
    pub file: PathBuf,
    pub src: String,
    pub input: String,
    pub expected: Option<String>,
}

/// Benchmark name of a program file: sampled files `<bench>_p<n>_s<n>_<n>`
/// map back to `<bench>`.
pub fn bench_name(stem: &str) -> &str {
    let parts: Vec<&str> = stem.rsplitn(4, '_').collect();
    let numeric = |s: &str, prefix: &str| {
        s.strip_prefix(prefix).is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
    };
    if parts.len() == 4 && numeric(parts[0], "") && numeric(parts[1], "s") && numeric(parts[2], "p") {
        parts[3]
    } else {
        stem
    }
}

impl BenchProgram {
    pub fn load(file: &Path) -> std::io::Result<BenchProgram> {
        let src = std::fs::read_to_string(file)?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let bench = bench_name(stem).to_string();
        let dir = file.parent().unwrap_or(Path::new("."));
        let fixture = |ext: &str| {
            [dir.to_path_buf(), dir.join("..")]
                .iter()
                .map(|d| d.join(format!("{bench}.{ext}")))
                .find_map(|p| std::fs::read_to_string(p).ok())
        };
        let input = fixture("input").unwrap_or_default();
        let expected = fixture("expected").map(|s| s.trim().to_string());
        Ok(BenchProgram { bench, file: file.to_path_buf(), src, input, expected })
    }

    /// Every `.grift` file in `dir`, sorted by name.
    pub fn load_dir(dir: &Path) -> std::io::Result<Vec<BenchProgram>> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "grift"))
            .collect();
        files.sort();
        files.iter().map(|f| BenchProgram::load(f)).collect()
    }

    /// Whether the program takes a size: its fixture input is one token, or
    /// there is none.
    pub fn sized(&self) -> bool {
        pipeline::tokens(&self.input).len() <= 1
    }

    /// Input tokens: the fixture's, or just `size` when given.
    pub fn input_for(&self, size: Option<u64>) -> Vec<String> {
        match size {
            Some(n) => vec![n.to_string()],
            None => pipeline::tokens(&self.input),
        }
    }

    fn file_name(&self) -> String {
        self.file.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub bench: String,
    pub file: String,
    pub mode: Mode,
    pub size: Option<u64>,
    pub reps: u32,
    /// Mean over `reps` runs.
    pub wall_seconds: f64,
    pub counters: Option<Counters>,
    pub outcome: Option<Outcome>,
    /// Compile errors, faults, or counters that changed between repetitions.
    pub error: Option<String>,
    /// Whether the output matches the fixture; absent without a fixture or
    /// when a size other than the fixture's was run.
    pub matches_expected: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub file: String,
    pub mode: Mode,
    pub counter: String,
    pub sizes: Vec<u64>,
    pub costs: Vec<u64>,
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub runs: Vec<RunReport>,
    pub fits: Vec<Fit>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Report> {
        serde_json::from_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub modes: Vec<Mode>,
    pub reps: u32,
    /// Sizes to run programs that take one; empty, or a program that takes
    /// several input tokens, means its fixture input.
    pub sizes: Vec<u64>,
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { modes: vec![Mode::default()], reps: 1, sizes: Vec::new(), parallel: false }
    }
}

/// Runs one program `reps` times.
pub fn run_one(p: &BenchProgram, mode: Mode, size: Option<u64>, reps: u32) -> RunReport {
    let reps = reps.max(1);
    let input = p.input_for(size);
    let file = p.file_name();
    let mut report = RunReport {
        bench: p.bench.clone(),
        file: file.clone(),
        mode,
        size,
        reps,
        wall_seconds: 0.0,
        counters: None,
        outcome: None,
        error: None,
        matches_expected: None,
    };
    let mut total = 0.0;
    for _ in 0..reps {
        let start = Instant::now();
        let result = pipeline::run(&p.src, &file, &mode, &input);
        total += start.elapsed().as_secs_f64();
        match result {
            Err(e) => {
                report.error = Some(e.to_string());
                return report;
            }
            Ok(run) => {
                if report.counters.is_some_and(|c| c != run.counters) {
                    report.error = Some("counters differ between repetitions".into());
                }
                report.counters = Some(run.counters);
                report.outcome = Some(run.outcome);
            }
        }
    }
    report.wall_seconds = total / reps as f64;
    if size.is_none() {
        if let (Some(exp), Some(out)) = (&p.expected, &report.outcome) {
            report.matches_expected = Some(outputs_match(&out.render(), exp, FLOAT_TOLERANCE));
        }
    }
    report
}

/// Every program under every mode and size, then a fit per program and mode
/// over the sizes that ran to a result.
pub fn run_bench(programs: &[BenchProgram], opts: &BenchOptions) -> Report {
    let ladder: Vec<Option<u64>> = opts.sizes.iter().copied().map(Some).collect();
    let mut jobs = Vec::new();
    for (i, p) in programs.iter().enumerate() {
        let sizes = if ladder.is_empty() || !p.sized() { &[None][..] } else { &ladder[..] };
        for &mode in &opts.modes {
            for &size in sizes {
                jobs.push((i, mode, size));
            }
        }
    }
    let runs = map_jobs(&jobs, opts.parallel, |&(i, mode, size)| run_one(&programs[i], mode, size, opts.reps));
    let fits = fits(&runs);
    Report { schema: REPORT_SCHEMA, runs, fits }
}

fn fits(runs: &[RunReport]) -> Vec<Fit> {
    let mut out: Vec<Fit> = Vec::new();
    for r in runs {
        let (Some(size), Some(c), Some(Outcome::Result(_))) = (r.size, r.counters, &r.outcome) else { continue };
        match out.iter_mut().find(|f| f.file == r.file && f.mode == r.mode) {
            Some(f) => {
                f.sizes.push(size);
                f.costs.push(cost(&c));
            }
            None => out.push(Fit {
                file: r.file.clone(),
                mode: r.mode,
                counter: COST_COUNTER.to_string(),
                sizes: vec![size],
                costs: vec![cost(&c)],
                exponent: f64::NAN,
            }),
        }
    }
    out.retain(|f| f.sizes.len() >= 2);
    for f in &mut out {
        let pts: Vec<(f64, f64)> = f.sizes.iter().zip(&f.costs).map(|(&n, &c)| (n as f64, c.max(1) as f64)).collect();
        f.exponent = fit_exponent(&pts);
    }
    out
}
