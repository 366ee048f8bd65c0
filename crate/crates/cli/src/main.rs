use std::io::{IsTerminal, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gradual::harness::{self, BenchOptions, BenchProgram, Report, RunReport};
use gradual::lattice::{self, Bucket, Lattice, LatticeError, Strategy};
use gradual::pipeline::{self, Mode};
use gradual::runtime::CastRep;
use gradual::types::RefMode;

/// Exit status when no configuration falls in the requested bucket.
const EXIT_EMPTY_BUCKET: u8 = 4;

#[derive(Parser)]
#[command(name = "gradual", version, about = "Run, sample and benchmark gradually typed programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile and run one program, printing its outcome.
    Run(RunArgs),
    /// Write programs sampled from a fully annotated program's type lattice.
    Sample(SampleArgs),
    /// Run every program in a directory and report counters and timings.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CastRepArg {
    TypeBased,
    Coercions,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefRepArg {
    Proxied,
    Monotonic,
}

#[derive(Args)]
struct ModeArgs {
    #[arg(long, value_enum, default_value = "coercions")]
    cast_rep: CastRepArg,
    #[arg(long, value_enum, default_value = "monotonic")]
    ref_rep: RefRepArg,
    /// Build coercions for monotonic reads and writes only when needed.
    #[arg(long)]
    lazy_coercions: bool,
    /// Partially evaluate casts at compile time (coercions only).
    #[arg(long)]
    specialize: bool,
    /// Check function and reference casts inline at their use.
    #[arg(long)]
    optimize_dyn: bool,
}

impl ModeArgs {
    fn mode(&self) -> Mode {
        let rep = match self.cast_rep {
            CastRepArg::TypeBased => CastRep::TypeBased,
            CastRepArg::Coercions => CastRep::Coercions,
        };
        let refs = match self.ref_rep {
            RefRepArg::Proxied => RefMode::Proxied,
            RefRepArg::Monotonic => RefMode::Monotonic,
        };
        Mode {
            lazy_coercions: self.lazy_coercions,
            specialize: self.specialize,
            optimize_dyn: self.optimize_dyn,
            ..Mode::new(rep, refs)
        }
    }
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    #[command(flatten)]
    mode: ModeArgs,
    /// Print the run's counters as JSON after the outcome.
    #[arg(long)]
    counters: bool,
    /// Write a run report to PATH.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Tokens for read-int and read-float; defaults to standard input when it
    /// is not a terminal.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exact,
    Rejection,
}

#[derive(Args)]
struct SampleArgs {
    file: PathBuf,
    /// Annotation percentage bucket, inclusive.
    #[arg(long, value_name = "LO:HI", default_value = "0:100", value_parser = parse_bucket)]
    percent: Bucket,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Benchmark name for output files; defaults to the file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_enum, default_value = "exact")]
    strategy: StrategyArg,
    /// Attempts before rejection sampling gives up.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    #[command(flatten)]
    mode: ModeArgs,
    /// Comma separated modes such as `type-based+proxied,coercions+proxied+lazy`;
    /// overrides the single mode given by the other flags.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    modes: Vec<Mode>,
    #[arg(long, default_value_t = 1)]
    reps: u32,
    /// Input sizes for programs that read a single number.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<u64>,
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Run independent programs on all cores. Counters are unaffected;
    /// wall times get noisier.
    #[arg(long)]
    parallel: bool,
}

fn parse_bucket(s: &str) -> Result<Bucket, String> {
    Bucket::parse_percent(s).ok_or_else(|| format!("expected LO:HI with 0 <= LO <= HI <= 100, got `{s}`"))
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("unknown mode `{s}`"))
}

fn read_input(path: Option<&Path>) -> std::io::Result<String> {
    match path {
        Some(p) if p == Path::new("-") => std::io::read_to_string(std::io::stdin()),
        Some(p) => std::fs::read_to_string(p),
        None if !std::io::stdin().is_terminal() => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
        None => Ok(String::new()),
    }
}

fn write_json(path: &Path, text: &str) -> Result<(), ExitCode> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        ExitCode::FAILURE
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, ExitCode> {
    let mode = args.mode.mode();
    let src = std::fs::read_to_string(&args.file).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", args.file.display());
        ExitCode::FAILURE
    })?;
    let input = read_input(args.input.as_deref()).map_err(|e| {
        eprintln!("error: cannot read input: {e}");
        ExitCode::FAILURE
    })?;
    let name = args.file.display().to_string();
    let start = Instant::now();
    let result = pipeline::run(&src, &name, &mode, &pipeline::tokens(&input));
    let wall_seconds = start.elapsed().as_secs_f64();
    let run = match result {
        Ok(run) => run,
        Err(e) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(e.exit_code() as u8));
        }
    };
    println!("{}", run.outcome.render());
    if args.counters {
        println!("{}", serde_json::to_string_pretty(&run.counters).expect("counters serialize"));
    }
    if let Some(path) = &args.json {
        let stem = args.file.file_stem().unwrap_or_default().to_string_lossy();
        let report = RunReport {
            bench: harness::bench_name(&stem).to_string(),
            file: name,
            mode,
            size: None,
            reps: 1,
            wall_seconds,
            counters: Some(run.counters),
            outcome: Some(run.outcome.clone()),
            error: None,
            matches_expected: None,
        };
        write_json(path, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    Ok(ExitCode::from(run.outcome.exit_code() as u8))
}

fn cmd_sample(args: SampleArgs) -> Result<ExitCode, ExitCode> {
    let src = std::fs::read_to_string(&args.file).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", args.file.display());
        ExitCode::FAILURE
    })?;
    let lattice = Lattice::of_source(&src, lattice::DEFAULT_SITE_CAP).map_err(|e| {
        eprintln!("{}: {e}", args.file.display());
        ExitCode::FAILURE
    })?;
    let strategy = match args.strategy {
        StrategyArg::Exact => Strategy::Exact,
        StrategyArg::Rejection => Strategy::Rejection { budget: args.budget },
    };
    let samples = match lattice.sample(args.percent, args.seed, args.count, strategy) {
        Ok(s) => s,
        Err(e @ (LatticeError::EmptyBucket(_) | LatticeError::Budget(_))) => {
            eprintln!("{}: {e}", args.file.display());
            return Err(ExitCode::from(EXIT_EMPTY_BUCKET));
        }
        Err(e) => {
            eprintln!("{}: {e}", args.file.display());
            return Err(ExitCode::FAILURE);
        }
    };
    let name = args.name.unwrap_or_else(|| args.file.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    let (manifest_path, _) =
        lattice::write_samples(&args.out, &name, &src, &lattice, args.percent, args.seed, &samples).map_err(|e| {
            eprintln!("error: cannot write samples to {}: {e}", args.out.display());
            ExitCode::FAILURE
        })?;
    println!("{}", manifest_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, ExitCode> {
    let programs = BenchProgram::load_dir(&args.dir).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", args.dir.display());
        ExitCode::FAILURE
    })?;
    let modes = if args.modes.is_empty() { vec![args.mode.mode()] } else { args.modes };
    let opts = BenchOptions { modes, reps: args.reps, sizes: args.sizes, parallel: args.parallel };
    let report = harness::run_bench(&programs, &opts);
    print_summary(&report);
    if let Some(path) = &args.json {
        write_json(path, &report.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(report: &Report) {
    for r in &report.runs {
        let size = r.size.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        let status = match (&r.error, &r.outcome, r.matches_expected) {
            (Some(e), _, _) => format!("error: {e}"),
            (None, Some(o), Some(false)) => format!("MISMATCH {}", o.render()),
            (None, Some(o), _) => o.render(),
            (None, None, _) => String::new(),
        };
        let cost = r.counters.map(|c| harness::cost(&c)).unwrap_or(0);
        println!("{:<32} {:<40} {:>6} {:>10.4}s {:>14} {status}", r.file, r.mode.to_string(), size, r.wall_seconds, cost);
    }
    for f in &report.fits {
        println!("fit {} {} {}: exponent {:.3}", f.file, f.mode, f.counter, f.exponent);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Bench(a) => cmd_bench(a),
    };
    result.unwrap_or_else(|code| code)
}
