//! The migration lattice of a fully annotated program: every annotation can
//! be replaced by any less precise type, and configurations are sampled
//! uniformly among those whose annotation percentage falls in a bucket.
//!
//! The percentage counts type nodes: a site annotated `(-> Int Dyn)` where the
//! full type is `(-> Int Int)` contributes 2 of 3.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::ast::SType;
use crate::frontend::parse::parse_program;
use crate::frontend::sexpr::Span;
use crate::frontend::typecheck::typecheck;
use crate::types::{RefMode, TypeTable};

/// Per-site lattice size limit.
pub const DEFAULT_SITE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub span: Span,
    pub full: SType,
    /// Every type at most as precise as `full`, `Dyn` first, `full` last.
    pub lattice: Vec<SType>,
    /// Non-`Dyn` node count of each lattice entry.
    pub nodes: Vec<u32>,
}

impl Site {
    pub fn full_index(&self) -> usize {
        self.lattice.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("{0}")]
    Compile(String),
    #[error("annotation at {span} has more than {cap} less precise types")]
    TooLarge { span: Span, cap: usize },
    #[error("no configuration has an annotation percentage in {0}")]
    EmptyBucket(Bucket),
    #[error("gave up after {0} attempts without hitting the bucket")]
    Budget(u64),
}

/// Inclusive range of annotation ratios, both in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
}

impl Bucket {
    const EPS: f64 = 1e-9;

    pub fn new(lo: f64, hi: f64) -> Self {
        Bucket { lo, hi }
    }

    /// Parses `lo:hi` in percent, e.g. `40:60`.
    pub fn parse_percent(s: &str) -> Option<Bucket> {
        let (lo, hi) = s.split_once(':')?;
        let lo: f64 = lo.trim().parse().ok()?;
        let hi: f64 = hi.trim().parse().ok()?;
        (0.0..=100.0).contains(&lo).then_some(())?;
        (lo <= hi && hi <= 100.0).then(|| Bucket::new(lo / 100.0, hi / 100.0))
    }

    pub fn contains(&self, ratio: f64) -> bool {
        ratio >= self.lo - Self::EPS && ratio <= self.hi + Self::EPS
    }

    /// The ten decile buckets `[0, .1], [.1, .2], ..`.
    pub fn deciles() -> Vec<Bucket> {
        (0..10).map(|i| Bucket::new(i as f64 / 10.0, (i + 1) as f64 / 10.0)).collect()
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo * 100.0, self.hi * 100.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Draw each site independently, keep draws inside the bucket.
    Rejection { budget: u64 },
    /// Count configurations per node total and draw from the counts. Reaches
    /// buckets of any width, including the single full and all-`Dyn` points.
    Exact,
}

/// One sampled configuration: an index into each site's lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSample {
    pub choice: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Lattice {
    pub sites: Vec<Site>,
    /// Non-`Dyn` nodes over all full types.
    pub total_nodes: u32,
}

impl Lattice {
    /// Collects the annotation sites of `src`, which must typecheck.
    pub fn of_source(src: &str, cap: usize) -> Result<Lattice, LatticeError> {
        let module = parse_program(src).map_err(|e| LatticeError::Compile(e.to_string()))?;
        typecheck(&module, RefMode::Proxied).map_err(|e| LatticeError::Compile(e.to_string()))?;
        let mut types = TypeTable::new();
        let mut sites = Vec::new();
        for ann in module.annotations() {
            let full = ann.ty.intern(&mut types, RefMode::Proxied);
            let ids = types.less_precise(full, cap).map_err(|_| LatticeError::TooLarge { span: ann.span, cap })?;
            let lattice = ids.iter().map(|t| SType::from_type(&types, *t)).collect();
            let nodes = ids.iter().map(|t| types.static_node_count(*t)).collect();
            sites.push(Site { span: ann.span, full: ann.ty.clone(), lattice, nodes });
        }
        let total_nodes = sites.iter().map(|s| s.nodes[s.full_index()]).sum();
        Ok(Lattice { sites, total_nodes })
    }

    pub fn full(&self) -> Vec<usize> {
        self.sites.iter().map(Site::full_index).collect()
    }

    /// Number of configurations, as a float since it overflows quickly.
    pub fn size(&self) -> f64 {
        self.sites.iter().map(|s| s.lattice.len() as f64).product()
    }

    pub fn static_nodes(&self, choice: &[usize]) -> u32 {
        self.sites.iter().zip(choice).map(|(s, i)| s.nodes[*i]).sum()
    }

    /// Fraction of the full program's type nodes still annotated. A program
    /// without annotations counts as fully annotated.
    pub fn ratio(&self, choice: &[usize]) -> f64 {
        self.ratio_of(self.static_nodes(choice))
    }

    fn ratio_of(&self, nodes: u32) -> f64 {
        if self.total_nodes == 0 {
            1.0
        } else {
            nodes as f64 / self.total_nodes as f64
        }
    }

    /// `src` with every annotation replaced by its chosen type. Sites at their
    /// full type keep their original text.
    pub fn render(&self, src: &str, choice: &[usize]) -> String {
        let mut out = String::with_capacity(src.len());
        let mut at = 0;
        for (site, &i) in self.sites.iter().zip(choice) {
            if i == site.full_index() {
                continue;
            }
            out.push_str(&src[at..site.span.start]);
            out.push_str(&site.lattice[i].to_string());
            at = site.span.end;
        }
        out.push_str(&src[at..]);
        out
    }

    /// Every configuration in the lattice, in odometer order.
    pub fn enumerate(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.sites.len()];
        loop {
            out.push(idx.clone());
            let mut pos = idx.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.sites[pos].lattice.len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// `count` configurations drawn uniformly from those inside `bucket`.
    pub fn sample(
        &self,
        bucket: Bucket,
        seed: u64,
        count: usize,
        strategy: Strategy,
    ) -> Result<Vec<ConfigSample>, LatticeError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let choices = match strategy {
            Strategy::Rejection { budget } => self.rejection(bucket, &mut rng, count, budget)?,
            Strategy::Exact => self.exact(bucket, &mut rng, count)?,
        };
        Ok(choices
            .into_iter()
            .map(|choice| ConfigSample { ratio: self.ratio(&choice), choice, seed })
            .collect())
    }

    fn rejection(&self, bucket: Bucket, rng: &mut ChaCha8Rng, count: usize, budget: u64) -> Result<Vec<Vec<usize>>, LatticeError> {
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count {
            if attempts == budget {
                return Err(LatticeError::Budget(budget));
            }
            attempts += 1;
            let choice: Vec<usize> = self.sites.iter().map(|s| rng.gen_range(0..s.lattice.len())).collect();
            if bucket.contains(self.ratio(&choice)) {
                out.push(choice);
            }
        }
        Ok(out)
    }

    fn exact(&self, bucket: Bucket, rng: &mut ChaCha8Rng, count: usize) -> Result<Vec<Vec<usize>>, LatticeError> {
        let total = self.total_nodes as usize;
        // ways[i][s]: configurations of sites i.. using exactly s static nodes.
        let n = self.sites.len();
        let mut ways = vec![vec![0f64; total + 1]; n + 1];
        ways[n][0] = 1.0;
        for i in (0..n).rev() {
            let (head, tail) = ways.split_at_mut(i + 1);
            for &k in &self.sites[i].nodes {
                for s in 0..=total - k as usize {
                    head[i][s + k as usize] += tail[0][s];
                }
            }
        }
        let targets: Vec<(usize, f64)> = (0..=total)
            .filter(|&s| ways[0][s] > 0.0 && bucket.contains(self.ratio_of(s as u32)))
            .map(|s| (s, ways[0][s]))
            .collect();
        if targets.is_empty() {
            return Err(LatticeError::EmptyBucket(bucket));
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut s = pick(rng, targets.iter().map(|t| t.1)).map(|i| targets[i].0).expect("non-empty");
            let mut choice = Vec::with_capacity(n);
            for i in 0..n {
                let site = &self.sites[i];
                let weights = site.nodes.iter().map(|&k| if k as usize <= s { ways[i + 1][s - k as usize] } else { 0.0 });
                let e = pick(rng, weights).expect("consistent counts");
                s -= site.nodes[e] as usize;
                choice.push(e);
            }
            out.push(choice);
        }
        Ok(out)
    }
}

/// Index drawn with probability proportional to its weight.
fn pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> Option<usize> {
    let sum: f64 = weights.clone().sum();
    if sum <= 0.0 {
        return None;
    }
    let mut x = rng.gen::<f64>() * sum;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = Some(i);
        if x < w {
            return Some(i);
        }
        x -= w;
    }
    last
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub ratio: f64,
    pub static_nodes: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub bench: String,
    pub seed: u64,
    pub bucket: Bucket,
    pub sites: usize,
    pub total_nodes: u32,
    pub samples: Vec<ManifestEntry>,
}

/// `<bench>_p<percent>_s<seed>_<k>.grift`, with the realized percentage rounded.
pub fn sample_file_name(bench: &str, ratio: f64, seed: u64, k: usize) -> String {
    format!("{bench}_p{}_s{seed}_{k}.grift", (ratio * 100.0).round() as u32)
}

/// Writes each sample's program into `dir` along with `<bench>_manifest.json`.
pub fn write_samples(
    dir: &Path,
    bench: &str,
    src: &str,
    lattice: &Lattice,
    bucket: Bucket,
    seed: u64,
    samples: &[ConfigSample],
) -> std::io::Result<(PathBuf, Manifest)> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        let file = sample_file_name(bench, s.ratio, seed, k);
        std::fs::write(dir.join(&file), lattice.render(src, &s.choice))?;
        entries.push(ManifestEntry { file, ratio: s.ratio, static_nodes: lattice.static_nodes(&s.choice) });
    }
    let manifest = Manifest {
        bench: bench.to_string(),
        seed,
        bucket,
        sites: lattice.sites.len(),
        total_nodes: lattice.total_nodes,
        samples: entries,
    };
    let path = dir.join(format!("{bench}_manifest.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok((path, manifest))
}
