//! Failure-probability sweeps over (model, L, p) grids.
//!
//! Every trial derives its own RNG streams from (master_seed, model, L, p,
//! sample_index), so trials can be distributed over any number of workers in
//! any order: per-point failure counts are exact sums of per-trial booleans
//! and come out identical for every execution schedule.
//!
//! Sweeps persist incrementally: a CSV of finished points plus a JSON
//! manifest (plan echo, completed points, wall-clock per point). A crashed
//! or interrupted sweep resumes by skipping the points recorded in the
//! manifest.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{run_trial, TrialOptions};
use crate::disorder::{Model, Prob, RngPolicy};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "model,L,p,n_samples,n_fail,pfail,stderr,master_seed";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Failure-probability estimate at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfailPoint {
    pub model: Model,
    pub l: usize,
    pub p: Prob,
    pub n_samples: u64,
    pub n_fail: u64,
    pub pfail: f64,
    pub stderr: f64,
    pub master_seed: u64,
}

impl PfailPoint {
    /// Builds the point from raw counts. `pfail` is the plain ratio; the
    /// standard error is a Wald estimate on the add-one smoothed proportion
    /// (n_fail+1)/(n+2), floored so no point ever gets infinite fit weight.
    pub fn from_counts(model: Model, l: usize, p: Prob, n: u64, n_fail: u64, seed: u64) -> Self {
        let smoothed = (n_fail as f64 + 1.0) / (n as f64 + 2.0);
        let floor = 1.0 / ((n as f64 + 2.0) * (n as f64 + 2.0));
        let stderr = ((smoothed * (1.0 - smoothed)).max(floor) / n as f64).sqrt();
        PfailPoint {
            model,
            l,
            p,
            n_samples: n,
            n_fail,
            pfail: n_fail as f64 / n as f64,
            stderr,
            master_seed: seed,
        }
    }

    pub fn parity(&self) -> &'static str {
        if self.l % 2 == 0 {
            "even"
        } else {
            "odd"
        }
    }

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.model,
            self.l,
            self.p,
            self.n_samples,
            self.n_fail,
            self.pfail,
            self.stderr,
            self.master_seed
        )
    }
}

/// Inclusive arithmetic grid of probabilities in exact micro units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PGrid {
    pub min: Prob,
    pub max: Prob,
    pub step_micro: u32,
}

impl PGrid {
    pub fn single(p: Prob) -> Self {
        PGrid {
            min: p,
            max: p,
            step_micro: 0,
        }
    }

    pub fn new(min: Prob, max: Prob, step_micro: u32) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidInput(format!(
                "p grid min {min} exceeds max {max}"
            )));
        }
        if min < max && step_micro == 0 {
            return Err(Error::InvalidInput(
                "p grid with min < max needs a positive step".into(),
            ));
        }
        Ok(PGrid {
            min,
            max,
            step_micro,
        })
    }

    /// Parses `min:max:step` or a single probability.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [single] => Ok(PGrid::single(Prob::parse_decimal(single)?)),
            [min, max, step] => PGrid::new(
                Prob::parse_decimal(min)?,
                Prob::parse_decimal(max)?,
                Prob::parse_decimal(step)?.micro(),
            ),
            _ => Err(Error::InvalidInput(format!(
                "p grid '{s}' is not 'p' or 'min:max:step'"
            ))),
        }
    }

    pub fn values(&self) -> Vec<Prob> {
        let mut out = Vec::new();
        let mut micro = self.min.micro();
        loop {
            out.push(Prob::from_micro(micro).expect("grid stays in range"));
            if self.step_micro == 0 || micro + self.step_micro > self.max.micro() {
                break;
            }
            micro += self.step_micro;
        }
        out
    }
}

impl std::fmt::Display for PGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.min == self.max {
            write!(f, "{}", self.min)
        } else {
            write!(
                f,
                "{}:{}:{}",
                self.min,
                self.max,
                Prob::from_micro(self.step_micro).unwrap()
            )
        }
    }
}

/// Everything needed to reproduce a sweep bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPlan {
    pub model: Model,
    pub sizes: Vec<usize>,
    pub p_grid: PGrid,
    pub samples: u64,
    pub master_seed: u64,
    /// Worker-count hint; has no effect on results.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Nearest-neighbor pruning for the matcher; results are approximate
    /// when set.
    #[serde(default)]
    pub prune: Option<usize>,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidInput("sweep needs at least one size".into()));
        }
        for &l in &self.sizes {
            self.model.lattice(l)?;
        }
        if self.samples == 0 {
            return Err(Error::InvalidInput("samples per point must be >= 1".into()));
        }
        Ok(())
    }

    /// Grid points in canonical order: sizes outer, probabilities inner.
    pub fn points(&self) -> Vec<(usize, Prob)> {
        let ps = self.p_grid.values();
        let mut out = Vec::with_capacity(self.sizes.len() * ps.len());
        for &l in &self.sizes {
            for &p in &ps {
                out.push((l, p));
            }
        }
        out
    }

    pub fn total_trials(&self) -> u64 {
        self.points().len() as u64 * self.samples
    }

    /// Human-readable size estimate used by dry runs: the paper-scale grids
    /// are accepted by the planner even when actually running them would
    /// take days.
    pub fn summary(&self) -> String {
        let points = self.points().len();
        format!(
            "{} sweep: {} sizes x {} p-values = {} points, {} samples each, {} trials total, ~{} KiB CSV",
            self.model,
            self.sizes.len(),
            self.p_grid.values().len(),
            points,
            self.samples,
            self.total_trials(),
            (points * 64 + CSV_HEADER.len()) / 1024 + 1,
        )
    }

    /// Plan identity for resume checks; the thread hint is excluded because
    /// it cannot affect results.
    fn fingerprint(&self) -> (Model, Vec<usize>, PGrid, u64, u64, Option<usize>) {
        (
            self.model,
            self.sizes.clone(),
            self.p_grid,
            self.samples,
            self.master_seed,
            self.prune,
        )
    }

    pub fn same_experiment(&self, other: &SweepPlan) -> bool {
        self.fingerprint() == other.fingerprint()
    }
}

/// Estimates P_fail at one grid point by running trials 0..n-1. The result
/// is independent of worker count and execution order.
pub fn estimate_pfail(model: Model, l: usize, p: Prob, n: u64, master_seed: u64) -> Result<PfailPoint> {
    estimate_pfail_opts(model, l, p, n, master_seed, &TrialOptions::default())
}

pub fn estimate_pfail_opts(
    model: Model,
    l: usize,
    p: Prob,
    n: u64,
    master_seed: u64,
    opts: &TrialOptions,
) -> Result<PfailPoint> {
    if n == 0 {
        return Err(Error::InvalidInput("n_samples must be >= 1".into()));
    }
    let spec = model.lattice(l)?;
    let rng = RngPolicy::new(master_seed);
    let n_fail = (0..n as usize)
        .into_par_iter()
        .with_min_len(16)
        .try_fold(
            || 0u64,
            |acc, i| -> Result<u64> {
                let outcome = run_trial(&spec, model, p, i as u64, &rng, opts)?;
                Ok(acc + (!outcome.success) as u64)
            },
        )
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(PfailPoint::from_counts(model, l, p, n, n_fail, master_seed))
}

/// Receives finished points; also answers which points already exist so an
/// interrupted sweep can resume.
pub trait SweepSink {
    fn existing(&self, l: usize, p: Prob) -> Option<PfailPoint>;
    fn record(&mut self, point: &PfailPoint, wall: Duration) -> Result<()>;
}

/// Runs the whole plan, skipping points the sink already has. I/O errors are
/// annotated with the number of points completed before the failure.
pub fn run_sweep(plan: &SweepPlan, sink: &mut dyn SweepSink) -> Result<Vec<PfailPoint>> {
    plan.validate()?;
    let opts = TrialOptions { prune: plan.prune };
    let mut out = Vec::new();
    let mut completed = 0usize;
    for (l, p) in plan.points() {
        if let Some(prev) = sink.existing(l, p) {
            out.push(prev);
            completed += 1;
            continue;
        }
        let t0 = Instant::now();
        let point = estimate_pfail_opts(plan.model, l, p, plan.samples, plan.master_seed, &opts)?;
        sink.record(&point, t0.elapsed()).map_err(|e| match e {
            Error::Io { source, .. } => Error::Io {
                source,
                completed,
            },
            other => other,
        })?;
        completed += 1;
        out.push(point);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CompletedPoint {
    l: usize,
    p: Prob,
    parity: String,
    n_samples: u64,
    n_fail: u64,
    wall_ms: u64,
}

/// On-disk sweep state: plan echo plus one entry per finished point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub plan: SweepPlan,
    completed: Vec<CompletedPoint>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path)?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("bad manifest {}: {e}", path.display())))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "manifest schema version {} unsupported (expected {})",
                manifest.schema_version, MANIFEST_SCHEMA_VERSION
            )));
        }
        Ok(manifest)
    }

    pub fn completed_points(&self) -> usize {
        self.completed.len()
    }
}

/// File-backed sink writing `sweep.csv` and `manifest.json` into a
/// directory. Both files are rewritten atomically (temp file + rename) after
/// every point, with CSV rows kept in canonical plan order.
pub struct DirectorySink {
    csv_path: PathBuf,
    manifest_path: PathBuf,
    manifest: Manifest,
    index: HashMap<(usize, u32), usize>,
}

impl DirectorySink {
    pub fn csv_file_name() -> &'static str {
        "sweep.csv"
    }

    pub fn manifest_file_name() -> &'static str {
        "manifest.json"
    }

    /// Starts a fresh sweep in `dir` (creating it), discarding any previous
    /// state there.
    pub fn create(dir: &Path, plan: &SweepPlan) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut sink = DirectorySink {
            csv_path: dir.join(Self::csv_file_name()),
            manifest_path: dir.join(Self::manifest_file_name()),
            manifest: Manifest {
                schema_version: MANIFEST_SCHEMA_VERSION,
                plan: plan.clone(),
                completed: Vec::new(),
            },
            index: HashMap::new(),
        };
        sink.flush()?;
        Ok(sink)
    }

    /// Resumes from an existing manifest, which must describe the same
    /// experiment; starts fresh if no manifest is present.
    pub fn open_resume(dir: &Path, plan: &SweepPlan) -> Result<Self> {
        let manifest_path = dir.join(Self::manifest_file_name());
        if !manifest_path.exists() {
            return Self::create(dir, plan);
        }
        let manifest = Manifest::load(&manifest_path)?;
        if !manifest.plan.same_experiment(plan) {
            return Err(Error::InvalidInput(format!(
                "manifest in {} describes a different experiment; refusing to resume",
                dir.display()
            )));
        }
        let index = manifest
            .completed
            .iter()
            .enumerate()
            .map(|(i, c)| ((c.l, c.p.micro()), i))
            .collect();
        Ok(DirectorySink {
            csv_path: dir.join(Self::csv_file_name()),
            manifest_path,
            manifest,
            index,
        })
    }

    pub fn manifest_exists(dir: &Path) -> bool {
        dir.join(Self::manifest_file_name()).exists()
    }

    fn flush(&mut self) -> Result<()> {
        // manifest
        let tmp = self.manifest_path.with_extension("json.tmp");
        let mut f = fs::File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, &self.manifest)
            .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, &self.manifest_path)?;
        // CSV in canonical plan order
        let tmp = self.csv_path.with_extension("csv.tmp");
        let mut f = fs::File::create(&tmp)?;
        writeln!(f, "{CSV_HEADER}")?;
        for (l, p) in self.manifest.plan.points() {
            if let Some(&i) = self.index.get(&(l, p.micro())) {
                let c = &self.manifest.completed[i];
                let point = PfailPoint::from_counts(
                    self.manifest.plan.model,
                    c.l,
                    c.p,
                    c.n_samples,
                    c.n_fail,
                    self.manifest.plan.master_seed,
                );
                writeln!(f, "{}", point.csv_row())?;
            }
        }
        f.sync_all()?;
        fs::rename(&tmp, &self.csv_path)?;
        Ok(())
    }
}

impl SweepSink for DirectorySink {
    fn existing(&self, l: usize, p: Prob) -> Option<PfailPoint> {
        self.index.get(&(l, p.micro())).map(|&i| {
            let c = &self.manifest.completed[i];
            PfailPoint::from_counts(
                self.manifest.plan.model,
                c.l,
                c.p,
                c.n_samples,
                c.n_fail,
                self.manifest.plan.master_seed,
            )
        })
    }

    fn record(&mut self, point: &PfailPoint, wall: Duration) -> Result<()> {
        self.index
            .insert((point.l, point.p.micro()), self.manifest.completed.len());
        self.manifest.completed.push(CompletedPoint {
            l: point.l,
            p: point.p,
            parity: point.parity().to_string(),
            n_samples: point.n_samples,
            n_fail: point.n_fail,
            wall_ms: wall.as_millis() as u64,
        });
        self.flush()
    }
}

/// Reads a sweep CSV back into points, validating the schema header.
pub fn read_points_csv(path: &Path) -> Result<Vec<PfailPoint>> {
    let text = fs::read_to_string(path)?;
    read_points_csv_str(&text)
}

pub fn read_points_csv_str(text: &str) -> Result<Vec<PfailPoint>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "CSV header mismatch: expected '{CSV_HEADER}', got '{}'",
                other.unwrap_or("")
            )))
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::InvalidInput(format!(
                "CSV row {} has {} fields, expected 8",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| {
            Error::InvalidInput(format!("CSV row {}: bad {what} '{line}'", lineno + 2))
        };
        out.push(PfailPoint {
            model: fields[0].parse()?,
            l: fields[1].parse().map_err(|_| bad("L"))?,
            p: Prob::parse_decimal(fields[2])?,
            n_samples: fields[3].parse().map_err(|_| bad("n_samples"))?,
            n_fail: fields[4].parse().map_err(|_| bad("n_fail"))?,
            pfail: fields[5].parse().map_err(|_| bad("pfail"))?,
            stderr: fields[6].parse().map_err(|_| bad("stderr"))?,
            master_seed: fields[7].parse().map_err(|_| bad("master_seed"))?,
        });
    }
    Ok(out)
}

/// Renders points to CSV text (header plus one row per point).
pub fn points_to_csv(points: &[PfailPoint]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in points {
        s.push_str(&p.csv_row());
        s.push('\n');
    }
    s
}
