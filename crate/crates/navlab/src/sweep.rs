//! Grid sweeps over noise parameters with a crash-resumable CSV sink.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use navlab_core::env::EnvConfig;
use navlab_core::filters::{DenoiserKind, FilterConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GridRange, RunConfig};
use crate::eval::{evaluate_cell, fmt_g9, CellKey, CellResult, EvalError, Policy};

pub const RESULTS_HEADER: &str = "mu,sigma,denoiser,episodes,successes,collisions,timeouts,success_rate,mean_return,mean_length";

/// Overrides the worker count of sweeps and cell evaluation.
pub const THREADS_ENV: &str = "NAVLAB_THREADS";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed results csv {path}: {message}")]
    Csv { path: String, message: String },
    #[error("{path} holds results for a different sweep (row {row}: {message})")]
    ResumeMismatch { path: String, row: usize, message: String },
    #[error("invalid sweep: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Unbiased,
    BiasOnly,
    #[serde(alias = "biased_grid")]
    Biased,
}

impl SweepKind {
    /// Default `(mu, sigma)` grids.
    pub fn preset(self) -> (GridRange, GridRange) {
        let sigma = GridRange { start: 0.0, stop: 3.0, step: 0.1 };
        let mu = GridRange { start: 0.0, stop: 0.3, step: 0.01 };
        match self {
            SweepKind::Unbiased => (GridRange::single(0.0), sigma),
            SweepKind::BiasOnly => (mu, GridRange::single(0.0)),
            SweepKind::Biased => (mu, sigma),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Unbiased => "unbiased",
            SweepKind::BiasOnly => "bias_only",
            SweepKind::Biased => "biased",
        })
    }
}

impl FromStr for SweepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unbiased" => Ok(SweepKind::Unbiased),
            "bias_only" => Ok(SweepKind::BiasOnly),
            "biased" | "biased_grid" => Ok(SweepKind::Biased),
            _ => Err(format!("unknown sweep kind `{s}` (expected unbiased, bias_only or biased)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub checkpoint: PathBuf,
    pub kind: SweepKind,
    pub mu: GridRange,
    pub sigma: GridRange,
    pub denoisers: Vec<DenoiserKind>,
    pub episodes_per_cell: usize,
    pub seed: u64,
    pub env: EnvConfig,
    pub filter: FilterConfig,
    pub stochastic: bool,
}

impl SweepSpec {
    /// Spec for `kind`, taking grids from the preset unless the config's
    /// `sweep` section overrides them.
    pub fn from_config(cfg: &RunConfig, kind: SweepKind, checkpoint: PathBuf) -> Self {
        let (mu, sigma) = kind.preset();
        Self {
            checkpoint,
            kind,
            mu: cfg.sweep.mu.unwrap_or(mu),
            sigma: cfg.sweep.sigma.unwrap_or(sigma),
            denoisers: cfg.sweep.denoisers.clone(),
            episodes_per_cell: cfg.sweep.episodes_per_cell,
            seed: cfg.sweep.seed,
            env: cfg.eval_env(),
            filter: cfg.filter.clone(),
            stochastic: cfg.sweep.stochastic,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let invalid = |e: String| SweepError::Invalid(e);
        self.mu.validate().map_err(|e| invalid(e.to_string()))?;
        self.sigma.validate().map_err(|e| invalid(e.to_string()))?;
        if self.episodes_per_cell == 0 {
            return Err(invalid("episodes_per_cell must be positive".into()));
        }
        if self.denoisers.is_empty() {
            return Err(invalid("no denoisers selected".into()));
        }
        if self.sigma.start < 0.0 {
            return Err(invalid("sigma grid must be non-negative".into()));
        }
        self.env.validate().map_err(|e| invalid(e.to_string()))
    }

    /// Cells in output order: `mu` outermost, then `sigma`, then denoiser.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for mu in self.mu.values() {
            for sigma in self.sigma.values() {
                for &d in &self.denoisers {
                    out.push(CellKey::new(mu, sigma, d));
                }
            }
        }
        out
    }
}

pub fn csv_row(c: &CellResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        fmt_g9(c.mu),
        fmt_g9(c.sigma),
        c.denoiser,
        c.episodes,
        c.successes,
        c.collisions,
        c.timeouts,
        fmt_g9(c.success_rate()),
        fmt_g9(c.mean_return),
        fmt_g9(c.mean_length)
    )
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    mu: f64,
    sigma: f64,
    denoiser: String,
    episodes: usize,
    successes: usize,
    collisions: usize,
    timeouts: usize,
    success_rate: f64,
    mean_return: f64,
    mean_length: f64,
}

/// Parse a results CSV (complete or partial).
pub fn read_results<R: std::io::Read>(reader: R, origin: &str) -> Result<Vec<CellResult>, SweepError> {
    let bad = |message: String| SweepError::Csv { path: origin.to_string(), message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(bad(format!("unexpected header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        let denoiser = row.denoiser.parse::<DenoiserKind>().map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if row.successes + row.collisions + row.timeouts != row.episodes || row.episodes == 0 {
            return Err(bad(format!("row {}: outcome counts do not sum to episodes", i + 1)));
        }
        if (row.success_rate - row.successes as f64 / row.episodes as f64).abs() > 1e-6 {
            return Err(bad(format!("row {}: success_rate disagrees with the counts", i + 1)));
        }
        out.push(CellResult {
            mu: row.mu,
            sigma: row.sigma,
            denoiser,
            episodes: row.episodes,
            successes: row.successes,
            collisions: row.collisions,
            timeouts: row.timeouts,
            mean_return: row.mean_return,
            mean_length: row.mean_length,
            unsafe_fraction: None,
        });
    }
    Ok(out)
}

pub fn read_results_file(path: &Path) -> Result<Vec<CellResult>, SweepError> {
    let f = File::open(path).map_err(|source| SweepError::Io { path: path.display().to_string(), source })?;
    read_results(f, &path.display().to_string())
}

/// Run `f` on a pool sized by `NAVLAB_THREADS` when set, else on the global
/// pool.
pub fn with_thread_override<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(f),
        None => f(),
    }
}

/// Writes rows strictly in cell order even when cells finish out of order.
struct OrderedSink {
    file: File,
    next: usize,
    pending: BTreeMap<usize, String>,
}

impl OrderedSink {
    fn push(&mut self, index: usize, line: String) -> std::io::Result<()> {
        self.pending.insert(index, line);
        while let Some(line) = self.pending.remove(&self.next) {
            writeln!(self.file, "{line}")?;
            self.file.flush()?;
            self.next += 1;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepOptions {
    /// Keep complete rows already in the output file and evaluate only the
    /// remaining cells.
    pub resume: bool,
    /// Stop after writing this many new rows (simulates an interruption).
    pub max_new_cells: Option<usize>,
}

/// Number of complete leading rows of an existing results file, after
/// truncating any partially written last line. Rows must match `cells`.
fn prepare_resume(path: &Path, cells: &[CellKey]) -> Result<usize, SweepError> {
    let io = |source| SweepError::Io { path: path.display().to_string(), source };
    let mut file = OpenOptions::new().read(true).write(true).open(path).map_err(io)?;
    let mut reader = BufReader::new(&mut file);
    let mut keep = 0u64;
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(io)?;
        if n == 0 || !line.ends_with('\n') {
            break;
        }
        keep += n as u64;
        lines.push(line);
    }
    drop(reader);
    file.set_len(keep).map_err(io)?;
    if lines.is_empty() {
        file.seek(SeekFrom::Start(0)).map_err(io)?;
        writeln!(file, "{RESULTS_HEADER}").map_err(io)?;
        return Ok(0);
    }
    let done = read_results(lines.concat().as_bytes(), &path.display().to_string())?;
    if done.len() > cells.len() {
        return Err(SweepError::ResumeMismatch {
            path: path.display().to_string(),
            row: cells.len() + 1,
            message: "more rows than cells".into(),
        });
    }
    for (i, (row, key)) in done.iter().zip(cells).enumerate() {
        if fmt_g9(row.mu) != fmt_g9(key.mu) || fmt_g9(row.sigma) != fmt_g9(key.sigma) || row.denoiser != key.denoiser {
            return Err(SweepError::ResumeMismatch {
                path: path.display().to_string(),
                row: i + 1,
                message: format!("found ({}, {}, {})", row.mu, row.sigma, row.denoiser),
            });
        }
    }
    Ok(done.len())
}

/// Evaluate every cell of `spec`, appending rows to `out` in cell order as
/// they complete. Returns all rows now present in the file.
pub fn run_sweep(spec: &SweepSpec, policy: &dyn Policy, out: &Path, opts: SweepOptions) -> Result<Vec<CellResult>, SweepError> {
    spec.validate()?;
    let io = |source| SweepError::Io { path: out.display().to_string(), source };
    let cells = spec.cells();
    let done = if opts.resume && out.exists() {
        prepare_resume(out, &cells)?
    } else {
        let mut f = File::create(out).map_err(io)?;
        writeln!(f, "{RESULTS_HEADER}").map_err(io)?;
        0
    };
    let file = OpenOptions::new().append(true).open(out).map_err(io)?;
    let sink = Mutex::new(OrderedSink { file, next: done, pending: BTreeMap::new() });
    let todo: Vec<(usize, CellKey)> = cells.iter().copied().enumerate().skip(done).collect();
    let todo = match opts.max_new_cells {
        Some(n) => &todo[..n.min(todo.len())],
        None => &todo[..],
    };
    with_thread_override(|| {
        todo.par_iter().try_for_each(|&(i, key)| -> Result<(), SweepError> {
            let r = evaluate_cell(policy, &spec.env, &spec.filter, key, spec.episodes_per_cell, spec.seed)?;
            sink.lock().unwrap().push(i, csv_row(&r)).map_err(io)
        })
    })?;
    read_results_file(out)
}
