//! Parameter sweeps over omega or bandwidth, both scheduler modes, many
//! seeds. Runs are independent; results are merged in key order so the
//! output never depends on how runs were scheduled.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scheduler::Mode;

use super::config::SimConfig;
use super::sim::{run, AggregateMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    Omega,
    Bandwidth,
}

impl Variable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variable::Omega => "omega",
            Variable::Bandwidth => "bandwidth_hz",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega" => Ok(Variable::Omega),
            "bandwidth_hz" => Ok(Variable::Bandwidth),
            _ => Err(Error::parse("sweep variable", format!("unknown variable `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: Variable,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: Variable,
    pub value: f64,
    pub seed: u64,
    pub mode: Mode,
    /// `None` when the run failed.
    pub metrics: Option<AggregateMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is on, otherwise
    /// runs sequentially.
    Parallel,
}

#[derive(Debug, Clone)]
struct Job {
    value: f64,
    seed: u64,
    mode: Mode,
}

fn config_for(spec: &SweepSpec, job: &Job) -> SimConfig {
    let mut cfg = spec.base.clone();
    cfg.seed = job.seed;
    cfg.sched.mode = job.mode;
    match spec.variable {
        Variable::Omega => cfg.sched.omega = job.value,
        Variable::Bandwidth => cfg.bandwidth_hz = job.value,
    }
    cfg
}

fn execute(spec: &SweepSpec, job: &Job) -> Option<AggregateMetrics> {
    match run(&config_for(spec, job)) {
        Ok(m) => Some(m.aggregate),
        Err(e) => {
            log::warn!(
                "run failed ({}={}, seed {}, {}): {e}",
                spec.variable,
                job.value,
                job.seed,
                job.mode
            );
            None
        }
    }
}

fn map_jobs(spec: &SweepSpec, jobs: &[Job], exec: Execution) -> Vec<Option<AggregateMetrics>> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(|j| execute(spec, j)).collect()
        }
        _ => jobs.iter().map(|j| execute(spec, j)).collect(),
    }
}

pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    sweep_with(spec, Execution::Parallel)
}

/// Runs both modes for every `(grid value, seed)`. For an omega sweep the
/// baseline ignores omega, so it runs once per seed and its row is
/// replicated across the grid.
pub fn sweep_with(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRow>> {
    if spec.grid.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Config("sweep needs a non-empty grid and seed list".into()));
    }
    spec.base.validate()?;

    let mut jobs = Vec::new();
    for &value in &spec.grid {
        for &seed in &spec.seeds {
            jobs.push(Job {
                value,
                seed,
                mode: Mode::QoeAware,
            });
            if spec.variable == Variable::Bandwidth {
                jobs.push(Job {
                    value,
                    seed,
                    mode: Mode::Baseline,
                });
            }
        }
    }
    if spec.variable == Variable::Omega {
        for &seed in &spec.seeds {
            jobs.push(Job {
                value: spec.grid[0],
                seed,
                mode: Mode::Baseline,
            });
        }
    }

    let results = map_jobs(spec, &jobs, exec);
    let mut rows = Vec::new();
    let mut baseline = Vec::new();
    for (job, metrics) in jobs.iter().zip(results) {
        if spec.variable == Variable::Omega && job.mode == Mode::Baseline {
            baseline.push((job.seed, metrics));
        } else {
            rows.push(SweepRow {
                variable: spec.variable,
                value: job.value,
                seed: job.seed,
                mode: job.mode,
                metrics,
            });
        }
    }
    for &value in &spec.grid {
        for (seed, metrics) in &baseline {
            rows.push(SweepRow {
                variable: spec.variable,
                value,
                seed: *seed,
                mode: Mode::Baseline,
                metrics: metrics.clone(),
            });
        }
    }
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.seed.cmp(&b.seed))
            .then(a.mode.cmp(&b.mode))
    });
    Ok(rows)
}

/// Seed-averaged metrics for one `(value, mode)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPoint {
    pub value: f64,
    pub mode: Mode,
    pub mean_psnr_db: f64,
    pub mean_stalls: f64,
    pub mean_rate_bps: f64,
    pub runs: usize,
}

/// Averages over seeds, skipping failed runs and runs without playback.
/// Points come out ordered by value, then mode.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryPoint> {
    let mut keys: Vec<(f64, Mode)> = rows.iter().map(|r| (r.value, r.mode)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(value, mode)| {
            let ok: Vec<&AggregateMetrics> = rows
                .iter()
                .filter(|r| r.value == value && r.mode == mode)
                .filter_map(|r| r.metrics.as_ref())
                .collect();
            let psnr: Vec<f64> = ok.iter().filter_map(|m| m.mean_psnr_db).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            let stalls: Vec<f64> = ok.iter().map(|m| m.stall_count as f64).collect();
            let rates: Vec<f64> = ok.iter().map(|m| m.mean_rate_bps).collect();
            SummaryPoint {
                value,
                mode,
                mean_psnr_db: mean(&psnr),
                mean_stalls: mean(&stalls),
                mean_rate_bps: mean(&rates),
                runs: ok.len(),
            }
        })
        .collect()
}

pub const CSV_HEADER: &str = "variable,value,seed,mode,mean_psnr_db,stall_count,join_time_slots,mean_rate_bps";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Sweep table as CSV. Failed runs leave every metric field empty; runs
/// without playback leave only `mean_psnr_db` empty.
pub fn format_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (psnr, stalls, join, rate) = match &r.metrics {
            Some(m) => (
                opt(m.mean_psnr_db),
                m.stall_count.to_string(),
                opt(m.join_time_slots),
                m.mean_rate_bps.to_string(),
            ),
            None => Default::default(),
        };
        out.push_str(&format!(
            "{},{},{},{},{psnr},{stalls},{join},{rate}\n",
            r.variable, r.value, r.seed, r.mode
        ));
    }
    out
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("refusing to write an empty sweep table".into()));
    }
    std::fs::write(path, format_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::parse("sweep csv", format!("expected header `{CSV_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let ctx = format!("sweep csv line {}", i + 2);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(ctx, "expected 8 fields"));
        }
        let bad = |what: &str| Error::parse(ctx.clone(), format!("bad {what}"));
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        let metrics = if f[5].is_empty() {
            None
        } else {
            Some(AggregateMetrics {
                mean_psnr_db: if f[4].is_empty() { None } else { Some(num(f[4], "mean_psnr_db")?) },
                stall_count: f[5].parse().map_err(|_| bad("stall_count"))?,
                join_time_slots: if f[6].is_empty() { None } else { Some(num(f[6], "join_time_slots")?) },
                mean_rate_bps: num(f[7], "mean_rate_bps")?,
            })
        };
        rows.push(SweepRow {
            variable: f[0].parse()?,
            value: num(f[1], "value")?,
            seed: f[2].parse().map_err(|_| bad("seed"))?,
            mode: f[3].parse().map_err(|_| bad("mode"))?,
            metrics,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}
