//! Parameter sweeps over `(n, σ, α, seed)`.
//!
//! A [`SweepConfig`] expands to a list of [`RunSpec`]s in a fixed order
//! (`n`, then `σ`, then `α`, then seed). Each run builds its own instance,
//! solves from the eigenvector estimator and verifies the trajectory. Runs
//! share nothing, so they are farmed out to a rayon pool and collected back
//! in spec order; rows never depend on the number of workers.

mod report;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{verify_run_with_noise, VerifyConfig};
use crate::error::{Error, Result};
use crate::gpm::{run_from_spectral, StepSize};
use crate::instance::{build_instance, noise_stats, TruthMode};
use crate::phase::ZeroPolicy;
use crate::spectral::SpectralConfig;
use crate::{BoundReport64, GpmConfig64, Instance64, IterateTrace64, NoiseStats64};

pub use report::{
    aggregate_rows, read_rows_csv, write_rows_csv, Aggregate, RunRow, RunTiming, Summary,
};

pub const SWEEP_SCHEMA_VERSION: u64 = 1;
pub const DEFAULT_MAX_RUNS: usize = 100_000;

/// How the noise level of a sweep depends on `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaRule {
    /// `σ = c`
    Absolute,
    /// `σ = c·√n`
    SqrtN,
    /// `σ = c·n^{1/4}`
    QuarterPowerN,
    /// `σ = c·n^{1/6}`
    SixthPowerN,
}

impl SigmaRule {
    pub fn sigma(self, c: f64, n: usize) -> f64 {
        let n = n as f64;
        match self {
            SigmaRule::Absolute => c,
            SigmaRule::SqrtN => c * n.sqrt(),
            SigmaRule::QuarterPowerN => c * n.powf(0.25),
            SigmaRule::SixthPowerN => c * n.powf(1.0 / 6.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    pub rule: SigmaRule,
    /// Absolute values or coefficients `c`, depending on `rule`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

/// Solver settings that override [`GpmConfig64`] defaults in every run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub rho_tol: Option<f64>,
    #[serde(default)]
    pub step_tol: Option<f64>,
    #[serde(default)]
    pub zero_policy: Option<ZeroPolicy>,
    /// Keeping iterates enables the error-bound and cost-to-go checks. Default `true`.
    #[serde(default)]
    pub record_iterates: Option<bool>,
}

impl SolverOverrides {
    pub fn gpm_config(&self, alpha: StepSize<f64>) -> GpmConfig64 {
        let mut cfg = GpmConfig64 {
            alpha,
            record_iterates: self.record_iterates.unwrap_or(true),
            ..GpmConfig64::default()
        };
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        if let Some(t) = self.rho_tol {
            cfg.rho_tol = Some(t);
        }
        if let Some(t) = self.step_tol {
            cfg.step_tol = Some(t);
        }
        if let Some(p) = self.zero_policy {
            cfg.zero_policy = p;
        }
        cfg
    }
}

fn default_max_runs() -> usize {
    DEFAULT_MAX_RUNS
}

/// Sweep description, read from JSON.
///
/// ```json
/// {
///   "schema_version": 1,
///   "n_list": [100],
///   "sigma": { "rule": "sqrt-n", "values": [0.0208333] },
///   "alpha_list": [4, "inf"],
///   "seeds": { "start": 0, "count": 50 },
///   "solver": { "rho_tol": 1e-12 },
///   "output_dir": "out/sweep"
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u64,
    pub n_list: Vec<usize>,
    pub sigma: SigmaSpec,
    pub alpha_list: Vec<StepSize<f64>>,
    pub seeds: SeedRange,
    #[serde(default)]
    pub truth: TruthMode,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn run_count(&self) -> u128 {
        self.n_list.len() as u128
            * self.sigma.values.len() as u128
            * self.alpha_list.len() as u128
            * self.seeds.count as u128
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.schema_version != SWEEP_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion(self.schema_version));
        }
        if self.n_list.is_empty()
            || self.sigma.values.is_empty()
            || self.alpha_list.is_empty()
            || self.seeds.count == 0
        {
            return bad(
                "n_list, sigma.values, alpha_list and seeds.count must be non-empty".into(),
            );
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n == 0) {
            return bad(format!("n must be at least 1, got {n}"));
        }
        if let Some(c) = self
            .sigma
            .values
            .iter()
            .find(|c| !(c.is_finite() && **c >= 0.0))
        {
            return bad(format!("sigma values must be finite and >= 0, got {c}"));
        }
        if self.seeds.start.checked_add(self.seeds.count - 1).is_none() {
            return bad("seed range overflows u64".into());
        }
        for &alpha in &self.alpha_list {
            self.solver.gpm_config(alpha).validate()?;
        }
        let runs = self.run_count();
        if runs > self.max_runs as u128 {
            return bad(format!(
                "sweep has {runs} runs, above the cap of {}",
                self.max_runs
            ));
        }
        Ok(())
    }

    /// Runs in the order `n`, `σ`, `α`, seed (innermost).
    pub fn expand(&self) -> Vec<RunSpec> {
        let mut out = Vec::with_capacity(self.run_count() as usize);
        for &n in &self.n_list {
            for &c in &self.sigma.values {
                let sigma = self.sigma.rule.sigma(c, n);
                for &alpha in &self.alpha_list {
                    for seed in self.seeds.start..=self.seeds.start + (self.seeds.count - 1) {
                        out.push(RunSpec {
                            run: out.len(),
                            n,
                            sigma,
                            alpha,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run: usize,
    pub n: usize,
    pub sigma: f64,
    pub alpha: StepSize<f64>,
    pub seed: u64,
}

/// Everything a single solve produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub noise: NoiseStats64,
    pub trace: IterateTrace64,
    pub report: BoundReport64,
    pub row: RunRow,
}

/// Solves `inst` from the eigenvector estimator and verifies the run.
/// This is the code path shared by single solves and sweeps.
pub fn execute_run(
    run: usize,
    inst: &Instance64,
    gpm: &GpmConfig64,
    spectral: &SpectralConfig<f64>,
    verify: &VerifyConfig,
) -> Result<RunOutput> {
    let noise = noise_stats(inst)?;
    let trace = run_from_spectral(inst, gpm, spectral)?;
    let report = verify_run_with_noise(inst, &trace, &noise, verify)?;
    let row = RunRow::from_run(run, inst, &noise, &trace, &report);
    Ok(RunOutput {
        noise,
        trace,
        report,
        row,
    })
}

/// A trace together with the noise statistics of its instance, as stored in `trace.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub noise: NoiseStats64,
    pub trace: IterateTrace64,
}

impl TraceFile {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Executes one sweep point. Failures become an error row.
pub fn run_one(spec: &RunSpec, cfg: &SweepConfig) -> (RunRow, RunTiming) {
    let start = Instant::now();
    let result = build_instance::<f64>(spec.n, spec.sigma, spec.seed, cfg.truth).and_then(|inst| {
        execute_run(
            spec.run,
            &inst,
            &cfg.solver.gpm_config(spec.alpha),
            &SpectralConfig::default(),
            &VerifyConfig::default(),
        )
    });
    let row = match result {
        Ok(out) => out.row,
        Err(e) => {
            log::warn!(
                "run {} (n={} sigma={} alpha={} seed={}) failed: {e}",
                spec.run,
                spec.n,
                spec.sigma,
                spec.alpha,
                spec.seed
            );
            RunRow::failed(spec, &e.to_string())
        }
    };
    let timing = RunTiming {
        run: spec.run,
        seconds: start.elapsed().as_secs_f64(),
    };
    (row, timing)
}

/// Rows, timings and aggregates of a completed sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<RunRow>,
    pub timings: Vec<RunTiming>,
    pub summary: Summary,
}

/// Runs every point of the sweep on a pool of `jobs` workers (all cores when `None`).
pub fn run_sweep(cfg: &SweepConfig, jobs: Option<usize>) -> Result<SweepReport> {
    cfg.validate()?;
    let specs = cfg.expand();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    log::info!(
        "sweep: {} runs on {} workers",
        specs.len(),
        pool.current_num_threads()
    );
    let done: Vec<(RunRow, RunTiming)> =
        pool.install(|| specs.par_iter().map(|s| run_one(s, cfg)).collect());
    let (rows, timings): (Vec<_>, Vec<_>) = done.into_iter().unzip();
    let summary = aggregate_rows(&rows);
    Ok(SweepReport {
        rows,
        timings,
        summary,
    })
}

impl SweepReport {
    /// Writes `rows.csv`, `timings.csv` and `aggregate.json` into `dir`.
    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows_csv(&self.rows, std::fs::File::create(dir.join("rows.csv"))?)?;
        let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
        for t in &self.timings {
            w.serialize(t)?;
        }
        w.flush()?;
        let json = serde_json::to_string_pretty(&self.summary)?;
        std::fs::write(dir.join("aggregate.json"), json + "\n")?;
        Ok(())
    }
}
