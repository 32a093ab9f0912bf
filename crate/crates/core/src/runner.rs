//! Orchestration around the experiments: output directory ownership, CSV and
//! raw-sample artifacts, and the run manifest written as the final step.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{validate, Diagnostic, Experiment, ParseError, RunConfig, Severity};
use crate::ensembles::{
    initial_profile, lambda_closed_form, lambda_generic, variance_profile, EnsembleSpec, Family,
    FamilyParams,
};
use crate::error::Error;
use crate::experiments::{
    alpha_sweep, collapse, cut_scan, ergodic_limit, extract_d, find_crossing, max_pairwise_deviation,
    theory_rms, AlphaSweepConfig, Amplitude, CollapseOptions, CutScanConfig, SweepConfig, SweepResult,
    Warning,
};
use crate::fit::FitResult;
use crate::measures::{fmt_f64, SweepPoint, CSV_HEADER};
use crate::sampler::{draw_batch, write_samples};
use crate::theory::{
    q_of_lambda, r0_of_lambda, r_infinity, r_n_with_amplitude, BracketForm, Order, TheoryParams,
};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ENTLAB_WORKERS";
pub const LOCK_FILE: &str = ".entlab.lock";
pub const POINTS_FILE: &str = "points.csv";
pub const DERIVED_FILE: &str = "derived.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_FILE: &str = "samples.bin";

pub const DERIVED_HEADER: &str = "quantity,family,l_a,l_b,target_lambda,value,r_squared";
pub const THEORY_HEADER: &str = "lambda,lambda_ent,r1_pred,r2_pred,r0_pred,q_pred";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Parse(#[from] ParseError),

    #[error("invalid config:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Experiment(#[from] Error),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Command-line settings that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    /// Completed with skipped points or failed fits.
    Partial,
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Failed => 1,
            RunStatus::Partial => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub started: String,
    pub finished: String,
    pub stages: Vec<StageTime>,
    pub warnings: Vec<Warning>,
    pub artifacts: Vec<Artifact>,
    pub status: RunStatus,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Io { path: path.to_path_buf(), source: e.into() })
    }

    /// Files whose current digest differs from the recorded one.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, RunError> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            let p = dir.join(&a.file);
            if digest_file(&p)? != a.sha256 {
                bad.push(a.file.clone());
            }
        }
        Ok(bad)
    }
}

/// Worker count: explicit flag, then config, then the environment, then 1.
pub fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> usize {
    resolve_workers_with(flag, config, std::env::var(WORKERS_ENV).ok().as_deref())
}

/// [`resolve_workers`] with the environment value passed in.
pub fn resolve_workers_with(flag: Option<usize>, config: Option<usize>, env: Option<&str>) -> usize {
    flag.or(config)
        .or_else(|| env.and_then(|v| v.trim().parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or(1)
}

/// Exclusive ownership of an output directory for the lifetime of a run.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(RunError::Locked(dir.to_path_buf())),
            Err(e) => Err(RunError::Io { path, source: e }),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn digest_file(path: &Path) -> Result<String, RunError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// One row of `derived.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Derived {
    pub quantity: String,
    pub family: String,
    pub l_a: Option<u32>,
    pub l_b: Option<u32>,
    pub target_lambda: Option<f64>,
    pub value: f64,
    pub r_squared: Option<f64>,
}

impl Derived {
    fn new(quantity: &str, family: impl ToString, value: f64) -> Self {
        Derived {
            quantity: quantity.into(),
            family: family.to_string(),
            l_a: None,
            l_b: None,
            target_lambda: None,
            value,
            r_squared: None,
        }
    }

    fn sizes(mut self, l_a: u32, l_b: u32) -> Self {
        self.l_a = Some(l_a);
        self.l_b = Some(l_b);
        self
    }

    fn target(mut self, lambda: f64) -> Self {
        self.target_lambda = Some(lambda);
        self
    }

    fn fit(mut self, fit: &FitResult) -> Self {
        self.r_squared = Some(fit.r_squared);
        self
    }

    fn csv_row(&self) -> String {
        let opt_u = |x: Option<u32>| x.map(|v| v.to_string()).unwrap_or_default();
        let opt_f = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.quantity,
            self.family,
            opt_u(self.l_a),
            opt_u(self.l_b),
            opt_f(self.target_lambda),
            fmt_f64(self.value),
            opt_f(self.r_squared)
        )
    }
}

/// What an experiment hands back for persistence.
#[derive(Default)]
struct Outcome {
    points: Vec<SweepPoint>,
    /// Replaces `points.csv` when set (header, rows).
    table: Option<(String, Vec<String>)>,
    derived: Vec<Derived>,
    warnings: Vec<Warning>,
    stages: Vec<StageTime>,
}

/// Runs `f`, recording its wall time under `name`.
fn timed<T>(stages: &mut Vec<StageTime>, name: &str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    stages.push(StageTime { stage: name.into(), seconds: t.elapsed().as_secs_f64() });
    out
}

/// Load, validate and run a config file.
pub fn run_file(path: &Path, overrides: &Overrides) -> Result<RunManifest, RunError> {
    let config = RunConfig::load(path)?;
    run(config, overrides)
}

/// Runs the selected experiment and writes every artifact, the manifest
/// last. Experiment failures after the output directory is claimed are
/// reported through a manifest with status `failed`.
pub fn run(mut config: RunConfig, overrides: &Overrides) -> Result<RunManifest, RunError> {
    if let Some(e) = overrides.experiment {
        config.experiment = Some(e);
    }
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    if let Some(o) = &overrides.output {
        config.output_dir = o.clone();
    }
    let diags = validate(&config);
    for d in diags.iter().filter(|d| d.severity == Severity::Warning) {
        warn!("{d}");
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(RunError::Invalid(diags));
    }
    let experiment = config.experiment.expect("validated config names an experiment");
    let workers = resolve_workers(overrides.workers, config.workers);
    let dir = config.output_dir.clone();
    let _lock = DirLock::acquire(&dir)?;
    let started = chrono::Utc::now().to_rfc3339();
    info!("{experiment}: seed {}, {workers} worker(s), output {}", config.seed, dir.display());

    let mut outcome = Outcome::default();
    let result = match experiment {
        Experiment::Sweep => run_sweep(&config, workers, &mut outcome, false),
        Experiment::FitD => run_sweep(&config, workers, &mut outcome, true),
        Experiment::Fss => run_fss(&config, workers, &mut outcome),
        Experiment::Cutscan => run_cutscan(&config, workers, &mut outcome),
        Experiment::Theory => run_theory(&config, &mut outcome),
        Experiment::OracleCheck => run_oracle(&config, &mut outcome),
    };

    let mut artifacts = Vec::new();
    let error = result.err().map(|e| e.to_string());
    if let Some(e) = &error {
        warn!("{experiment} failed: {e}");
    }
    let write_start = Instant::now();
    let (header, rows) = outcome.table.take().unwrap_or_else(|| {
        let rows = outcome.points.iter().map(|p| p.in_base(config.log_base).csv_row()).collect();
        (CSV_HEADER.to_string(), rows)
    });
    artifacts.push(write_csv(&dir, POINTS_FILE, &header, &rows)?);
    let derived: Vec<String> = outcome.derived.iter().map(Derived::csv_row).collect();
    artifacts.push(write_csv(&dir, DERIVED_FILE, DERIVED_HEADER, &derived)?);
    if config.dump_samples && !outcome.points.is_empty() {
        artifacts.push(dump_samples(&dir, &outcome.points, workers)?);
    }
    outcome.stages.push(StageTime { stage: "write".into(), seconds: write_start.elapsed().as_secs_f64() });

    let status = if error.is_some() {
        RunStatus::Failed
    } else if outcome.warnings.is_empty() {
        RunStatus::Ok
    } else {
        RunStatus::Partial
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment,
        seed: config.seed,
        workers,
        config,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        stages: outcome.stages,
        warnings: outcome.warnings,
        artifacts,
        status,
        error,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunError::Io { path: path.clone(), source: e.into() })?;
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<Artifact, RunError> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    write_artifact(dir, name, text.as_bytes())
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<Artifact, RunError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(Artifact { file: name.into(), bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(bytes)) })
}

/// Redraws every sample behind the points (the seeds are recorded per point).
fn dump_samples(dir: &Path, points: &[SweepPoint], workers: usize) -> Result<Artifact, RunError> {
    let path = dir.join(SAMPLES_FILE);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut out = BufWriter::new(file);
    let mut hasher = Sha256::new();
    let mut bytes = 0u64;
    for p in points {
        let batch = draw_batch(&variance_profile(&p.spec)?, p.seed, p.sample_count, workers)?;
        let mut buf = Vec::new();
        write_samples(&mut buf, &batch).map_err(io_err(&path))?;
        hasher.update(&buf);
        bytes += buf.len() as u64;
        out.write_all(&buf).map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))?;
    Ok(Artifact { file: SAMPLES_FILE.into(), bytes, sha256: hex::encode(hasher.finalize()) })
}

fn specs(config: &RunConfig) -> Result<Vec<EnsembleSpec>, Error> {
    config.specs().map_err(Error::InvalidSpec)
}

fn sweep_config(config: &RunConfig, templates: Vec<EnsembleSpec>) -> Result<SweepConfig, Error> {
    let grid = config.lambda_grid.as_ref().map(|g| g.values()).unwrap_or_default();
    let mut sc = SweepConfig::new(templates, grid, config.samples, config.seed);
    sc.bounds = config.bounds();
    sc.amplitude = config.amplitude;
    if let Some(n) = config.calibration_samples {
        sc.calibration_samples = n;
    }
    Ok(sc)
}

fn d_rows(r: &SweepResult, out: &mut Vec<Derived>) {
    for (name, order) in [("d1", Order::One), ("d2", Order::Two)] {
        if let (Some(d), Some(fit)) = (r.d(order), r.d_fit(order)) {
            out.push(Derived::new(name, r.family, d).sizes(r.l_a, r.l_b).fit(fit));
        }
    }
}

/// `sweep`: one size per section. `fit-d`: every section at every size in
/// `sizes` (`l_a = l_b`), then `D_n = a 2^(b l_a)` across sizes.
fn run_sweep(config: &RunConfig, workers: usize, out: &mut Outcome, fit_sizes: bool) -> Result<(), Error> {
    let base = specs(config)?;
    let templates = if fit_sizes {
        let sizes = config.sizes.clone().unwrap_or_default();
        let mut t = Vec::new();
        for s in &base {
            for &l in &sizes {
                t.push(s.with_sizes(l, l)?);
            }
        }
        t
    } else {
        base.clone()
    };
    let sc = sweep_config(config, templates)?;
    let results = timed(&mut out.stages, "sweep", || crate::experiments::universality_sweep(&sc, workers))?;
    for r in &results {
        out.points.extend(r.points.iter().cloned());
        out.warnings.extend(r.warnings.iter().cloned());
        d_rows(r, &mut out.derived);
    }
    let base_factor = config.log_base.factor();
    if fit_sizes {
        timed(&mut out.stages, "fit", || {
            for s in &base {
                let group: Vec<SweepResult> =
                    results.iter().filter(|r| r.family == s.family && r.gamma == s.gamma).cloned().collect();
                for (name, order) in [("d1", Order::One), ("d2", Order::Two)] {
                    match extract_d(&group, order) {
                        Ok(fit) => {
                            out.derived.push(Derived::new(&format!("{name}_a"), s.family, fit.params[0]).fit(&fit));
                            out.derived.push(Derived::new(&format!("{name}_b"), s.family, fit.params[1]).fit(&fit));
                        }
                        Err(e) => out.warnings.push(Warning::new(format!("{} {name} scaling", s.family), e.to_string())),
                    }
                }
            }
        });
    } else {
        timed(&mut out.stages, "compare", || {
            for r in &results {
                if r.family == Family::Se {
                    continue;
                }
                match theory_rms(r, Order::One) {
                    Ok(rms) => out
                        .derived
                        .push(Derived::new("r1_theory_rms", r.family, rms * base_factor).sizes(r.l_a, r.l_b)),
                    Err(e) => out.warnings.push(Warning::new(format!("{} theory", r.family), e.to_string())),
                }
            }
            if results.len() >= 2 {
                for (name, order) in [("r1_collapse_dev", Order::One), ("r2_collapse_dev", Order::Two)] {
                    match max_pairwise_deviation(&results, order, 0.01, 100.0, 81) {
                        Ok(dev) => out.derived.push(Derived::new(name, "all", dev * base_factor)),
                        Err(e) => out.warnings.push(Warning::new(name, e.to_string())),
                    }
                }
            }
        });
    }
    Ok(())
}

/// `fss`: alpha sweep per section, crossing, collapse with bootstrap bands.
fn run_fss(config: &RunConfig, workers: usize, out: &mut Outcome) -> Result<(), Error> {
    let alphas = config.alpha_grid.as_ref().map(|g| g.values()).unwrap_or_default();
    for sec in &config.ensemble {
        let ac = AlphaSweepConfig {
            family: sec.family,
            gamma: sec.gamma,
            c: config.c.unwrap_or(1.0),
            sizes: config.sizes.clone().unwrap_or_default(),
            alpha_grid: alphas.clone(),
            samples: config.samples,
            seed: config.seed,
            ee_squared: config.ee_squared,
        };
        let curves = timed(&mut out.stages, &format!("alpha-sweep {}", sec.family), || alpha_sweep(&ac, workers))?;
        for c in &curves {
            out.points.extend(c.points.iter().cloned());
        }
        let f = config.log_base.factor();
        let fam = sec.family;
        let crossing = match find_crossing(&curves) {
            Ok(c) => c,
            Err(e) => {
                out.warnings.push(Warning::new(format!("{fam} crossing"), e.to_string()));
                continue;
            }
        };
        out.derived.push(Derived::new("alpha_star_crossing", fam, crossing.alpha_star));
        out.derived.push(Derived::new("r_star_crossing", fam, crossing.r_star * f));
        out.derived.push(Derived::new("crossing_spread", fam, crossing.spread));
        let opts = CollapseOptions { bootstrap: config.bootstrap, seed: config.seed, ..Default::default() };
        let res = timed(&mut out.stages, &format!("collapse {fam}"), || {
            with_pool(workers, || collapse(&curves, crossing.alpha_star, 0.6, &opts))
        })?;
        match res {
            Ok(r) => {
                if !r.converged {
                    out.warnings.push(Warning::new(format!("{fam} collapse"), "optimizer did not converge"));
                }
                out.derived.push(Derived::new("alpha_star", fam, r.alpha_star));
                out.derived.push(Derived::new("nu", fam, r.nu_exponent));
                out.derived.push(Derived::new("r_star", fam, r.r_star * f));
                out.derived.push(Derived::new("collapse_cost", fam, r.collapse_cost));
                if let Some(b) = &r.bootstrap {
                    for (name, band, scale) in [
                        ("alpha_star", b.alpha_star, 1.0),
                        ("nu", b.nu, 1.0),
                        ("r_star", b.r_star, f),
                    ] {
                        out.derived.push(Derived::new(&format!("{name}_lo"), fam, band.lo * scale));
                        out.derived.push(Derived::new(&format!("{name}_hi"), fam, band.hi * scale));
                    }
                }
            }
            Err(e) => out.warnings.push(Warning::new(format!("{fam} collapse"), e.to_string())),
        }
    }
    Ok(())
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    crate::sampler::with_workers(workers, f)
}

/// `cutscan`: entropy against the cut position at each target.
fn run_cutscan(config: &RunConfig, workers: usize, out: &mut Outcome) -> Result<(), Error> {
    let cc = CutScanConfig {
        templates: specs(config)?,
        total: config.total.unwrap_or(0),
        target_lambdas: config.target_lambdas.as_ref().map(|g| g.values()).unwrap_or_default(),
        samples: config.samples,
        seed: config.seed,
        bounds: config.bounds(),
    };
    let results = timed(&mut out.stages, "cut-scan", || cut_scan(&cc, workers))?;
    for r in &results {
        out.points.extend(r.points.iter().cloned());
        out.warnings.extend(r.warnings.iter().cloned());
        for (name, value) in [("l_m", r.l_m), ("l_m_r2", r.l_m_r2)] {
            if let Some(l) = value {
                out.derived.push(Derived::new(name, r.family, l as f64).target(r.target_lambda));
            }
        }
    }
    Ok(())
}

/// `theory`: prediction curves for the first section's sizes.
fn run_theory(config: &RunConfig, out: &mut Outcome) -> Result<(), Error> {
    let spec = *specs(config)?.first().ok_or_else(|| Error::InvalidSpec("no ensemble section".into()))?;
    let t = config.theory.clone().ok_or_else(|| Error::InvalidSpec("no [theory] section".into()))?;
    let (n_a, n_b) = (spec.n_a(), spec.n_b());
    let mut params = TheoryParams::new(spec.gamma, n_a, n_b, t.d1, t.d2)?;
    params.tau = t.tau;
    if config.shifted_bracket {
        params.bracket = BracketForm::Shifted;
    }
    params.validate()?;
    let n = n_a as f64;
    let (r0_inf, r2_inf) = match t.r0_inf {
        Some(r0) => (r0, r_infinity(Order::Two, n_a, n_b)?),
        None => {
            let samples = config.calibration_samples.unwrap_or(config.samples);
            let e = timed(&mut out.stages, "calibration", || ergodic_limit(n_a, n_b, samples, config.seed))?;
            (e.r0.mean, e.r2.mean)
        }
    };
    let q2 = t.q2.unwrap_or(n * n);
    let f = config.log_base.factor();
    let d1 = params.d(Order::One);
    let grid = config.lambda_grid.as_ref().map(|g| g.values()).unwrap_or_default();
    let mut rows = Vec::with_capacity(grid.len());
    for &lam in &grid {
        let r0 = r0_of_lambda(lam, &params, r0_inf).ok();
        let q = q_of_lambda(lam, &params, q2)?;
        let a1 = match config.amplitude {
            Amplitude::Predicted => r0.map(|r| r / n - params.q0()),
            _ => Some(r0_inf / n - params.q0()),
        };
        let a2 = match config.amplitude {
            Amplitude::Predicted => params.beta / n * q,
            _ => r2_inf,
        };
        let r1 = a1.map(|a| r_n_with_amplitude(Order::One, lam, &params, a)).transpose()?;
        let r2 = r_n_with_amplitude(Order::Two, lam, &params, a2)?;
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{}",
            fmt_f64(lam),
            fmt_f64(lam / d1),
            opt(r1.map(|v| v * f)),
            fmt_f64(r2 * f),
            opt(r0),
            fmt_f64(q)
        );
        rows.push(row);
    }
    out.derived.push(Derived::new("d1", spec.family, d1).sizes(spec.l_a, spec.l_b));
    out.derived.push(Derived::new("d2", spec.family, params.d(Order::Two)).sizes(spec.l_a, spec.l_b));
    out.derived.push(Derived::new("r0_inf", spec.family, r0_inf).sizes(spec.l_a, spec.l_b));
    out.table = Some((THEORY_HEADER.into(), rows));
    Ok(())
}

/// Report of the closed-form versus generic complexity-parameter comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub specs: usize,
    /// Largest `|closed - generic| / max(1, Lambda)`.
    pub max_deviation: f64,
    pub worst: Option<EnsembleSpec>,
}

/// A random spec with no singular cells: sizes up to `2^4 x 2^5`, every
/// family, `gamma` in `[0.25, 1.5]`, parameters log-uniform.
pub fn random_spec<R: Rng + ?Sized>(rng: &mut R) -> EnsembleSpec {
    loop {
        let family = Family::ALL[rng.random_range(0..Family::ALL.len())];
        let l_a = rng.random_range(1..=4u32);
        let l_b = rng.random_range(l_a..=5u32);
        let gamma = rng.random_range(0.25..1.5);
        let params = match family {
            Family::Se => {
                let w = log_uniform(rng);
                let w_s = log_uniform(rng);
                FamilyParams::Sparse { w, w_s, hamming_radius: rng.random_range(0..=l_a + l_b) }
            }
            _ => FamilyParams::Decay { mu: log_uniform(rng) },
        };
        let Ok(spec) = EnsembleSpec::new(family, l_a, l_b, params).and_then(|s| s.with_gamma(gamma)) else {
            continue;
        };
        let spec = spec.with_ee_squared(rng.random_bool(0.5));
        if crate::ensembles::singular_cells(&spec).is_empty() && lambda_closed_form(&spec).is_ok() {
            return spec;
        }
    }
}

/// `10^u` with `u` uniform on `[-3, 3]`.
fn log_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    10f64.powf(rng.random_range(-3.0..3.0))
}

pub fn oracle_check(count: usize, seed: u64) -> Result<OracleReport, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport { specs: 0, max_deviation: 0.0, worst: None };
    for _ in 0..count {
        let spec = random_spec(&mut rng);
        let closed = lambda_closed_form(&spec)?;
        let generic = lambda_generic(&variance_profile(&spec)?, spec.gamma, &initial_profile(&spec)?)?;
        let dev = (closed - generic).abs() / closed.abs().max(1.0);
        if !(dev <= report.max_deviation) {
            report.max_deviation = dev;
            report.worst = Some(spec);
        }
        report.specs += 1;
    }
    Ok(report)
}

/// Deviation threshold of the oracle check.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

fn run_oracle(config: &RunConfig, out: &mut Outcome) -> Result<(), Error> {
    let report = timed(&mut out.stages, "oracle", || oracle_check(config.oracle_specs, config.seed))?;
    out.derived.push(Derived::new("oracle_specs", "all", report.specs as f64));
    out.derived.push(Derived::new("oracle_max_deviation", "all", report.max_deviation));
    if report.max_deviation > ORACLE_TOLERANCE {
        return Err(Error::Numerical(format!(
            "closed-form and generic Lambda differ by {:e} (> {ORACLE_TOLERANCE:e}) at {:?}",
            report.max_deviation, report.worst
        )));
    }
    Ok(())
}
