//! Config-driven experiment execution.
//!
//! A run is a pure function of a JSON config plus a seed. Three modes:
//!
//! - **discrete** — T steps of the regularized update under a resolved
//!   schedule, with per-step diagnostics and an iteration-averaged
//!   ("annealed") measure weighted by `h_n/(1−ν_n)`;
//! - **continuous** — fixed-step integration of the interacting ODE system to
//!   the averaging horizon `(1−ν)^{−1/3}N^{2/3}` (or a configured horizon),
//!   with trapezoid-weighted annealing;
//! - **sweep** — replicated runs over a list of N values, aggregating the
//!   annealed diagnostics into a rate table and a fitted log-log slope.
//!
//! Outputs under `output_dir`:
//!
//! - `trace.csv` — fixed header
//!   `step,time,h,nu,ksd2,i_nu_stein,c_star,c_star_bound,v_average,w1,wallclock_ms`
//!   (run modes; `w1` empty when not computed, `wallclock_ms` always empty —
//!   timing lives in `summary.json` so traces stay byte-reproducible);
//! - `rates.csv` — `N,replicates,mean_i_nu_stein,mean_ksd2,stderr_i_nu_stein`
//!   (sweep mode);
//! - `snapshots/snap_{mode}_{step}.csv` — retained particle configurations,
//!   one column per coordinate (run modes);
//! - `config_resolved.json` — the config with every default filled in, plus
//!   the resolved schedule;
//! - `summary.json` — final/annealed diagnostics, status, and wall-clock
//!   timings (the only place timing appears).
//!
//! Unknown config keys are hard errors, as are keys that the selected mode or
//! schedule type would silently ignore. The kernel bound `B` and the Hessian
//! bound `C_V` are always derived, never configurable.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::diagnostics::{
    c_star, c_star_bound, ksd_squared, reg_stein_fisher_linear, v_average, w1_distance,
    DiagnosticsReport, W1Method,
};
use crate::engine::{
    annealed_measure, ode_step, rsvgd_step, sample_initial, validate_positions, AnnealMode,
    IntegrationMethod, ParticleState, WeightedEmpiricalMeasure,
};
use crate::kernels::KernelSpec;
use crate::schedules::{
    corollary5_horizon, corollary9_regime1, corollary9_regime2, default_m_proxy,
    theorem7_schedule, Schedule, ScheduleConstants,
};
use crate::targets::{TargetConstants, TargetSpec};
use crate::{Error, Result};

/// Exact `trace.csv` header.
pub const TRACE_HEADER: &str =
    "step,time,h,nu,ksd2,i_nu_stein,c_star,c_star_bound,v_average,w1,wallclock_ms";
/// Exact `rates.csv` header.
pub const RATES_HEADER: &str = "N,replicates,mean_i_nu_stein,mean_ksd2,stderr_i_nu_stein";

/// Desk-scale guard on the particle problem size.
const MAX_PROBLEM_SIZE: usize = 1_000_000;
/// Hard cap on discrete steps actually executed (schedule horizons can be
/// astronomically long; a run over them must be truncated via `schedule.T`).
const MAX_RUN_STEPS: usize = 10_000_000;
/// Cap on the pooled annealed-measure size; the snapshot stride is raised as
/// needed so that `(retained snapshots)·N` stays at or below this (the
/// regularized solve on the pool is cubic in its size).
const ANNEALED_POOL_CAP: usize = 4_000;
/// Cap on per-step entries echoed into `config_resolved.json`.
const ECHO_SCHEDULE_CAP: usize = 100_000;
/// Salt for the W₁ target-sampling stream (fixed per run so every trace row
/// compares against the same target sample set).
const W1_SEED_SALT: u64 = 0xd157_a4ce_5eed_0001;

// ---------------------------------------------------------------------------
// config schema
// ---------------------------------------------------------------------------

/// Execution mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Discrete,
    Continuous,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Discrete => "discrete",
            Mode::Continuous => "continuous",
            Mode::Sweep => "sweep",
        }
    }
}

/// Top-level run configuration (JSON). Unknown keys are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub target: TargetConfig,
    /// Particle count; required in run modes, forbidden in sweep mode (the
    /// sweep takes its N values from `sweep.N_list`).
    #[serde(rename = "N")]
    pub n_particles: Option<usize>,
    pub d: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// Trace cadence in steps (run modes only; default 1).
    pub diagnostics_every: Option<usize>,
    /// Integrator step (continuous dynamics only; default 0.01).
    pub dt: Option<f64>,
    /// Integrator: "euler" or "rk4" (continuous dynamics only; default rk4).
    pub method: Option<String>,
    /// Snapshot retention stride in steps (default max(1, steps/200); raised
    /// automatically to respect the annealed pool cap).
    pub snapshot_stride: Option<usize>,
    /// W₁ diagnostic configuration (run modes only).
    pub w1: Option<W1Config>,
    pub sweep: Option<SweepConfig>,
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// "gaussian_rbf" | "imq" | "rational_quadratic".
    #[serde(default = "default_kernel_family")]
    pub family: String,
    pub lengthscale: Option<f64>,
    /// IMQ exponent (imq only; default 0.5).
    pub beta: Option<f64>,
    /// Rational-quadratic shape (rational_quadratic only; default 1.0).
    pub alpha_rq: Option<f64>,
}

fn default_kernel_family() -> String {
    "gaussian_rbf".into()
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: default_kernel_family(),
            lengthscale: None,
            beta: None,
            alpha_rq: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// "gaussian" | "gaussian_mixture".
    pub family: String,
    pub means: Option<Vec<Vec<f64>>>,
    pub covariances: Option<Vec<Vec<Vec<f64>>>>,
    pub weights: Option<Vec<f64>>,
    pub v_offset: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub mean: Option<Vec<f64>>,
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Rejection-sample the initial configuration into the sublevel set
    /// `(1/N)ΣV(x^i) ≤ restrict_K`.
    #[serde(rename = "restrict_K")]
    pub restrict_k: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// "constant" | "theorem7" | "corollary9_1" | "corollary9_2".
    #[serde(rename = "type", default = "default_schedule_type")]
    pub kind: String,
    pub h: Option<f64>,
    pub nu: Option<f64>,
    /// Discrete: number of steps to run (truncates constructor horizons).
    /// Continuous: averaging horizon override (real time).
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub theta: Option<f64>,
    /// Regime-2 decay exponent (corollary9_2 only).
    pub c: Option<f64>,
    /// Growth-exponent override fed to schedule formulas (default: the
    /// target's certified α).
    pub alpha: Option<f64>,
    /// Growth-constant override (default: the target's certified A).
    #[serde(rename = "A")]
    pub growth_a: Option<f64>,
    /// Initialization sublevel constant (default: `init.restrict_K`, else 1+d).
    #[serde(rename = "K")]
    pub k_level: Option<f64>,
    /// Trajectory-constant proxy override.
    #[serde(rename = "M_proxy")]
    pub m_proxy: Option<f64>,
}

fn default_schedule_type() -> String {
    "constant".into()
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            kind: default_schedule_type(),
            h: None,
            nu: None,
            t: None,
            theta: None,
            c: None,
            alpha: None,
            growth_a: None,
            k_level: None,
            m_proxy: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W1Config {
    /// "exact_1d" | "sliced" | "none" (default: exact_1d when d = 1, else none).
    pub method: Option<String>,
    pub n_target_samples: Option<usize>,
    pub n_slices: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub replicates: usize,
    /// "continuous" (default) | "discrete".
    pub dynamics: Option<String>,
}

/// Reads and parses a config file; unknown keys and type mismatches are
/// reported with the file path.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))
}

/// Applies the CLI `--output-dir` / `--seed` overrides.
pub fn apply_overrides(cfg: &mut RunConfig, output_dir: Option<&str>, seed: Option<u64>) {
    if let Some(dir) = output_dir {
        cfg.output_dir = Some(dir.to_string());
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
}

// ---------------------------------------------------------------------------
// outputs
// ---------------------------------------------------------------------------

/// One `trace.csv` row: the diagnostics of the current particle configuration.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub step: usize,
    pub time: f64,
    /// Step size used to reach this state (`None` on the initial row).
    pub h: Option<f64>,
    pub report: DiagnosticsReport,
}

impl TraceRecord {
    /// CSV row matching [`TRACE_HEADER`]; `w1` and `wallclock_ms` are empty
    /// when absent (`wallclock_ms` is always empty).
    pub fn csv_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{},{},",
            self.step,
            self.time,
            self.h.map(|v| v.to_string()).unwrap_or_default(),
            r.nu,
            r.ksd2,
            r.i_nu_stein,
            r.c_star,
            r.c_star_bound,
            r.v_average,
            r.w1_to_target.map(|v| v.to_string()).unwrap_or_default(),
        )
    }
}

/// Terminal status of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The trajectory blew up; the trace holds every row up to the last valid
    /// step.
    Diverged { step: usize, detail: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Diagnostics of the pooled time-averaged measure.
#[derive(Debug, Clone)]
pub struct AnnealedDiagnostics {
    pub ksd2: f64,
    pub i_nu_stein: f64,
    /// ν at which `i_nu_stein` was evaluated (the last step's ν).
    pub nu: f64,
    pub pool_size: usize,
    pub n_snapshots: usize,
    pub stride: usize,
    /// "h_over_one_minus_nu" | "uniform" | "trapezoid".
    pub weighting: &'static str,
}

/// Result of a discrete or continuous run.
#[derive(Debug)]
pub struct RunOutput {
    pub status: RunStatus,
    pub trace: Vec<TraceRecord>,
    pub final_state: ParticleState,
    pub annealed: Option<AnnealedDiagnostics>,
    pub output_dir: PathBuf,
}

/// One `rates.csv` row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub replicates_completed: usize,
    pub mean_i_nu_stein: f64,
    pub mean_ksd2: f64,
    pub stderr_i_nu_stein: f64,
}

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.n,
            self.replicates_completed,
            self.mean_i_nu_stein,
            self.mean_ksd2,
            self.stderr_i_nu_stein
        )
    }
}

/// Result of a sweep.
#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Fitted log-log slope of mean annealed `i_nu_stein` vs N (needs ≥ 2
    /// surviving N values).
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// `(N, replicate, error)` for failed replicates.
    pub failures: Vec<(usize, usize, String)>,
    pub output_dir: PathBuf,
}

/// Dispatch result.
#[derive(Debug)]
pub enum Report {
    Run(RunOutput),
    Sweep(SweepOutput),
}

/// Runs the config in its own mode.
pub fn execute(cfg: &RunConfig) -> Result<Report> {
    match cfg.mode {
        Mode::Discrete => run_discrete(cfg).map(Report::Run),
        Mode::Continuous => run_continuous(cfg).map(Report::Run),
        Mode::Sweep => run_sweep(cfg).map(Report::Sweep),
    }
}

// ---------------------------------------------------------------------------
// resolution
// ---------------------------------------------------------------------------

struct ResolvedCommon {
    kernel: KernelSpec,
    target: TargetSpec,
    constants: TargetConstants,
    d: usize,
    init_mean: Vec<f64>,
    init_cov: DMatrix<f64>,
    restrict_k: Option<f64>,
    diagnostics_every: usize,
    w1_method: Option<W1Method>,
    w1_samples: usize,
    w1_slices: usize,
    output_dir: PathBuf,
}

fn resolve_kernel(cfg: &KernelConfig) -> Result<KernelSpec> {
    let l = cfg.lengthscale.unwrap_or(1.0);
    let reject = |key: &str| {
        Err(Error::Config(format!(
            "kernel key \"{key}\" does not apply to family \"{}\"",
            cfg.family
        )))
    };
    match cfg.family.as_str() {
        "gaussian_rbf" => {
            if cfg.beta.is_some() {
                return reject("beta");
            }
            if cfg.alpha_rq.is_some() {
                return reject("alpha_rq");
            }
            KernelSpec::gaussian_rbf(l)
        }
        "imq" => {
            if cfg.alpha_rq.is_some() {
                return reject("alpha_rq");
            }
            KernelSpec::imq(l, cfg.beta.unwrap_or(0.5))
        }
        "rational_quadratic" => {
            if cfg.beta.is_some() {
                return reject("beta");
            }
            KernelSpec::rational_quadratic(l, cfg.alpha_rq.unwrap_or(1.0))
        }
        other => Err(Error::Config(format!(
            "unknown kernel family \"{other}\" (expected gaussian_rbf, imq, \
             or rational_quadratic)"
        ))),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("{what} must be a {d}×{d} matrix")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn resolve_target(cfg: &TargetConfig, d: usize) -> Result<TargetSpec> {
    let means: Vec<Vec<f64>> = match &cfg.means {
        Some(m) => {
            if m.iter().any(|row| row.len() != d) {
                return Err(Error::Config(format!(
                    "every target mean must have dimension {d}"
                )));
            }
            m.clone()
        }
        None => vec![vec![0.0; d]],
    };
    let covariances: Vec<DMatrix<f64>> = match &cfg.covariances {
        Some(cs) => {
            if cs.len() != means.len() {
                return Err(Error::Config(format!(
                    "target has {} means but {} covariances",
                    means.len(),
                    cs.len()
                )));
            }
            cs.iter()
                .map(|rows| matrix_from_rows(rows, d, "target covariance"))
                .collect::<Result<_>>()?
        }
        None => means.iter().map(|_| DMatrix::identity(d, d)).collect(),
    };
    match cfg.family.as_str() {
        "gaussian" => {
            if means.len() != 1 {
                return Err(Error::Config(format!(
                    "family \"gaussian\" takes exactly one mean (got {}); use \
                     \"gaussian_mixture\" for several",
                    means.len()
                )));
            }
            if cfg.weights.is_some() {
                return Err(Error::Config(
                    "key \"weights\" does not apply to family \"gaussian\"".into(),
                ));
            }
            TargetSpec::gaussian(means[0].clone(), covariances[0].clone(), cfg.v_offset)
        }
        "gaussian_mixture" => {
            let weights = cfg
                .weights
                .clone()
                .unwrap_or_else(|| vec![1.0 / means.len() as f64; means.len()]);
            TargetSpec::gaussian_mixture(means, covariances, weights, cfg.v_offset)
        }
        other => Err(Error::Config(format!(
            "unknown target family \"{other}\" (expected gaussian or \
             gaussian_mixture)"
        ))),
    }
}

fn resolve_w1(
    cfg: Option<&W1Config>,
    d: usize,
) -> Result<(Option<W1Method>, usize, usize)> {
    let (method_name, samples, slices) = match cfg {
        Some(w) => (
            w.method.clone(),
            w.n_target_samples.unwrap_or(10_000),
            w.n_slices.unwrap_or(32),
        ),
        None => (None, 10_000, 32),
    };
    let method = match method_name.as_deref() {
        Some("exact_1d") => {
            if d != 1 {
                return Err(Error::Config(
                    "w1.method \"exact_1d\" requires d = 1 (use \"sliced\")".into(),
                ));
            }
            Some(W1Method::Exact1d)
        }
        Some("sliced") => Some(W1Method::Sliced),
        Some("none") => None,
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown w1.method \"{other}\" (expected exact_1d, sliced, or none)"
            )));
        }
        // Default: exact where it is exact and cheap, off elsewhere (sliced
        // W₁ is Monte Carlo and opt-in).
        None => (d == 1).then_some(W1Method::Exact1d),
    };
    if samples == 0 || slices == 0 {
        return Err(Error::Config(
            "w1.n_target_samples and w1.n_slices must be ≥ 1".into(),
        ));
    }
    Ok((method, samples, slices))
}

fn resolve_common(cfg: &RunConfig) -> Result<ResolvedCommon> {
    if cfg.d == 0 {
        return Err(Error::Config("d must be ≥ 1".into()));
    }
    let kernel = resolve_kernel(&cfg.kernel)?;
    let target = resolve_target(&cfg.target, cfg.d)?;
    let constants = target.derive_constants(&kernel)?;

    let init_mean = match &cfg.init.mean {
        Some(m) => {
            if m.len() != cfg.d {
                return Err(Error::Config(format!(
                    "init.mean must have dimension {}",
                    cfg.d
                )));
            }
            m.clone()
        }
        None => vec![0.0; cfg.d],
    };
    let init_cov = match &cfg.init.covariance {
        Some(rows) => matrix_from_rows(rows, cfg.d, "init.covariance")?,
        None => DMatrix::identity(cfg.d, cfg.d),
    };

    let diagnostics_every = cfg.diagnostics_every.unwrap_or(1);
    if diagnostics_every == 0 {
        return Err(Error::Config("diagnostics_every must be ≥ 1".into()));
    }
    let (w1_method, w1_samples, w1_slices) = resolve_w1(cfg.w1.as_ref(), cfg.d)?;

    let output_dir = PathBuf::from(cfg.output_dir.as_deref().ok_or_else(|| {
        Error::Config("output_dir is required (config key or --output-dir)".into())
    })?);

    Ok(ResolvedCommon {
        kernel,
        target,
        constants,
        d: cfg.d,
        init_mean,
        init_cov,
        restrict_k: cfg.init.restrict_k,
        diagnostics_every,
        w1_method,
        w1_samples,
        w1_slices,
        output_dir,
    })
}

fn require_n(cfg: &RunConfig) -> Result<usize> {
    let n = cfg
        .n_particles
        .ok_or_else(|| Error::Config("N is required in run modes".into()))?;
    if n == 0 {
        return Err(Error::Config("N must be ≥ 1".into()));
    }
    if n * cfg.d > MAX_PROBLEM_SIZE {
        return Err(Error::Config(format!(
            "N·d = {} exceeds the desk-scale cap {MAX_PROBLEM_SIZE}",
            n * cfg.d
        )));
    }
    Ok(n)
}

/// Assembles the constants consumed by schedule formulas. `B` (kernel bound)
/// and `C_V` are always derived; `A`, `α`, `K`, and `M_proxy` admit config
/// overrides.
fn schedule_constants(
    sched: &ScheduleConfig,
    kernel: &KernelSpec,
    constants: &TargetConstants,
    restrict_k: Option<f64>,
    n: usize,
    d: usize,
) -> Result<ScheduleConstants> {
    let growth_a = sched.growth_a.unwrap_or(constants.growth_a);
    let alpha = sched.alpha.unwrap_or(constants.growth_alpha);
    let k_level = sched
        .k_level
        .or(restrict_k)
        .unwrap_or(1.0 + d as f64);
    let m_proxy = sched
        .m_proxy
        .unwrap_or_else(|| default_m_proxy(constants.c_v, growth_a));
    let out = ScheduleConstants {
        growth_a,
        alpha,
        kernel_bound: kernel.bound(),
        c_v: constants.c_v,
        m_proxy,
        k_level,
        n_particles: n,
        d,
    };
    out.validate()?;
    Ok(out)
}

fn forbid(
    keys: &[(&str, bool)],
    kind: &str,
) -> Result<()> {
    for (name, present) in keys {
        if *present {
            return Err(Error::Config(format!(
                "schedule key \"{name}\" does not apply to schedule type \"{kind}\""
            )));
        }
    }
    Ok(())
}

fn integer_steps(t: f64) -> Result<usize> {
    if !(t.is_finite() && t >= 0.0 && t.fract() == 0.0) {
        return Err(Error::Config(format!(
            "schedule.T must be a nonnegative integer step count (got {t})"
        )));
    }
    Ok(t as usize)
}

/// Resolves the discrete schedule and the number of steps to actually run.
fn resolve_discrete_schedule(
    sched: &ScheduleConfig,
    sk: &ScheduleConstants,
) -> Result<(Schedule, usize)> {
    let n = sk.n_particles;
    let default_nu = || {
        if n >= 2 {
            1.0 - 1.0 / n as f64
        } else {
            1.0
        }
    };
    let (schedule, t_run) = match sched.kind.as_str() {
        "constant" => {
            forbid(&[("theta", sched.theta.is_some()), ("c", sched.c.is_some())], "constant")?;
            let h = sched.h.ok_or_else(|| {
                Error::Config("schedule.h is required for type \"constant\"".into())
            })?;
            let t = integer_steps(sched.t.ok_or_else(|| {
                Error::Config("schedule.T is required for type \"constant\"".into())
            })?)?;
            (Schedule::constant(h, sched.nu.unwrap_or_else(default_nu), t)?, t)
        }
        "theorem7" => {
            forbid(&[("h", sched.h.is_some()), ("c", sched.c.is_some())], "theorem7")?;
            let t = integer_steps(sched.t.ok_or_else(|| {
                Error::Config("schedule.T is required for type \"theorem7\"".into())
            })?)?;
            let nu_override = sched.nu.map(|v| [v]);
            let s = theorem7_schedule(
                sk,
                sched.theta.unwrap_or(1.0),
                t,
                nu_override.as_ref().map(|v| v.as_slice()),
            )?;
            (s, t)
        }
        "corollary9_1" => {
            forbid(
                &[
                    ("h", sched.h.is_some()),
                    ("nu", sched.nu.is_some()),
                    ("theta", sched.theta.is_some()),
                    ("c", sched.c.is_some()),
                ],
                "corollary9_1",
            )?;
            let s = corollary9_regime1(sk)?;
            let t_run = truncate_horizon(sched.t, &s)?;
            (s, t_run)
        }
        "corollary9_2" => {
            forbid(
                &[
                    ("h", sched.h.is_some()),
                    ("nu", sched.nu.is_some()),
                    ("theta", sched.theta.is_some()),
                ],
                "corollary9_2",
            )?;
            let s = corollary9_regime2(sk, sched.c.unwrap_or(0.0))?;
            let t_run = truncate_horizon(sched.t, &s)?;
            (s, t_run)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown schedule type \"{other}\" (expected constant, theorem7, \
                 corollary9_1, or corollary9_2)"
            )));
        }
    };
    if t_run > MAX_RUN_STEPS {
        return Err(Error::Config(format!(
            "{t_run} steps exceeds the execution cap {MAX_RUN_STEPS}; set \
             schedule.T to truncate the horizon"
        )));
    }
    Ok((schedule, t_run))
}

/// Run-step override for constructor schedules: running a prefix of a feasible
/// schedule is feasible, but running past the certified horizon is not.
fn truncate_horizon(t_override: Option<f64>, s: &Schedule) -> Result<usize> {
    match t_override {
        None => Ok(s.t_steps()),
        Some(t) => {
            let t = integer_steps(t)?;
            if t > s.t_steps() {
                return Err(Error::Config(format!(
                    "schedule.T = {t} exceeds the constructed horizon {} \
                     (feasibility is only certified up to it)",
                    s.t_steps()
                )));
            }
            Ok(t)
        }
    }
}

struct ContinuousPlan {
    nu: f64,
    horizon: f64,
    dt: f64,
    method: IntegrationMethod,
}

fn resolve_continuous_plan(cfg_dt: Option<f64>, cfg_method: Option<&str>, sched: &ScheduleConfig, n: usize) -> Result<ContinuousPlan> {
    if sched.kind != "constant" {
        return Err(Error::Config(format!(
            "continuous dynamics use a constant ν (schedule.type \"constant\"), \
             got \"{}\"",
            sched.kind
        )));
    }
    forbid(
        &[
            ("h", sched.h.is_some()),
            ("theta", sched.theta.is_some()),
            ("c", sched.c.is_some()),
        ],
        "constant (continuous dynamics)",
    )?;
    let nu = sched.nu.unwrap_or_else(|| {
        if n >= 2 {
            1.0 - 1.0 / n as f64
        } else {
            0.5
        }
    });
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Config(format!(
            "continuous dynamics require ν ∈ (0, 1) (got {nu})"
        )));
    }
    let horizon = match sched.t {
        Some(t) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!(
                    "schedule.T (continuous horizon) must be positive (got {t})"
                )));
            }
            t
        }
        None => corollary5_horizon(n, nu)?,
    };
    let dt = cfg_dt.unwrap_or(0.01);
    if !(dt > 0.0 && dt <= horizon) {
        return Err(Error::Config(format!(
            "dt must satisfy 0 < dt ≤ horizon (got dt = {dt}, horizon = {horizon})"
        )));
    }
    let method = match cfg_method.unwrap_or("rk4") {
        "euler" => IntegrationMethod::Euler,
        "rk4" => IntegrationMethod::Rk4,
        other => {
            return Err(Error::Config(format!(
                "unknown method \"{other}\" (expected euler or rk4)"
            )));
        }
    };
    Ok(ContinuousPlan { nu, horizon, dt, method })
}

/// Snapshot stride: configured (or steps/200), then raised so the pooled
/// annealed measure stays within [`ANNEALED_POOL_CAP`] particles.
fn resolve_stride(configured: Option<usize>, total_steps: usize, n: usize) -> Result<(usize, bool)> {
    if let Some(0) = configured {
        return Err(Error::Config("snapshot_stride must be ≥ 1".into()));
    }
    let base = configured.unwrap_or_else(|| (total_steps / 200).max(1));
    let min_stride = if n == 0 {
        1
    } else {
        (total_steps * n).div_ceil(ANNEALED_POOL_CAP).max(1)
    };
    let eff = base.max(min_stride);
    Ok((eff, eff != base))
}

// ---------------------------------------------------------------------------
// diagnostics helpers
// ---------------------------------------------------------------------------

struct DiagnosticsContext<'a> {
    kernel: &'a KernelSpec,
    target: &'a TargetSpec,
    constants: &'a TargetConstants,
    w1_method: Option<W1Method>,
    w1_samples: usize,
    w1_slices: usize,
    w1_seed: u64,
}

impl DiagnosticsContext<'_> {
    fn report(&self, positions: &DMatrix<f64>, nu: f64) -> Result<DiagnosticsReport> {
        let measure = WeightedEmpiricalMeasure::uniform(positions.clone())?;
        let ksd2 = ksd_squared(self.kernel, self.target, &measure)?;
        let i_nu_stein = reg_stein_fisher_linear(self.kernel, self.target, &measure, nu)?;
        let cs = c_star(self.kernel, self.target, positions, nu)?;
        let cb = c_star_bound(
            self.target,
            self.constants,
            self.kernel.bound(),
            positions,
            nu,
        )?;
        let va = v_average(self.target, positions)?;
        let w1_to_target = match self.w1_method {
            Some(m) => Some(w1_distance(
                &measure,
                self.target,
                m,
                self.w1_samples,
                self.w1_slices,
                self.w1_seed,
            )?),
            None => None,
        };
        Ok(DiagnosticsReport {
            ksd2,
            i_nu_stein,
            c_star: cs,
            c_star_bound: cb,
            v_average: va,
            nu,
            w1_to_target,
        })
    }
}

struct Snapshot {
    step: usize,
    time: f64,
    positions: DMatrix<f64>,
    /// (h, ν) of the step that produced this state (discrete mode).
    h: f64,
    nu: f64,
}

/// Pools retained snapshots into the annealed measure and evaluates its
/// diagnostics via the linear route (the pool is too large for eigensolves).
fn annealed_diagnostics(
    kernel: &KernelSpec,
    target: &TargetSpec,
    snaps: &[Snapshot],
    continuous: bool,
    stride: usize,
) -> Result<Option<AnnealedDiagnostics>> {
    if snaps.is_empty() {
        return Ok(None);
    }
    let pairs: Vec<(f64, DMatrix<f64>)> = snaps
        .iter()
        .map(|s| (s.time, s.positions.clone()))
        .collect();
    let (measure, weighting) = if continuous {
        (
            annealed_measure(&pairs, AnnealMode::ContinuousTrapezoid, None)?,
            "trapezoid",
        )
    } else if snaps.iter().all(|s| s.nu < 1.0) {
        let w: Vec<f64> = snaps.iter().map(|s| s.h / (1.0 - s.nu)).collect();
        (
            annealed_measure(&pairs, AnnealMode::DiscreteWeighted, Some(&w))?,
            "h_over_one_minus_nu",
        )
    } else {
        let w = vec![1.0; snaps.len()];
        (
            annealed_measure(&pairs, AnnealMode::DiscreteWeighted, Some(&w))?,
            "uniform",
        )
    };
    let nu = snaps.last().map(|s| s.nu).unwrap_or(1.0);
    let ksd2 = ksd_squared(kernel, target, &measure)?;
    let i_nu_stein = reg_stein_fisher_linear(kernel, target, &measure, nu)?;
    Ok(Some(AnnealedDiagnostics {
        ksd2,
        i_nu_stein,
        nu,
        pool_size: measure.len(),
        n_snapshots: snaps.len(),
        stride,
        weighting,
    }))
}

// ---------------------------------------------------------------------------
// discrete / continuous execution
// ---------------------------------------------------------------------------

/// Executes a discrete-mode config and writes all artifacts.
///
/// Divergence is *not* an `Err`: the partial trace is flushed and the status
/// records the last valid step (sweeps and CLIs decide how to surface it).
pub fn run_discrete(cfg: &RunConfig) -> Result<RunOutput> {
    if cfg.mode != Mode::Discrete {
        return Err(Error::Config(format!(
            "run_discrete called on a {} config",
            cfg.mode.name()
        )));
    }
    if cfg.dt.is_some() || cfg.method.is_some() {
        return Err(Error::Config(
            "dt/method apply to continuous dynamics only".into(),
        ));
    }
    if cfg.sweep.is_some() {
        return Err(Error::Config(
            "sweep table present in a discrete-mode config".into(),
        ));
    }
    let started = Instant::now();
    let common = resolve_common(cfg)?;
    let n = require_n(cfg)?;
    let sk = schedule_constants(
        &cfg.schedule,
        &common.kernel,
        &common.constants,
        common.restrict_k,
        n,
        common.d,
    )?;
    let (schedule, t_run) = resolve_discrete_schedule(&cfg.schedule, &sk)?;
    let (stride, stride_adjusted) = resolve_stride(cfg.snapshot_stride, t_run, n)?;

    let init = sample_initial(
        n,
        &common.init_mean,
        &common.init_cov,
        cfg.seed,
        common.restrict_k.map(|k| (&common.target, k)),
    )?;

    let ctx = DiagnosticsContext {
        kernel: &common.kernel,
        target: &common.target,
        constants: &common.constants,
        w1_method: common.w1_method,
        w1_samples: common.w1_samples,
        w1_slices: common.w1_slices,
        w1_seed: cfg.seed ^ W1_SEED_SALT,
    };

    let mut trace = Vec::new();
    let nu0 = if t_run > 0 { schedule.nu_at(0) } else { 1.0 };
    trace.push(TraceRecord {
        step: 0,
        time: 0.0,
        h: None,
        report: ctx.report(&init.positions, nu0)?,
    });

    let mut state = init;
    let mut snaps: Vec<Snapshot> = Vec::new();
    let mut status = RunStatus::Completed;
    for step in 1..=t_run {
        let h = schedule.h_at(step - 1);
        let nu = schedule.nu_at(step - 1);
        match rsvgd_step(&common.kernel, &common.target, &state, h, nu) {
            Ok(next) => state = next,
            Err(Error::Divergence { step: s, t, detail }) => {
                status = RunStatus::Diverged {
                    step,
                    detail: format!("{detail} (internal step {s}, t = {t})"),
                };
                break;
            }
            Err(e) => return Err(e),
        }
        if step % common.diagnostics_every == 0 || step == t_run {
            trace.push(TraceRecord {
                step,
                time: state.elapsed_time,
                h: Some(h),
                report: ctx.report(&state.positions, nu)?,
            });
        }
        if step % stride == 0 || step == t_run {
            snaps.push(Snapshot {
                step,
                time: state.elapsed_time,
                positions: state.positions.clone(),
                h,
                nu,
            });
        }
    }

    let annealed = if status.is_completed() {
        annealed_diagnostics(&common.kernel, &common.target, &snaps, false, stride)?
    } else {
        None
    };

    let echo = echo_config(cfg, &common, Some(&sk), EchoSchedule::Discrete {
        schedule: &schedule,
        t_run,
        stride,
        stride_adjusted,
    });
    write_run_outputs(
        &common.output_dir,
        "discrete",
        &trace,
        &snaps,
        common.d,
        &status,
        annealed.as_ref(),
        &echo,
        started,
    )?;

    Ok(RunOutput {
        status,
        trace,
        final_state: state,
        annealed,
        output_dir: common.output_dir,
    })
}

/// Executes a continuous-mode config and writes all artifacts.
pub fn run_continuous(cfg: &RunConfig) -> Result<RunOutput> {
    if cfg.mode != Mode::Continuous {
        return Err(Error::Config(format!(
            "run_continuous called on a {} config",
            cfg.mode.name()
        )));
    }
    if cfg.sweep.is_some() {
        return Err(Error::Config(
            "sweep table present in a continuous-mode config".into(),
        ));
    }
    let started = Instant::now();
    let common = resolve_common(cfg)?;
    let n = require_n(cfg)?;
    let plan = resolve_continuous_plan(cfg.dt, cfg.method.as_deref(), &cfg.schedule, n)?;

    let n_full = (plan.horizon / plan.dt).floor() as usize;
    let remainder = plan.horizon - n_full as f64 * plan.dt;
    let take_partial = remainder > 1e-12 * plan.horizon;
    let total_steps = n_full + usize::from(take_partial);
    let (stride, stride_adjusted) = resolve_stride(cfg.snapshot_stride, total_steps + 1, n)?;

    let init = sample_initial(
        n,
        &common.init_mean,
        &common.init_cov,
        cfg.seed,
        common.restrict_k.map(|k| (&common.target, k)),
    )?;

    let ctx = DiagnosticsContext {
        kernel: &common.kernel,
        target: &common.target,
        constants: &common.constants,
        w1_method: common.w1_method,
        w1_samples: common.w1_samples,
        w1_slices: common.w1_slices,
        w1_seed: cfg.seed ^ W1_SEED_SALT,
    };

    let mut trace = vec![TraceRecord {
        step: 0,
        time: 0.0,
        h: None,
        report: ctx.report(&init.positions, plan.nu)?,
    }];
    // The t = 0 state enters the trapezoid quadrature.
    let mut snaps = vec![Snapshot {
        step: 0,
        time: 0.0,
        positions: init.positions.clone(),
        h: 0.0,
        nu: plan.nu,
    }];

    let mut x = init.positions.clone();
    let mut t = 0.0;
    let mut status = RunStatus::Completed;
    let mut steps_done = 0usize;
    for step in 1..=total_steps {
        let step_dt = if step <= n_full { plan.dt } else { remainder };
        let next = ode_step(&common.kernel, &common.target, &x, plan.nu, step_dt, plan.method);
        let next_t = if step == total_steps { plan.horizon } else { t + step_dt };
        let checked = next.and_then(|m| {
            validate_positions(&m, step, next_t)?;
            Ok(m)
        });
        match checked {
            Ok(m) => {
                x = m;
                t = next_t;
                steps_done = step;
            }
            Err(Error::Divergence { detail, .. }) => {
                status = RunStatus::Diverged { step, detail };
                break;
            }
            Err(e) => return Err(e),
        }
        if step % common.diagnostics_every == 0 || step == total_steps {
            trace.push(TraceRecord {
                step,
                time: t,
                h: Some(step_dt),
                report: ctx.report(&x, plan.nu)?,
            });
        }
        if (step % stride == 0 && step != total_steps) || step == total_steps {
            snaps.push(Snapshot {
                step,
                time: t,
                positions: x.clone(),
                h: step_dt,
                nu: plan.nu,
            });
        }
    }

    let annealed = if status.is_completed() {
        annealed_diagnostics(&common.kernel, &common.target, &snaps, true, stride)?
    } else {
        None
    };

    let echo = echo_config(cfg, &common, None, EchoSchedule::Continuous {
        plan: &plan,
        total_steps,
        stride,
        stride_adjusted,
    });
    write_run_outputs(
        &common.output_dir,
        "continuous",
        &trace,
        &snaps,
        common.d,
        &status,
        annealed.as_ref(),
        &echo,
        started,
    )?;

    Ok(RunOutput {
        status,
        trace,
        final_state: ParticleState {
            positions: x,
            step_index: steps_done,
            elapsed_time: t,
            rng_seed: cfg.seed,
        },
        annealed,
        output_dir: common.output_dir,
    })
}

// ---------------------------------------------------------------------------
// sweep execution
// ---------------------------------------------------------------------------

/// Replicate seed: `base ⊕ splitmix64(N, replicate)`, decorrelating replicates
/// without coupling them to list order.
pub fn replicate_seed(base: u64, n: usize, replicate: usize) -> u64 {
    base ^ splitmix64(((n as u64) << 20) ^ replicate as u64)
}

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Least-squares fit of `log y = slope·log x + intercept`.
pub fn fit_loglog_slope(x_values: &[f64], y_values: &[f64]) -> Result<(f64, f64)> {
    if x_values.len() != y_values.len() {
        return Err(Error::InvalidInput("x/y length mismatch".into()));
    }
    if x_values.len() < 2 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two points".into(),
        ));
    }
    let mut lx = Vec::with_capacity(x_values.len());
    let mut ly = Vec::with_capacity(y_values.len());
    for (&x, &y) in x_values.iter().zip(y_values) {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "log-log fit needs positive finite data (got ({x}, {y}))"
            )));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Clone, Copy)]
struct SweepJob {
    n: usize,
    replicate: usize,
    seed: u64,
}

enum SweepDynamics {
    Continuous,
    Discrete,
}

/// One sweep replicate: run the dynamics silently and return the annealed
/// `(ksd2, i_nu_stein)` pair.
fn sweep_replicate(
    cfg: &RunConfig,
    common: &ResolvedCommon,
    dynamics: &SweepDynamics,
    job: SweepJob,
) -> Result<(f64, f64)> {
    let n = job.n;
    if n * common.d > MAX_PROBLEM_SIZE {
        return Err(Error::Config(format!(
            "N·d = {} exceeds the desk-scale cap {MAX_PROBLEM_SIZE}",
            n * common.d
        )));
    }
    let init = sample_initial(
        n,
        &common.init_mean,
        &common.init_cov,
        job.seed,
        common.restrict_k.map(|k| (&common.target, k)),
    )?;

    let snaps: Vec<Snapshot>;
    let continuous;
    let stride;
    match dynamics {
        SweepDynamics::Continuous => {
            let plan = resolve_continuous_plan(cfg.dt, cfg.method.as_deref(), &cfg.schedule, n)?;
            let n_full = (plan.horizon / plan.dt).floor() as usize;
            let remainder = plan.horizon - n_full as f64 * plan.dt;
            let take_partial = remainder > 1e-12 * plan.horizon;
            let total_steps = n_full + usize::from(take_partial);
            let (eff_stride, _) = resolve_stride(cfg.snapshot_stride, total_steps + 1, n)?;
            stride = eff_stride;
            continuous = true;

            let mut x = init.positions;
            let mut t = 0.0;
            let mut acc = vec![Snapshot {
                step: 0,
                time: 0.0,
                positions: x.clone(),
                h: 0.0,
                nu: plan.nu,
            }];
            for step in 1..=total_steps {
                let step_dt = if step <= n_full { plan.dt } else { remainder };
                x = ode_step(&common.kernel, &common.target, &x, plan.nu, step_dt, plan.method)?;
                t = if step == total_steps { plan.horizon } else { t + step_dt };
                validate_positions(&x, step, t)?;
                if (step % stride == 0 && step != total_steps) || step == total_steps {
                    acc.push(Snapshot {
                        step,
                        time: t,
                        positions: x.clone(),
                        h: step_dt,
                        nu: plan.nu,
                    });
                }
            }
            snaps = acc;
        }
        SweepDynamics::Discrete => {
            let sk = schedule_constants(
                &cfg.schedule,
                &common.kernel,
                &common.constants,
                common.restrict_k,
                n,
                common.d,
            )?;
            let (schedule, t_run) = resolve_discrete_schedule(&cfg.schedule, &sk)?;
            let (eff_stride, _) = resolve_stride(cfg.snapshot_stride, t_run, n)?;
            stride = eff_stride;
            continuous = false;

            let mut state = init;
            let mut acc = Vec::new();
            for step in 1..=t_run {
                let h = schedule.h_at(step - 1);
                let nu = schedule.nu_at(step - 1);
                state = rsvgd_step(&common.kernel, &common.target, &state, h, nu)?;
                if step % stride == 0 || step == t_run {
                    acc.push(Snapshot {
                        step,
                        time: state.elapsed_time,
                        positions: state.positions.clone(),
                        h,
                        nu,
                    });
                }
            }
            snaps = acc;
        }
    }

    let ann = annealed_diagnostics(&common.kernel, &common.target, &snaps, continuous, stride)?
        .ok_or_else(|| Error::Numerical("sweep replicate produced no snapshots".into()))?;
    Ok((ann.ksd2, ann.i_nu_stein))
}

/// Executes a sweep: replicated runs per N (concurrently, in waves bounded by
/// the available parallelism), deterministic aggregation sorted by
/// (N, replicate), rate table, and log-log slope over surviving N values.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutput> {
    if cfg.mode != Mode::Sweep {
        return Err(Error::Config(format!(
            "run_sweep called on a {} config",
            cfg.mode.name()
        )));
    }
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep mode requires the \"sweep\" table".into()))?;
    if cfg.n_particles.is_some() {
        return Err(Error::Config(
            "sweep mode takes N from sweep.N_list; remove the top-level N".into(),
        ));
    }
    if cfg.diagnostics_every.is_some() {
        return Err(Error::Config(
            "diagnostics_every does not apply to sweep mode (no trace)".into(),
        ));
    }
    if cfg.w1.is_some() {
        return Err(Error::Config(
            "w1 diagnostics are not computed in sweep mode".into(),
        ));
    }
    let mut n_sorted = sweep.n_list.clone();
    n_sorted.sort_unstable();
    n_sorted.dedup();
    if n_sorted.len() < 3 {
        return Err(Error::Config(format!(
            "sweep needs ≥ 3 distinct N values (got {:?})",
            sweep.n_list
        )));
    }
    if n_sorted[0] == 0 {
        return Err(Error::Config("sweep N values must be ≥ 1".into()));
    }
    if sweep.replicates == 0 {
        return Err(Error::Config("sweep.replicates must be ≥ 1".into()));
    }
    let dynamics = match sweep.dynamics.as_deref().unwrap_or("continuous") {
        "continuous" => SweepDynamics::Continuous,
        "discrete" => SweepDynamics::Discrete,
        other => {
            return Err(Error::Config(format!(
                "unknown sweep.dynamics \"{other}\" (expected continuous or discrete)"
            )));
        }
    };

    let started = Instant::now();
    let common = resolve_common(cfg)?;
    // Validate the per-N plans up front so config errors surface before any
    // compute is spent.
    for &n in &n_sorted {
        match dynamics {
            SweepDynamics::Continuous => {
                resolve_continuous_plan(cfg.dt, cfg.method.as_deref(), &cfg.schedule, n)?;
            }
            SweepDynamics::Discrete => {
                if cfg.dt.is_some() || cfg.method.is_some() {
                    return Err(Error::Config(
                        "dt/method apply to continuous dynamics only".into(),
                    ));
                }
                let sk = schedule_constants(
                    &cfg.schedule,
                    &common.kernel,
                    &common.constants,
                    common.restrict_k,
                    n,
                    common.d,
                )?;
                resolve_discrete_schedule(&cfg.schedule, &sk)?;
            }
        }
    }

    let jobs: Vec<SweepJob> = n_sorted
        .iter()
        .flat_map(|&n| {
            (0..sweep.replicates).map(move |replicate| SweepJob {
                n,
                replicate,
                seed: replicate_seed(cfg.seed, n, replicate),
            })
        })
        .collect();

    let parallelism = thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(4);
    let mut results: Vec<std::result::Result<(f64, f64), String>> =
        Vec::with_capacity(jobs.len());
    for wave in jobs.chunks(parallelism) {
        let wave_results: Vec<_> = thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&job| {
                    let common_ref = &common;
                    let dynamics_ref = &dynamics;
                    scope.spawn(move || {
                        sweep_replicate(cfg, common_ref, dynamics_ref, job)
                            .map_err(|e| e.to_string())
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err("replicate worker panicked".into()))
                })
                .collect()
        });
        results.extend(wave_results);
    }

    // Aggregation, deterministic: jobs were generated sorted by (N, replicate).
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &n_sorted {
        let mut i_values = Vec::new();
        let mut ksd_values = Vec::new();
        for (job, res) in jobs.iter().zip(&results) {
            if job.n != n {
                continue;
            }
            match res {
                Ok((ksd2, i_nu)) => {
                    ksd_values.push(*ksd2);
                    i_values.push(*i_nu);
                }
                Err(msg) => failures.push((n, job.replicate, msg.clone())),
            }
        }
        if i_values.is_empty() {
            continue;
        }
        let k = i_values.len() as f64;
        let mean_i = i_values.iter().sum::<f64>() / k;
        let mean_ksd = ksd_values.iter().sum::<f64>() / k;
        let stderr_i = if i_values.len() > 1 {
            let var = i_values.iter().map(|v| (v - mean_i) * (v - mean_i)).sum::<f64>()
                / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        rows.push(SweepRow {
            n,
            replicates_completed: i_values.len(),
            mean_i_nu_stein: mean_i,
            mean_ksd2: mean_ksd,
            stderr_i_nu_stein: stderr_i,
        });
    }

    let fit = {
        let xs: Vec<f64> = rows
            .iter()
            .filter(|r| r.mean_i_nu_stein > 0.0)
            .map(|r| r.n as f64)
            .collect();
        let ys: Vec<f64> = rows
            .iter()
            .filter(|r| r.mean_i_nu_stein > 0.0)
            .map(|r| r.mean_i_nu_stein)
            .collect();
        if xs.len() >= 2 {
            fit_loglog_slope(&xs, &ys).ok()
        } else {
            None
        }
    };
    let (slope, intercept) = match fit {
        Some((s, i)) => (Some(s), Some(i)),
        None => (None, None),
    };

    let echo = echo_config(cfg, &common, None, EchoSchedule::Sweep {
        dynamics: match dynamics {
            SweepDynamics::Continuous => "continuous",
            SweepDynamics::Discrete => "discrete",
        },
        n_list: &n_sorted,
        replicates: sweep.replicates,
    });
    write_sweep_outputs(
        &common.output_dir,
        &rows,
        slope,
        intercept,
        &failures,
        &echo,
        started,
    )?;

    if !failures.is_empty() {
        eprintln!(
            "warning: {} of {} sweep replicates failed; rate fit uses survivors",
            failures.len(),
            jobs.len()
        );
    }

    Ok(SweepOutput {
        rows,
        slope,
        intercept,
        failures,
        output_dir: common.output_dir,
    })
}

// ---------------------------------------------------------------------------
// artifact writing
// ---------------------------------------------------------------------------

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    for line in lines {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn snapshot_file_name(mode: &str, step: usize) -> String {
    format!("snap_{mode}_{step:08}.csv")
}

#[allow(clippy::too_many_arguments)]
fn write_run_outputs(
    dir: &Path,
    mode: &str,
    trace: &[TraceRecord],
    snaps: &[Snapshot],
    d: usize,
    status: &RunStatus,
    annealed: Option<&AnnealedDiagnostics>,
    echo: &Value,
    started: Instant,
) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;

    write_lines(
        &dir.join("trace.csv"),
        std::iter::once(TRACE_HEADER.to_string()).chain(trace.iter().map(|r| r.csv_row())),
    )?;

    let coord_header = (1..=d).map(|j| format!("x_{j}")).collect::<Vec<_>>().join(",");
    let mut snapshot_index = Vec::new();
    for s in snaps {
        let name = snapshot_file_name(mode, s.step);
        let rows = (0..s.positions.nrows()).map(|i| {
            (0..d)
                .map(|j| s.positions[(i, j)].to_string())
                .collect::<Vec<_>>()
                .join(",")
        });
        write_lines(
            &dir.join("snapshots").join(&name),
            std::iter::once(coord_header.clone()).chain(rows),
        )?;
        snapshot_index.push(json!({
            "file": format!("snapshots/{name}"),
            "step": s.step,
            "time": s.time,
        }));
    }

    let (status_str, diverged) = match status {
        RunStatus::Completed => ("completed", Value::Null),
        RunStatus::Diverged { step, detail } => (
            "diverged",
            json!({ "step": step, "detail": detail }),
        ),
    };
    let final_row = trace.last().map(|r| {
        json!({
            "step": r.step,
            "time": r.time,
            "ksd2": r.report.ksd2,
            "i_nu_stein": r.report.i_nu_stein,
            "c_star": r.report.c_star,
            "c_star_bound": r.report.c_star_bound,
            "v_average": r.report.v_average,
            "w1": r.report.w1_to_target,
        })
    });
    let annealed_json = annealed.map(|a| {
        json!({
            "ksd2": a.ksd2,
            "i_nu_stein": a.i_nu_stein,
            "nu": a.nu,
            "pool_size": a.pool_size,
            "n_snapshots": a.n_snapshots,
            "stride": a.stride,
            "weighting": a.weighting,
        })
    });
    let summary = json!({
        "mode": mode,
        "status": status_str,
        "diverged": diverged,
        "final": final_row,
        "annealed": annealed_json,
        "snapshots": snapshot_index,
        "trace_rows": trace.len(),
        "wallclock_ms": started.elapsed().as_millis() as u64,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("config_resolved.json"), echo)?;
    Ok(())
}

fn write_sweep_outputs(
    dir: &Path,
    rows: &[SweepRow],
    slope: Option<f64>,
    intercept: Option<f64>,
    failures: &[(usize, usize, String)],
    echo: &Value,
    started: Instant,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_lines(
        &dir.join("rates.csv"),
        std::iter::once(RATES_HEADER.to_string()).chain(rows.iter().map(|r| r.csv_row())),
    )?;
    let summary = json!({
        "mode": "sweep",
        "slope": slope,
        "intercept": intercept,
        "rows": rows.iter().map(|r| json!({
            "N": r.n,
            "replicates": r.replicates_completed,
            "mean_i_nu_stein": r.mean_i_nu_stein,
            "mean_ksd2": r.mean_ksd2,
            "stderr_i_nu_stein": r.stderr_i_nu_stein,
        })).collect::<Vec<_>>(),
        "failures": failures.iter().map(|(n, rep, msg)| json!({
            "N": n,
            "replicate": rep,
            "error": msg,
        })).collect::<Vec<_>>(),
        "wallclock_ms": started.elapsed().as_millis() as u64,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("config_resolved.json"), echo)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// config echo
// ---------------------------------------------------------------------------

enum EchoSchedule<'a> {
    Discrete {
        schedule: &'a Schedule,
        t_run: usize,
        stride: usize,
        stride_adjusted: bool,
    },
    Continuous {
        plan: &'a ContinuousPlan,
        total_steps: usize,
        stride: usize,
        stride_adjusted: bool,
    },
    Sweep {
        dynamics: &'a str,
        n_list: &'a [usize],
        replicates: usize,
    },
}

/// The fully resolved config: every default filled in, plus the resolved
/// schedule and the derived (non-configurable) constants.
fn echo_config(
    cfg: &RunConfig,
    common: &ResolvedCommon,
    sk: Option<&ScheduleConstants>,
    schedule: EchoSchedule,
) -> Value {
    let kernel = &common.kernel;
    let target = &common.target;
    let c = &common.constants;

    let resolved_schedule = match &schedule {
        EchoSchedule::Discrete {
            schedule: s,
            t_run,
            stride,
            stride_adjusted,
        } => {
            let mut entries = Vec::new();
            let mut truncated = false;
            if s.is_constant() {
                entries.push(json!({
                    "h": s.h_at(0),
                    "nu": s.nu_at(0),
                    "steps": s.t_steps(),
                }));
            } else {
                for n in 0..s.t_steps().min(ECHO_SCHEDULE_CAP) {
                    entries.push(json!({
                        "n": n + 1,
                        "h": s.h_at(n),
                        "nu": s.nu_at(n),
                        "C_n": s.c_history().get(n),
                    }));
                }
                truncated = s.t_steps() > ECHO_SCHEDULE_CAP;
            }
            json!({
                "kind": if s.is_constant() { "constant" } else { "per_step" },
                "theta": s.theta(),
                "theta_shrinks": s.theta_shrinks(),
                "c_h": s.c_h(),
                "t_steps_constructed": s.t_steps(),
                "t_steps_run": t_run,
                "total_h_over_nu": s.total_h_over_nu(),
                "snapshot_stride": stride,
                "snapshot_stride_adjusted": stride_adjusted,
                "entries": entries,
                "entries_truncated": truncated,
            })
        }
        EchoSchedule::Continuous {
            plan,
            total_steps,
            stride,
            stride_adjusted,
        } => json!({
            "kind": "continuous",
            "nu": plan.nu,
            "horizon": plan.horizon,
            "dt": plan.dt,
            "method": plan.method.name(),
            "total_steps": total_steps,
            "snapshot_stride": stride,
            "snapshot_stride_adjusted": stride_adjusted,
        }),
        EchoSchedule::Sweep {
            dynamics,
            n_list,
            replicates,
        } => json!({
            "kind": "sweep",
            "dynamics": dynamics,
            "N_list": n_list,
            "replicates": replicates,
        }),
    };

    let covariances: Vec<Vec<Vec<f64>>> = target
        .covariances()
        .iter()
        .map(|m| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        })
        .collect();
    let init_cov: Vec<Vec<f64>> = (0..common.d)
        .map(|i| (0..common.d).map(|j| common.init_cov[(i, j)]).collect())
        .collect();

    json!({
        "mode": cfg.mode.name(),
        "seed": cfg.seed,
        "N": cfg.n_particles,
        "d": common.d,
        "kernel": {
            "family": kernel.family().name(),
            "lengthscale": kernel.lengthscale(),
            "beta": kernel.imq_exponent(),
            "alpha_rq": kernel.rq_alpha(),
            "bound_B": kernel.bound(),
        },
        "target": {
            "family": target.family().name(),
            "means": target.means(),
            "covariances": covariances,
            "weights": target.mixture_weights(),
            "v_offset": target.v_offset(),
            "derived_constants": {
                "C_V": c.c_v,
                "A": c.growth_a,
                "alpha": c.growth_alpha,
                "c_star": {
                    "value": c.c_star.value,
                    "exact": c.c_star.exact,
                    "grid_points_per_dim": c.c_star.grid_points_per_dim,
                    "grid_lo": c.c_star.grid_lo,
                    "grid_hi": c.c_star.grid_hi,
                    "margin": c.c_star.margin,
                },
                "C_V_empirical": c.c_v_empirical,
                "c_pi": c.c_pi,
            },
        },
        "init": {
            "mean": common.init_mean,
            "covariance": init_cov,
            "restrict_K": common.restrict_k,
        },
        "schedule": {
            "type": cfg.schedule.kind,
            "constants": sk.map(|k| json!({
                "A": k.growth_a,
                "alpha": k.alpha,
                "B": k.kernel_bound,
                "C_V": k.c_v,
                "M_proxy": k.m_proxy,
                "K": k.k_level,
            })),
        },
        "resolved_schedule": resolved_schedule,
        "diagnostics_every": common.diagnostics_every,
        "w1": {
            "method": common.w1_method.map(|m| m.name()).unwrap_or("none"),
            "n_target_samples": common.w1_samples,
            "n_slices": common.w1_slices,
        },
        "output_dir": common.output_dir.display().to_string(),
    })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
