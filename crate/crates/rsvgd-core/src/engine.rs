//! The samplers: discrete R-SVGD / SVGD steps, the continuous-time interacting
//! ODE, fixed-step integrators, initialization, and annealed-measure pooling.
//!
//! The driving vector field is the kernelized **Stein force**
//!
//! ```text
//! F(X)_i = (1/N) Σ_j [ k(x^i, x^j) ∇V(x^j) − ∇₂k(x^i, x^j) ]
//! ```
//!
//! (attractive drift toward the target minus kernel repulsion). One discrete
//! R-SVGD step moves `X ← X − h · ((1−ν)/N·K + νI)^{−1} F(X)`; at ν = 1 the
//! preconditioner is the identity and the step is bitwise equal to plain SVGD.
//! The continuous-time system integrates `Ẋ = −((1−ν)/N·K + νI)^{−1} F(X)`
//! with fixed-step euler or classical RK4.
//!
//! Annealed (time-averaged) measures are represented exactly as weighted pools
//! of snapshot particles: trapezoidal quadrature weights over retained times in
//! continuous mode, supplied per-snapshot weights (e.g. `h_n/(1−ν_n)`) in
//! discrete mode, with every particle of a snapshot sharing its snapshot weight
//! equally.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernels::{sqdist, KernelSpec};
use crate::regsolve::{row_major, GramSystem};
use crate::targets::TargetSpec;
use crate::{Error, Result};

/// Any coordinate beyond this magnitude is treated as a blown-up trajectory.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Attempt budget for rejection sampling of restricted initial configurations.
const MAX_INIT_REJECTIONS: usize = 10_000;

/// The particle configuration plus bookkeeping carried along a run.
#[derive(Debug, Clone)]
pub struct ParticleState {
    /// N×d matrix; row i is particle i.
    pub positions: DMatrix<f64>,
    /// Number of accepted discrete steps (or integrator steps) taken.
    pub step_index: usize,
    /// Accumulated time: Σ h_n in discrete mode, ODE time in continuous mode.
    pub elapsed_time: f64,
    /// Seed that generated the initial configuration.
    pub rng_seed: u64,
}

impl ParticleState {
    pub fn new(positions: DMatrix<f64>, rng_seed: u64) -> Result<Self> {
        if positions.nrows() == 0 || positions.ncols() == 0 {
            return Err(Error::InvalidInput(
                "particle matrix must be nonempty".into(),
            ));
        }
        if let Some((i, _)) = positions.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "particle entry {} is not finite",
                i
            )));
        }
        Ok(ParticleState {
            positions,
            step_index: 0,
            elapsed_time: 0.0,
            rng_seed,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }
}

/// A particle pool with simplex weights — the carrier for annealed measures
/// and all weighted diagnostics.
#[derive(Debug, Clone)]
pub struct WeightedEmpiricalMeasure {
    positions: DMatrix<f64>,
    weights: Vec<f64>,
}

impl WeightedEmpiricalMeasure {
    pub fn new(positions: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if positions.nrows() == 0 || positions.ncols() == 0 {
            return Err(Error::InvalidInput("measure must be nonempty".into()));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "measure positions contain non-finite entries".into(),
            ));
        }
        if weights.len() != positions.nrows() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} particles",
                weights.len(),
                positions.nrows()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be nonnegative finite numbers".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights must sum to 1 ± 1e−12 (got {sum})"
            )));
        }
        Ok(WeightedEmpiricalMeasure { positions, weights })
    }

    /// Uniform measure on the rows of `positions`.
    pub fn uniform(positions: DMatrix<f64>) -> Result<Self> {
        let n = positions.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("measure must be nonempty".into()));
        }
        Self::new(positions, vec![1.0 / n as f64; n])
    }

    pub fn positions(&self) -> &DMatrix<f64> {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }
}

/// Integration scheme for the continuous-time system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Euler,
    Rk4,
}

impl IntegrationMethod {
    pub fn name(self) -> &'static str {
        match self {
            IntegrationMethod::Euler => "euler",
            IntegrationMethod::Rk4 => "rk4",
        }
    }
}

/// Pooling rule for [`annealed_measure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnealMode {
    /// Trapezoidal quadrature weights over the snapshot times.
    ContinuousTrapezoid,
    /// Caller-supplied per-snapshot weights (normalized internally).
    DiscreteWeighted,
}

/// Result of [`integrate`].
#[derive(Debug, Clone)]
pub struct Integration {
    pub final_state: ParticleState,
    /// `(t, positions)` at t = 0, stride multiples, and the horizon.
    pub snapshots: Vec<(f64, DMatrix<f64>)>,
}

/// The kernelized Stein force; row i is
/// `(1/N) Σ_j [ k(x^i,x^j) ∇V(x^j) − ∇₂k(x^i,x^j) ]`.
pub fn stein_force(
    kernel: &KernelSpec,
    target: &TargetSpec,
    positions: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = positions.nrows();
    let d = positions.ncols();
    if d != target.dim() {
        return Err(Error::InvalidInput(format!(
            "particles have dimension {d} but target has dimension {}",
            target.dim()
        )));
    }
    if positions.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "particle positions contain non-finite entries".into(),
        ));
    }

    let rows = row_major(positions);
    // ∇V at every particle, precomputed once.
    let mut grads = vec![0.0; n * d];
    for j in 0..n {
        let g = target.grad_unchecked(&rows[j * d..(j + 1) * d]);
        for a in 0..d {
            grads[j * d + a] = g[a];
        }
    }

    let mut force = vec![0.0; n * d];
    for i in 0..n {
        let xi = &rows[i * d..(i + 1) * d];
        for j in 0..n {
            let xj = &rows[j * d..(j + 1) * d];
            let (kv, dphi, _) = kernel.profile_derivs(sqdist(xi, xj));
            // −∇₂k(x^i,x^j) = 2 φ'(s) (x^i − x^j).
            for a in 0..d {
                force[i * d + a] += kv * grads[j * d + a] + 2.0 * dphi * (xi[a] - xj[a]);
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for (i, chunk) in force.chunks(d).enumerate() {
        if chunk.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "Stein force is not finite at particle {i}"
            )));
        }
    }
    Ok(DMatrix::from_fn(n, d, |i, a| force[i * d + a] * inv_n))
}

/// One discrete R-SVGD step `X ← X − h·((1−ν)/N·K + νI)^{−1} F(X)`.
pub fn rsvgd_step(
    kernel: &KernelSpec,
    target: &TargetSpec,
    state: &ParticleState,
    h: f64,
    nu: f64,
) -> Result<ParticleState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step size must be positive (got {h})"
        )));
    }
    let force = stein_force(kernel, target, &state.positions)?;
    let sys = GramSystem::build(kernel, &state.positions, nu)?;
    let direction = sys.solve(&force)?;
    advance(state, &direction, h)
}

/// One plain SVGD step `X ← X − h·F(X)`; equals [`rsvgd_step`] at ν = 1.
pub fn svgd_step(
    kernel: &KernelSpec,
    target: &TargetSpec,
    state: &ParticleState,
    h: f64,
) -> Result<ParticleState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step size must be positive (got {h})"
        )));
    }
    let force = stein_force(kernel, target, &state.positions)?;
    advance(state, &force, h)
}

fn advance(state: &ParticleState, direction: &DMatrix<f64>, h: f64) -> Result<ParticleState> {
    let positions = &state.positions - direction * h;
    validate_positions(&positions, state.step_index + 1, state.elapsed_time + h)?;
    Ok(ParticleState {
        positions,
        step_index: state.step_index + 1,
        elapsed_time: state.elapsed_time + h,
        rng_seed: state.rng_seed,
    })
}

pub(crate) fn validate_positions(positions: &DMatrix<f64>, step: usize, t: f64) -> Result<()> {
    for (idx, v) in positions.iter().enumerate() {
        if !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD {
            let n = positions.nrows();
            return Err(Error::Divergence {
                step,
                t,
                detail: format!(
                    "particle {} coordinate {} left the admissible range (value {v})",
                    idx % n,
                    idx / n
                ),
            });
        }
    }
    Ok(())
}

/// Right-hand side of the continuous-time system:
/// `Ẋ = −((1−ν)/N·K + νI)^{−1} F(X)`.
pub fn rsvgf_rhs(
    kernel: &KernelSpec,
    target: &TargetSpec,
    positions: &DMatrix<f64>,
    nu: f64,
) -> Result<DMatrix<f64>> {
    let force = stein_force(kernel, target, positions)?;
    let sys = GramSystem::build(kernel, positions, nu)?;
    Ok(-sys.solve(&force)?)
}

/// One explicit time step of the continuous-time system.
pub(crate) fn ode_step(
    kernel: &KernelSpec,
    target: &TargetSpec,
    x: &DMatrix<f64>,
    nu: f64,
    step_dt: f64,
    method: IntegrationMethod,
) -> Result<DMatrix<f64>> {
    Ok(match method {
        IntegrationMethod::Euler => {
            let k1 = rsvgf_rhs(kernel, target, x, nu)?;
            x + k1 * step_dt
        }
        IntegrationMethod::Rk4 => {
            let k1 = rsvgf_rhs(kernel, target, x, nu)?;
            let k2 = rsvgf_rhs(kernel, target, &(x + &k1 * (step_dt / 2.0)), nu)?;
            let k3 = rsvgf_rhs(kernel, target, &(x + &k2 * (step_dt / 2.0)), nu)?;
            let k4 = rsvgf_rhs(kernel, target, &(x + &k3 * step_dt), nu)?;
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step_dt / 6.0)
        }
    })
}

/// Fixed-step integration of the continuous-time system to time `t_horizon`.
///
/// Snapshots are recorded at t = 0, after every `snapshot_stride`-th step, and
/// at the horizon (deduplicated). A final shortened step lands exactly on the
/// horizon when `t_horizon` is not a multiple of `dt`.
pub fn integrate(
    kernel: &KernelSpec,
    target: &TargetSpec,
    init: &ParticleState,
    nu: f64,
    t_horizon: f64,
    dt: f64,
    method: IntegrationMethod,
    snapshot_stride: usize,
) -> Result<Integration> {
    if !(t_horizon > 0.0 && t_horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "horizon must be positive (got {t_horizon})"
        )));
    }
    if !(dt > 0.0 && dt <= t_horizon) {
        return Err(Error::InvalidInput(format!(
            "dt must satisfy 0 < dt ≤ horizon (got dt = {dt}, horizon = {t_horizon})"
        )));
    }
    if snapshot_stride == 0 {
        return Err(Error::InvalidInput("snapshot stride must be ≥ 1".into()));
    }

    let mut x = init.positions.clone();
    validate_positions(&x, 0, 0.0)?;
    let mut snapshots = vec![(0.0, x.clone())];
    let mut last_snap_step = 0usize;

    let n_full = (t_horizon / dt).floor() as usize;
    let remainder = t_horizon - n_full as f64 * dt;
    let take_partial = remainder > 1e-12 * t_horizon;
    let total_steps = n_full + usize::from(take_partial);

    let mut t = 0.0;
    for step in 1..=total_steps {
        let step_dt = if step <= n_full { dt } else { remainder };
        x = ode_step(kernel, target, &x, nu, step_dt, method)?;
        t = if step == total_steps {
            t_horizon
        } else {
            t + step_dt
        };
        validate_positions(&x, step, t)?;
        if step % snapshot_stride == 0 && step != total_steps {
            snapshots.push((t, x.clone()));
            last_snap_step = step;
        }
    }
    if total_steps > last_snap_step {
        snapshots.push((t_horizon, x.clone()));
    }

    Ok(Integration {
        final_state: ParticleState {
            positions: x,
            step_index: init.step_index + total_steps,
            elapsed_time: init.elapsed_time + t_horizon,
            rng_seed: init.rng_seed,
        },
        snapshots,
    })
}

/// Pools snapshots into a weighted empirical measure.
///
/// - `ContinuousTrapezoid`: snapshot weights from trapezoidal quadrature over
///   the (strictly increasing) snapshot times;
/// - `DiscreteWeighted`: snapshot weights supplied by the caller (e.g.
///   `h_n/(1−ν_n)`), normalized internally.
///
/// Every particle of a snapshot receives `snapshot_weight / N`.
pub fn annealed_measure(
    snapshots: &[(f64, DMatrix<f64>)],
    mode: AnnealMode,
    discrete_weights: Option<&[f64]>,
) -> Result<WeightedEmpiricalMeasure> {
    if snapshots.is_empty() {
        return Err(Error::InvalidInput(
            "annealed measure needs at least one snapshot".into(),
        ));
    }
    let m = snapshots.len();
    let snap_weights: Vec<f64> = match mode {
        AnnealMode::ContinuousTrapezoid => {
            if m == 1 {
                vec![1.0]
            } else {
                for w in snapshots.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidInput(format!(
                            "snapshot times must be strictly increasing \
                             (got {} then {})",
                            w[0].0, w[1].0
                        )));
                    }
                }
                let mut w = vec![0.0; m];
                w[0] = (snapshots[1].0 - snapshots[0].0) / 2.0;
                w[m - 1] = (snapshots[m - 1].0 - snapshots[m - 2].0) / 2.0;
                for i in 1..m - 1 {
                    w[i] = (snapshots[i + 1].0 - snapshots[i - 1].0) / 2.0;
                }
                w
            }
        }
        AnnealMode::DiscreteWeighted => {
            let supplied = discrete_weights.ok_or_else(|| {
                Error::InvalidInput("discrete mode requires per-snapshot weights".into())
            })?;
            if supplied.len() != m {
                return Err(Error::InvalidInput(format!(
                    "{} weights for {} snapshots",
                    supplied.len(),
                    m
                )));
            }
            if supplied.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(
                    "snapshot weights must be nonnegative finite numbers".into(),
                ));
            }
            supplied.to_vec()
        }
    };
    let total: f64 = snap_weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "snapshot weights must have positive total mass".into(),
        ));
    }

    let d = snapshots[0].1.ncols();
    let n_total: usize = snapshots.iter().map(|(_, s)| s.nrows()).sum();
    let mut positions = DMatrix::zeros(n_total, d);
    let mut weights = Vec::with_capacity(n_total);
    let mut row = 0;
    for ((_, snap), sw) in snapshots.iter().zip(&snap_weights) {
        if snap.ncols() != d {
            return Err(Error::InvalidInput(
                "snapshots disagree on dimension".into(),
            ));
        }
        let per_particle = sw / total / snap.nrows() as f64;
        for i in 0..snap.nrows() {
            for a in 0..d {
                positions[(row, a)] = snap[(i, a)];
            }
            weights.push(per_particle);
            row += 1;
        }
    }
    // Renormalize exactly to absorb rounding drift.
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    WeightedEmpiricalMeasure::new(positions, weights)
}

/// Samples an i.i.d. gaussian initial configuration, optionally restricted by
/// rejection to the sublevel set `{X : (1/N) Σ_i V(x^i) ≤ level}`.
pub fn sample_initial(
    n: usize,
    mean: &[f64],
    covariance: &DMatrix<f64>,
    seed: u64,
    restriction: Option<(&TargetSpec, f64)>,
) -> Result<ParticleState> {
    let d = mean.len();
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput(
            "initialization needs n ≥ 1 and d ≥ 1".into(),
        ));
    }
    if covariance.nrows() != d || covariance.ncols() != d {
        return Err(Error::InvalidInput(format!(
            "init covariance is {}×{} but mean has dimension {d}",
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    let chol = nalgebra::linalg::Cholesky::new(covariance.clone())
        .ok_or_else(|| Error::Config("init covariance is not SPD".into()))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _attempt in 0..MAX_INIT_REJECTIONS {
        let mut positions = DMatrix::zeros(n, d);
        for i in 0..n {
            let z = nalgebra::DVector::from_fn(d, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let x = &l * z;
            for a in 0..d {
                positions[(i, a)] = mean[a] + x[a];
            }
        }
        match restriction {
            None => return ParticleState::new(positions, seed),
            Some((target, level)) => {
                let mut avg = 0.0;
                let mut ok = true;
                for i in 0..n {
                    let xi: Vec<f64> = positions.row(i).iter().copied().collect();
                    avg += target.potential(&xi)?;
                    if !avg.is_finite() {
                        ok = false;
                        break;
                    }
                }
                if ok && avg / n as f64 <= level {
                    return ParticleState::new(positions, seed);
                }
            }
        }
    }
    let (_, level) = restriction.expect("unrestricted sampling cannot exhaust attempts");
    Err(Error::InvalidInput(format!(
        "could not draw an initial configuration with mean potential ≤ {level} \
         in {MAX_INIT_REJECTIONS} attempts; raise the level or adjust the init \
         distribution"
    )))
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
