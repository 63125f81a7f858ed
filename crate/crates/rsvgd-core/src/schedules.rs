//! Step-size / regularization schedules with programmatic feasibility checks.
//!
//! A schedule is a pair of sequences `(h_n, ν_n)` for `n = 1..T` plus a global
//! scale `θ ∈ [0, 1]`. Admissibility is the three-way cap, for every `n`:
//!
//! ```text
//! h_n/ν_n ≤ min{ 1 / (16(1−α)² C_V A² B² Σ_{l<n} h_l/ν_l) ,
//!                N / (C_V ν_n B + 8Bd(1−ν_n)²ν_n^{−2}) ,
//!                1/B }
//! ```
//!
//! together with the curvature cap `h_n/ν_n ≤ (θ/2)·C_n^{−1/2}`, where
//!
//! ```text
//! C_n = 18·max{ ν_n^{−4} A²B⁴ N d M^{2α} (d^{1/(1−α)}+K)^{2α} (Σ_{l<n} h_l/ν_l ∨ 1)^{2α/(1−α)} ,
//!               ν_n^{−4} B⁴ N d² + B² C_V² d }
//! ```
//!
//! is the curvature proxy (dependent on the accumulated `Σ h_l/ν_l`, hence
//! computed sequentially).
//!
//! Constructors:
//!
//! - [`theorem7_schedule`] — the adaptive construction: sets
//!   `h_n = ν_n (θ/2) C_n^{−1/2}` exactly, shrinking `θ` geometrically (×0.5)
//!   and restarting whenever a cap binds;
//! - [`corollary9_regime1`] — constant `(h, ν)` with `ν = 1 − 1/N`, horizon
//!   `T = ⌈N^{2/(1−α)}⌉`, `θ = N^{−(1+α)/(2(1−α))}`, and
//!   `h ∝ (d^{(1+α)/(2(1−α))} + d + K^α √d)^{−(1−α)} · N^{−(1+α)/(1−α)}`;
//! - [`corollary9_regime2`] — constant `(h, ν)` with `ν = N^{−c}` for
//!   `0 ≤ c < (1−α)/(3−2α)`;
//! - [`corollary5_horizon`] — the continuous-time averaging horizon
//!   `(1−ν)^{−1/3} N^{2/3}`.
//!
//! The corollary constructors hide no constants: the proportionality factor is
//! pinned to the **largest power-of-2 fraction** `c_h ≤ 1` for which every cap
//! holds over the whole horizon, and the chosen fraction is recorded on the
//! schedule. Horizons can be astronomically long (`N^4` at α = 1/2), so
//! constant schedules are stored compactly and verified at the endpoints — the
//! accumulated `Σ h_l/ν_l` is increasing and every cap is monotone in it, so
//! the first and last step witness all intermediate ones.

use crate::{Error, Result};

/// Floor for the geometric θ shrink in [`theorem7_schedule`].
const THETA_FLOOR: f64 = 1e-6;
/// Floor for the power-of-2 proportionality search in the corollary
/// constructors (2^-60).
const CH_FLOOR: f64 = 8.673617379884035e-19;
/// Exponent cap inside the default M proxy, to keep it finite for sharp targets.
const M_PROXY_EXP_CAP: f64 = 30.0;

/// The problem constants every schedule formula consumes.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleConstants {
    /// Growth constant `A` (`‖∇V‖ ≤ A·V^α`).
    pub growth_a: f64,
    /// Growth exponent `α ∈ [0, 1/2]`.
    pub alpha: f64,
    /// Kernel derivative bound `B`.
    pub kernel_bound: f64,
    /// Hessian operator-norm bound `C_V`.
    pub c_v: f64,
    /// Proxy for the trajectory-stability constant `M` (not constructively
    /// derivable; see [`default_m_proxy`]).
    pub m_proxy: f64,
    /// Initialization sublevel constant `K`.
    pub k_level: f64,
    /// Particle count.
    pub n_particles: usize,
    /// Dimension.
    pub d: usize,
}

impl ScheduleConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("A", self.growth_a),
            ("B", self.kernel_bound),
            ("C_V", self.c_v),
            ("M_proxy", self.m_proxy),
            ("K", self.k_level),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "schedule constant {name} must be positive finite (got {v})"
                )));
            }
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!(
                "growth exponent α must lie in [0, 1/2] (got {})",
                self.alpha
            )));
        }
        if self.n_particles == 0 || self.d == 0 {
            return Err(Error::InvalidInput(
                "schedule constants need N ≥ 1 and d ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// Default trajectory-constant proxy `10·(1 + exp(min(C_V·A², 30)))`; the
/// exponent cap keeps the proxy finite for very sharp targets.
pub fn default_m_proxy(c_v: f64, growth_a: f64) -> f64 {
    10.0 * (1.0 + (c_v * growth_a * growth_a).min(M_PROXY_EXP_CAP).exp())
}

/// A resolved `(h_n, ν_n)` schedule.
#[derive(Debug, Clone)]
pub struct Schedule {
    /// Per-step values (length `t_steps`), or a single entry for constant
    /// schedules.
    h: Vec<f64>,
    nu: Vec<f64>,
    theta: f64,
    t_steps: usize,
    /// Curvature proxies `C_n` when materialized (adaptive construction, or
    /// constant schedules with desk-scale horizons).
    c_history: Vec<f64>,
    /// Total `Σ_{n≤T} h_n/ν_n`.
    total_h_over_nu: f64,
    /// Power-of-2 proportionality fraction (corollary constructors only).
    c_h: Option<f64>,
    /// Number of ×0.5 shrinks the θ search needed (adaptive construction only).
    theta_shrinks: usize,
}

/// One failed inequality found by [`verify_schedule`].
#[derive(Debug, Clone)]
pub struct Violation {
    /// 1-based step index.
    pub n: usize,
    pub constraint: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of [`verify_schedule`].
#[derive(Debug, Clone)]
pub struct ScheduleVerification {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl Schedule {
    /// A caller-chosen constant schedule (`θ` recorded as 1; the feasibility
    /// caps are *not* imposed here — run [`verify_schedule`] to audit it).
    pub fn constant(h: f64, nu: f64, t_steps: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step size must be positive finite (got {h})"
            )));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "ν must lie in (0, 1] (got {nu})"
            )));
        }
        Ok(Schedule {
            h: vec![h],
            nu: vec![nu],
            theta: 1.0,
            t_steps,
            c_history: vec![],
            total_h_over_nu: t_steps as f64 * h / nu,
            c_h: None,
            theta_shrinks: 0,
        })
    }

    pub fn is_constant(&self) -> bool {
        self.h.len() == 1
    }

    /// Step size at 0-based step index `n` (i.e. `h_{n+1}`).
    pub fn h_at(&self, n: usize) -> f64 {
        if self.is_constant() {
            self.h[0]
        } else {
            self.h[n]
        }
    }

    /// Regularizer at 0-based step index `n`.
    pub fn nu_at(&self, n: usize) -> f64 {
        if self.is_constant() {
            self.nu[0]
        } else {
            self.nu[n]
        }
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn total_h_over_nu(&self) -> f64 {
        self.total_h_over_nu
    }

    /// Materialized curvature proxies (may be empty for constant schedules).
    pub fn c_history(&self) -> &[f64] {
        &self.c_history
    }

    pub fn c_h(&self) -> Option<f64> {
        self.c_h
    }

    pub fn theta_shrinks(&self) -> usize {
        self.theta_shrinks
    }
}

/// The curvature proxy `C_n` given the accumulated `cum = Σ_{l<n} h_l/ν_l`.
fn curvature_proxy(k: &ScheduleConstants, nu: f64, cum: f64) -> f64 {
    let a = k.growth_a;
    let alpha = k.alpha;
    let b = k.kernel_bound;
    let n = k.n_particles as f64;
    let d = k.d as f64;
    let nu4 = nu.powi(-4);
    let branch_a = nu4
        * a
        * a
        * b.powi(4)
        * n
        * d
        * k.m_proxy.powf(2.0 * alpha)
        * (d.powf(1.0 / (1.0 - alpha)) + k.k_level).powf(2.0 * alpha)
        * cum.max(1.0).powf(2.0 * alpha / (1.0 - alpha));
    let branch_b = nu4 * b.powi(4) * n * d * d + b * b * k.c_v * k.c_v * d;
    18.0 * branch_a.max(branch_b)
}

/// The three-way cap on `h_n/ν_n` given `cum = Σ_{l<n} h_l/ν_l`; returns
/// `(accumulated_drift, regularization_stability, h_over_nu_max)` where the
/// first is `+∞` at `cum = 0`.
fn caps(k: &ScheduleConstants, nu: f64, cum: f64) -> (f64, f64, f64) {
    let alpha = k.alpha;
    let b = k.kernel_bound;
    let cap1 = if cum > 0.0 {
        1.0 / (16.0
            * (1.0 - alpha)
            * (1.0 - alpha)
            * k.c_v
            * k.growth_a
            * k.growth_a
            * b
            * b
            * cum)
    } else {
        f64::INFINITY
    };
    let cap2 = k.n_particles as f64
        / (k.c_v * nu * b + 8.0 * b * k.d as f64 * (1.0 - nu) * (1.0 - nu) / (nu * nu));
    let cap3 = 1.0 / b;
    (cap1, cap2, cap3)
}

/// The adaptive construction: `h_n = ν_n (θ/2) C_n^{−1/2}` with geometric θ
/// shrink until every cap holds.
///
/// `nu_override` supplies an explicit ν sequence (length ≥ `t_steps` or a
/// single value broadcast to all steps); the default is `ν_n ≡ 1 − 1/N`.
pub fn theorem7_schedule(
    constants: &ScheduleConstants,
    theta0: f64,
    t_steps: usize,
    nu_override: Option<&[f64]>,
) -> Result<Schedule> {
    constants.validate()?;
    if !(0.0..=1.0).contains(&theta0) || theta0 == 0.0 {
        return Err(Error::InvalidInput(format!(
            "θ must lie in (0, 1] (got {theta0})"
        )));
    }
    let nu_at = |n: usize| -> Result<f64> {
        let nu = match nu_override {
            Some([single]) => *single,
            Some(seq) => *seq.get(n).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "ν sequence has {} entries but the horizon is {t_steps}",
                    seq.len()
                ))
            })?,
            None => {
                if constants.n_particles < 2 {
                    return Err(Error::InvalidInput(
                        "default ν = 1 − 1/N needs N ≥ 2; supply ν explicitly".into(),
                    ));
                }
                1.0 - 1.0 / constants.n_particles as f64
            }
        };
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "ν must lie in (0, 1] (got {nu})"
            )));
        }
        Ok(nu)
    };

    let mut theta = theta0;
    let mut shrinks = 0usize;
    'search: loop {
        let mut h = Vec::with_capacity(t_steps);
        let mut nu_seq = Vec::with_capacity(t_steps);
        let mut c_hist = Vec::with_capacity(t_steps);
        let mut cum = 0.0;
        for n in 0..t_steps {
            let nu = nu_at(n)?;
            let c_n = curvature_proxy(constants, nu, cum);
            let ratio = (theta / 2.0) / c_n.sqrt();
            let (cap1, cap2, cap3) = caps(constants, nu, cum);
            let violated = if ratio > cap1 {
                Some("accumulated_drift")
            } else if ratio > cap2 {
                Some("regularization_stability")
            } else if ratio > cap3 {
                Some("h_over_nu_max")
            } else {
                None
            };
            if let Some(name) = violated {
                theta *= 0.5;
                shrinks += 1;
                if theta < THETA_FLOOR {
                    return Err(Error::Infeasible(format!(
                        "no θ ≥ {THETA_FLOOR:.0e} satisfies the caps; binding \
                         constraint: {name} at step {}",
                        n + 1
                    )));
                }
                continue 'search;
            }
            h.push(nu * ratio);
            nu_seq.push(nu);
            c_hist.push(c_n);
            cum += ratio;
        }
        return Ok(Schedule {
            h,
            nu: nu_seq,
            theta,
            t_steps,
            c_history: c_hist,
            total_h_over_nu: cum,
            c_h: None,
            theta_shrinks: shrinks,
        });
    }
}

/// Checks feasibility of a *constant* `(h, ν)` schedule over `t` steps,
/// including the curvature cap with scale `θ`. Exact despite only probing the
/// endpoints: `cum` is increasing in `n`, the drift cap and the curvature
/// proxy are monotone in `cum`, and the other caps are `n`-independent.
fn constant_feasible(
    k: &ScheduleConstants,
    h: f64,
    nu: f64,
    theta: f64,
    t: usize,
) -> Option<&'static str> {
    let ratio = h / nu;
    for n in [1usize, t.max(1)] {
        let cum = (n - 1) as f64 * ratio;
        let (cap1, cap2, cap3) = caps(k, nu, cum);
        if ratio > cap1 {
            return Some("accumulated_drift");
        }
        if ratio > cap2 {
            return Some("regularization_stability");
        }
        if ratio > cap3 {
            return Some("h_over_nu_max");
        }
        let c_n = curvature_proxy(k, nu, cum);
        if ratio > (theta / 2.0) / c_n.sqrt() {
            return Some("curvature");
        }
    }
    None
}

/// Largest `c_h = 2^{−j} ≤ 1` for which the constant schedule
/// `h = c_h · h_shape` passes every cap over the horizon.
fn pin_power_of_two(
    k: &ScheduleConstants,
    h_shape: f64,
    nu: f64,
    theta: f64,
    t: usize,
) -> Result<f64> {
    let mut c_h = 1.0;
    loop {
        if constant_feasible(k, c_h * h_shape, nu, theta, t).is_none() {
            return Ok(c_h);
        }
        c_h *= 0.5;
        if c_h < CH_FLOOR {
            let binding = constant_feasible(k, c_h * h_shape, nu, theta, t)
                .unwrap_or("curvature");
            return Err(Error::Infeasible(format!(
                "no power-of-2 fraction ≥ 2^-60 makes the constant schedule \
                 feasible; binding constraint: {binding}"
            )));
        }
    }
}

/// Constant-(h, ν) regime with `ν = 1 − 1/N`:
/// `T = ⌈N^{2/(1−α)}⌉`, `θ = N^{−(1+α)/(2(1−α))}`,
/// `h = c_h (d^{(1+α)/(2(1−α))} + d + K^α √d)^{−(1−α)} N^{−(1+α)/(1−α)}`.
pub fn corollary9_regime1(constants: &ScheduleConstants) -> Result<Schedule> {
    constants.validate()?;
    let n = constants.n_particles;
    if n < 2 {
        return Err(Error::InvalidInput("regime 1 needs N ≥ 2".into()));
    }
    let nf = n as f64;
    let d = constants.d as f64;
    let alpha = constants.alpha;
    let k_level = constants.k_level;

    let nu = 1.0 - 1.0 / nf;
    let t_real = nf.powf(2.0 / (1.0 - alpha)).ceil();
    if t_real > u64::MAX as f64 {
        return Err(Error::InvalidInput(format!(
            "horizon N^(2/(1−α)) = {t_real:.3e} overflows"
        )));
    }
    let t = t_real as usize;
    let theta = nf.powf(-(1.0 + alpha) / (2.0 * (1.0 - alpha)));
    let dim_factor = (d.powf((1.0 + alpha) / (2.0 * (1.0 - alpha)))
        + d
        + k_level.powf(alpha) * d.sqrt())
    .powf(-(1.0 - alpha));
    let h_shape = dim_factor * nf.powf(-(1.0 + alpha) / (1.0 - alpha));

    let c_h = pin_power_of_two(constants, h_shape, nu, theta, t)?;
    let h = c_h * h_shape;
    Ok(Schedule {
        h: vec![h],
        nu: vec![nu],
        theta,
        t_steps: t,
        c_history: vec![],
        total_h_over_nu: t as f64 * h / nu,
        c_h: Some(c_h),
        theta_shrinks: 0,
    })
}

/// Upper limit of the admissible polynomial decay `c` in regime 2.
pub fn regime2_c_limit(alpha: f64) -> f64 {
    (1.0 - alpha) / (3.0 - 2.0 * alpha)
}

/// Predicted decay-rate exponent of regime 2: the bound decays like
/// `N^{−(1−α−c(3−2α))}`.
pub fn regime2_rate_exponent(alpha: f64, c: f64) -> f64 {
    1.0 - alpha - c * (3.0 - 2.0 * alpha)
}

/// Constant-(h, ν) regime with polynomially decaying regularizer `ν = N^{−c}`,
/// `0 ≤ c < (1−α)/(3−2α)`:
/// `T = ⌈N^{3/2 + max(0, 1/2−2c)}⌉`, `θ = N^{−max(0, 1/2−2c)}`,
/// `h = c_h d^{−(1−α)/2} (d^{1/(1−α)}+K)^{−α(1−α)} N^{1−α−c(3−2α)−3/2−max(0,1/2−2c)}`.
pub fn corollary9_regime2(constants: &ScheduleConstants, c: f64) -> Result<Schedule> {
    constants.validate()?;
    let alpha = constants.alpha;
    let limit = regime2_c_limit(alpha);
    if !(0.0..limit).contains(&c) {
        return Err(Error::InvalidInput(format!(
            "regime 2 requires 0 ≤ c < (1−α)/(3−2α) = {limit} (got {c})"
        )));
    }
    let n = constants.n_particles;
    if n < 2 {
        return Err(Error::InvalidInput("regime 2 needs N ≥ 2".into()));
    }
    let nf = n as f64;
    let d = constants.d as f64;
    let k_level = constants.k_level;

    let nu = nf.powf(-c).min(1.0);
    let excess = (0.5 - 2.0 * c).max(0.0);
    let t_real = nf.powf(1.5 + excess).ceil();
    if t_real > u64::MAX as f64 {
        return Err(Error::InvalidInput(format!(
            "horizon N^(3/2+max(0,1/2−2c)) = {t_real:.3e} overflows"
        )));
    }
    let t = t_real as usize;
    let theta = nf.powf(-excess);
    let h_shape = d.powf(-(1.0 - alpha) / 2.0)
        * (d.powf(1.0 / (1.0 - alpha)) + k_level).powf(-alpha * (1.0 - alpha))
        * nf.powf(1.0 - alpha - c * (3.0 - 2.0 * alpha) - 1.5 - excess);

    let c_h = pin_power_of_two(constants, h_shape, nu, theta, t)?;
    let h = c_h * h_shape;
    Ok(Schedule {
        h: vec![h],
        nu: vec![nu],
        theta,
        t_steps: t,
        c_history: vec![],
        total_h_over_nu: t as f64 * h / nu,
        c_h: Some(c_h),
        theta_shrinks: 0,
    })
}

/// Continuous-time averaging horizon `(1−ν)^{−1/3} N^{2/3}`; rejects ν = 1,
/// where the horizon diverges.
pub fn corollary5_horizon(n: usize, nu: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("need N ≥ 1".into()));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidInput(format!(
            "averaging horizon needs ν ∈ (0, 1); got ν = {nu} \
             (the horizon diverges as ν → 1)"
        )));
    }
    Ok((1.0 - nu).powf(-1.0 / 3.0) * (n as f64).powf(2.0 / 3.0))
}

/// Re-evaluates every cap (the three-way min and the curvature cap) for the
/// whole schedule. Constant schedules are checked at their endpoints, which is
/// exact by monotonicity; per-step schedules are scanned in full.
pub fn verify_schedule(schedule: &Schedule, constants: &ScheduleConstants) -> ScheduleVerification {
    let mut violations = Vec::new();
    // Relative slack: the adaptive construction sets the curvature cap with
    // equality, so exact re-evaluation must not flag it.
    let tol = 1e-9;
    let mut check = |n: usize, ratio: f64, cum: f64, nu: f64| {
        let (cap1, cap2, cap3) = caps(constants, nu, cum);
        let c_n = curvature_proxy(constants, nu, cum);
        let cap4 = (schedule.theta / 2.0) / c_n.sqrt();
        for (name, rhs) in [
            ("accumulated_drift", cap1),
            ("regularization_stability", cap2),
            ("h_over_nu_max", cap3),
            ("curvature", cap4),
        ] {
            if ratio > rhs * (1.0 + tol) {
                violations.push(Violation {
                    n,
                    constraint: name,
                    lhs: ratio,
                    rhs,
                });
            }
        }
    };

    if schedule.is_constant() {
        let ratio = schedule.h[0] / schedule.nu[0];
        if schedule.t_steps >= 1 {
            check(1, ratio, 0.0, schedule.nu[0]);
        }
        if schedule.t_steps >= 2 {
            check(
                schedule.t_steps,
                ratio,
                (schedule.t_steps - 1) as f64 * ratio,
                schedule.nu[0],
            );
        }
    } else {
        let mut cum = 0.0;
        for n in 0..schedule.t_steps {
            let ratio = schedule.h[n] / schedule.nu[n];
            check(n + 1, ratio, cum, schedule.nu[n]);
            cum += ratio;
        }
    }
    ScheduleVerification {
        ok: violations.is_empty(),
        violations,
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
