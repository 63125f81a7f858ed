//! Bounded radial kernels with exact derivatives and an analytic uniform bound.
//!
//! All supported kernels are radial: `k(x, y) = φ(s)` with `s = ‖x − y‖²`.
//! Writing `u = x − y`, the quantities needed by the sampler and diagnostics are
//!
//! ```text
//! ∇₁k(x,y)      =  2 φ'(s) u                (gradient in the first argument)
//! ∇₂k(x,y)      = −2 φ'(s) u                (gradient in the second argument)
//! ∇₁·∇₂k(x,y)   = −2d φ'(s) − 4s φ''(s)     (cross divergence, the "repulsion trace")
//! Δ₂k(x,y)      =  2d φ'(s) + 4s φ''(s)     (Laplacian in the second argument)
//! ```
//!
//! so `Δ₂k = −∇₁·∇₂k` for every radial kernel. Both are still computed through
//! their own code paths so that tests can cross-check the identity rather than
//! assume it.
//!
//! Families:
//!
//! - **Gaussian RBF** `k = exp(−s / 2ℓ²)`.
//! - **Inverse multiquadric (IMQ)** `k = (c² + s)^{−β}`, `β > 0`, unnormalized.
//! - **Rational quadratic (RQ)** `k = (1 + s / 2αℓ²)^{−α}`, a scaled power-law
//!   kernel that interpolates toward the gaussian as α → ∞.
//!
//! Each spec carries `bound`, the exact supremum over all `x, y, d` of the
//! absolute value of the kernel, all its first partials, and all its second
//! partials. The closed forms are derived in the constructor comments and are
//! validated against dense grids in the property-test suite.

use crate::{ensure_finite_slice, Error, Result};

/// Supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    GaussianRbf,
    Imq,
    RationalQuadratic,
}

impl KernelFamily {
    /// Stable lowercase name used in configs and reports.
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::GaussianRbf => "gaussian_rbf",
            KernelFamily::Imq => "imq",
            KernelFamily::RationalQuadratic => "rational_quadratic",
        }
    }
}

/// Internal radial profile: every family reduces to either the gaussian profile
/// or a shifted power law `κ (c² + s)^{−β}`.
#[derive(Debug, Clone, Copy)]
enum Profile {
    /// `φ(s) = exp(−s/(2ℓ²))`, storing `1/(2ℓ²)`.
    Gaussian { half_inv_l2: f64 },
    /// `φ(s) = κ (c² + s)^{−β}`.
    Power { kappa: f64, c2: f64, beta: f64 },
}

impl Profile {
    /// Returns `(φ(s), φ'(s), φ''(s))`.
    #[inline]
    fn derivs(self, s: f64) -> (f64, f64, f64) {
        match self {
            Profile::Gaussian { half_inv_l2 } => {
                let phi = (-half_inv_l2 * s).exp();
                let d1 = -half_inv_l2 * phi;
                let d2 = half_inv_l2 * half_inv_l2 * phi;
                (phi, d1, d2)
            }
            Profile::Power { kappa, c2, beta } => {
                let base = c2 + s;
                let phi = kappa * base.powf(-beta);
                let d1 = -beta * phi / base;
                let d2 = beta * (beta + 1.0) * phi / (base * base);
                (phi, d1, d2)
            }
        }
    }
}

/// A validated kernel specification with its analytic uniform bound.
#[derive(Debug, Clone, Copy)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
    /// IMQ exponent β (`None` for other families).
    imq_exponent: Option<f64>,
    /// RQ shape α (`None` for other families).
    rq_alpha: Option<f64>,
    profile: Profile,
    bound: f64,
}

impl KernelSpec {
    /// Gaussian RBF kernel `k(x,y) = exp(−‖x−y‖² / 2ℓ²)`.
    ///
    /// Bound derivation (`s = ‖x−y‖²`, `u = x−y`, `t = ‖u‖`):
    /// - values: sup φ = φ(0) = 1;
    /// - first partials: `|2 u_a φ'| ≤ 2t|φ'(t²)| = (t/ℓ²) e^{−t²/2ℓ²}`,
    ///   maximized at `t = ℓ` giving `e^{−1/2}/ℓ`;
    /// - second partials: diagonal `|2φ' + 4u_a²φ''|` is extremal at `u_a² ∈ {0, s}`,
    ///   giving `sup (φ/ℓ²)·max(1, |s/ℓ² − 1|) = 1/ℓ²` at `s = 0`; off-diagonal
    ///   `|4 u_a u_b φ''| ≤ 2s|φ''| = (s/2ℓ⁴) e^{−s/2ℓ²} ≤ e^{−1}/ℓ² < 1/ℓ²`.
    ///
    /// Hence `bound = max(1, e^{−1/2}/ℓ, 1/ℓ²)`.
    pub fn gaussian_rbf(lengthscale: f64) -> Result<Self> {
        require_positive("lengthscale", lengthscale)?;
        let l2 = lengthscale * lengthscale;
        let bound = 1f64.max((-0.5f64).exp() / lengthscale).max(1.0 / l2);
        Ok(KernelSpec {
            family: KernelFamily::GaussianRbf,
            lengthscale,
            imq_exponent: None,
            rq_alpha: None,
            profile: Profile::Gaussian {
                half_inv_l2: 0.5 / l2,
            },
            bound,
        })
    }

    /// Inverse multiquadric kernel `k(x,y) = (c² + ‖x−y‖²)^{−β}` with `c` the
    /// lengthscale and `β > 0`.
    pub fn imq(lengthscale: f64, beta: f64) -> Result<Self> {
        require_positive("lengthscale", lengthscale)?;
        require_positive("beta", beta)?;
        let c2 = lengthscale * lengthscale;
        let bound = power_bound(1.0, c2, beta);
        Ok(KernelSpec {
            family: KernelFamily::Imq,
            lengthscale,
            imq_exponent: Some(beta),
            rq_alpha: None,
            profile: Profile::Power {
                kappa: 1.0,
                c2,
                beta,
            },
            bound,
        })
    }

    /// Rational quadratic kernel `k(x,y) = (1 + ‖x−y‖²/(2αℓ²))^{−α}` with `α > 0`.
    ///
    /// Equivalent power-law form: `κ (c² + s)^{−β}` with `κ = (2αℓ²)^α`,
    /// `c² = 2αℓ²`, `β = α`.
    pub fn rational_quadratic(lengthscale: f64, alpha: f64) -> Result<Self> {
        require_positive("lengthscale", lengthscale)?;
        require_positive("alpha", alpha)?;
        let c2 = 2.0 * alpha * lengthscale * lengthscale;
        let kappa = c2.powf(alpha);
        if !kappa.is_finite() || kappa == 0.0 {
            return Err(Error::InvalidInput(format!(
                "rational quadratic parameters overflow: (2αℓ²)^α = {kappa} \
                 for ℓ = {lengthscale}, α = {alpha}"
            )));
        }
        let bound = power_bound(kappa, c2, alpha);
        Ok(KernelSpec {
            family: KernelFamily::RationalQuadratic,
            lengthscale,
            imq_exponent: None,
            rq_alpha: Some(alpha),
            profile: Profile::Power {
                kappa,
                c2,
                beta: alpha,
            },
            bound,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn imq_exponent(&self) -> Option<f64> {
        self.imq_exponent
    }

    pub fn rq_alpha(&self) -> Option<f64> {
        self.rq_alpha
    }

    /// Exact supremum of |k|, all first partials, and all second partials,
    /// uniformly over both arguments and over the dimension.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `(φ, φ', φ'')` at squared distance `s`; the raw ingredients for every
    /// kernel quantity. Exposed to the crate so hot loops can evaluate once per
    /// particle pair.
    #[inline]
    pub(crate) fn profile_derivs(&self, s: f64) -> (f64, f64, f64) {
        self.profile.derivs(s)
    }

    /// `k(x, y)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.validate_pair(x, y)?;
        Ok(self.profile.derivs(sqdist(x, y)).0)
    }

    /// `∇₁k(x, y)` (gradient in the first argument).
    pub fn grad1(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.validate_pair(x, y)?;
        let (_, d1, _) = self.profile.derivs(sqdist(x, y));
        Ok(x.iter().zip(y).map(|(a, b)| 2.0 * d1 * (a - b)).collect())
    }

    /// `∇₂k(x, y)` (gradient in the second argument); equals `−∇₁k` for radial kernels.
    pub fn grad2(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.validate_pair(x, y)?;
        let (_, d1, _) = self.profile.derivs(sqdist(x, y));
        Ok(x.iter().zip(y).map(|(a, b)| -2.0 * d1 * (a - b)).collect())
    }

    /// Cross divergence `∇₁·∇₂ k(x, y) = Σ_a ∂²k/∂x_a∂y_a`.
    pub fn cross_div(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.validate_pair(x, y)?;
        let s = sqdist(x, y);
        let (_, d1, d2) = self.profile.derivs(s);
        let d = x.len() as f64;
        Ok(-2.0 * d * d1 - 4.0 * s * d2)
    }

    /// Laplacian in the second argument `Δ₂k(x, y) = Σ_a ∂²k/∂y_a²`.
    pub fn laplacian2(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.validate_pair(x, y)?;
        let s = sqdist(x, y);
        let (_, d1, d2) = self.profile.derivs(s);
        let d = x.len() as f64;
        Ok(2.0 * d * d1 + 4.0 * s * d2)
    }

    fn validate_pair(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "kernel arguments must be nonempty and of equal dimension \
                 (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        ensure_finite_slice("x", x)?;
        ensure_finite_slice("y", y)
    }
}

/// Squared euclidean distance between two equal-length slices.
#[inline]
pub(crate) fn sqdist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let u = a - b;
            u * u
        })
        .sum()
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "{name} must be a positive finite number (got {v})"
        )));
    }
    Ok(())
}

/// Exact uniform bound for the power-law profile `φ(s) = κ (c² + s)^{−β}`.
///
/// With `t = ‖x−y‖`, the candidate suprema are:
/// - values: `S0 = φ(0) = κ c^{−2β}`;
/// - first partials: `2t|φ'(t²)| = 2κβ t (c²+t²)^{−β−1}`, maximized at
///   `t² = c²/(2β+1)`:
///   `S1 = 2κβ c (2β+1)^{−1/2} · (c²(2β+2)/(2β+1))^{−β−1}`;
/// - second partials, diagonal `|2φ'(s) + 4u_a²φ''(s)|` with `u_a² ∈ {0, s}`:
///   * `u_a² = 0`: `2|φ'|` is maximal at `s = 0`: `2κβ (c²)^{−β−1}`;
///   * `u_a² = s`: `|2φ' + 4sφ''| = 2κβ (c²+s)^{−β−2} |(2β+1)s − c²|`, whose
///     interior critical point is `s* = 3c²/(2β+1)` with value
///     `4κβ (c²)^{−β−1} ((2β+1)/(2β+4))^{β+2}` (the `s = 0` endpoint repeats the
///     previous candidate);
/// - second partials, off-diagonal `|4u_au_bφ''| ≤ 2s|φ''| = 2κβ(β+1) s (c²+s)^{−β−2}`,
///   maximized at `s* = c²/(β+1)`: `2κβ(β+1) s* (c² + s*)^{−β−2}`.
fn power_bound(kappa: f64, c2: f64, beta: f64) -> f64 {
    let s0 = kappa * c2.powf(-beta);

    let t = (c2 / (2.0 * beta + 1.0)).sqrt();
    let s1 = 2.0 * kappa * beta * t * (c2 + t * t).powf(-beta - 1.0);

    let diag_origin = 2.0 * kappa * beta * c2.powf(-beta - 1.0);
    let diag_interior = 4.0
        * kappa
        * beta
        * c2.powf(-beta - 1.0)
        * ((2.0 * beta + 1.0) / (2.0 * beta + 4.0)).powf(beta + 2.0);
    let s_off = c2 / (beta + 1.0);
    let off_diag = 2.0 * kappa * beta * (beta + 1.0) * s_off * (c2 + s_off).powf(-beta - 2.0);
    let s2 = diag_origin.max(diag_interior).max(off_diag);

    s0.max(s1).max(s2)
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
