//! Target potentials `V = −log π + const` with exact derivatives and derived
//! regularity constants.
//!
//! Two families:
//!
//! - **Gaussian** `V(x) = ½ (x−m)ᵀ Σ^{−1} (x−m) + V_offset`;
//! - **Gaussian mixture** `V(x) = −log Σ_r w_r c_r e^{−q_r(x)} + V_offset` with
//!   `q_r = ½ (x−m_r)ᵀ Σ_r^{−1} (x−m_r)` and `c_r` the gaussian normalizer,
//!   evaluated in log-sum-exp form for stability.
//!
//! The additive offset only shifts `V` (never `∇V`), so the sampler dynamics are
//! unchanged; it exists to make `inf V > 0`, which several derived constants and
//! schedule formulas assume. Defaults guarantee positivity.
//!
//! [`TargetSpec::derive_constants`] produces the constants the schedules and
//! diagnostic bounds consume:
//!
//! - `C_V` — uniform operator-norm bound on `∇²V` (exact top eigenvalue of
//!   `Σ^{−1}` for gaussians; a conservative analytic bound for mixtures, reported
//!   next to an empirical sampled maximum);
//! - `(A, α)` — growth constants with `‖∇V(x)‖ ≤ A·V(x)^α`, always with
//!   `α = 1/2` for these families (exact `A = √(2 C_V)` for gaussians, a
//!   margin-inflated sampled supremum for mixtures);
//! - `c*` — the diagonal self-interaction constant
//!   `sup_z |Δ₂k(z,z) − ∇₁k(z,z)·∇V(z) − k(z,z)·ΔV(z)| / d`, which for radial
//!   kernels reduces to `sup_z |Δ₂k(0) − k(0)·ΔV(z)| / d`: exact for gaussian
//!   targets (`ΔV` constant), a logged grid search for mixtures.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernels::KernelSpec;
use crate::{ensure_finite_slice, Error, Result};

const LOG_2PI: f64 = 1.837_877_066_409_345_3;

/// Fixed stream for the deterministic sampling inside `derive_constants`.
const CONSTANTS_SAMPLING_SEED: u64 = 0x5a11_70f1_77e5_c0de;

/// Supported target families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetFamily {
    Gaussian,
    GaussianMixture,
}

impl TargetFamily {
    pub fn name(self) -> &'static str {
        match self {
            TargetFamily::Gaussian => "gaussian",
            TargetFamily::GaussianMixture => "gaussian_mixture",
        }
    }
}

/// One mixture component with its cached factorizations.
#[derive(Debug, Clone)]
struct Component {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    /// Lower-triangular Cholesky factor of the covariance (for sampling).
    chol_l: DMatrix<f64>,
    /// `log c_r = −(d/2)·log 2π − ½·log det Σ_r`.
    log_norm: f64,
    /// Mixture weight (normalized).
    weight: f64,
    /// Top eigenvalue of the precision matrix.
    precision_lambda_max: f64,
    precision_trace: f64,
}

/// A validated target potential.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    family: TargetFamily,
    components: Vec<Component>,
    dim: usize,
    v_offset: f64,
}

/// Result of a diagonal self-interaction (`c*`) estimation, with the search
/// grid recorded so reports can state exactly how the value was obtained.
#[derive(Debug, Clone)]
pub struct CStarEstimate {
    /// The estimated constant (margin already applied when not exact).
    pub value: f64,
    /// True when the supremum is closed-form (gaussian target: `ΔV` constant).
    pub exact: bool,
    /// Grid resolution per dimension (0 when exact).
    pub grid_points_per_dim: usize,
    /// Per-dimension search interval (empty when exact).
    pub grid_lo: Vec<f64>,
    pub grid_hi: Vec<f64>,
    /// Multiplicative safety margin applied to the grid supremum (1.0 when exact).
    pub margin: f64,
}

/// Constants consumed by schedules and diagnostic bounds.
#[derive(Debug, Clone)]
pub struct TargetConstants {
    /// Operator-norm bound on the Hessian of `V`.
    pub c_v: f64,
    /// Growth constant `A` in `‖∇V‖ ≤ A·V^α`.
    pub growth_a: f64,
    /// Growth exponent `α` (1/2 for both supported families).
    pub growth_alpha: f64,
    /// Diagonal self-interaction constant for the paired kernel.
    pub c_star: CStarEstimate,
    /// Sampled maximum of `λ_max(∇²V)` (mixtures only; sanity companion to the
    /// analytic `c_v` bound).
    pub c_v_empirical: Option<f64>,
    /// Optional transport-information constant; not derivable for these
    /// families, so always `None` unless set by the caller.
    pub c_pi: Option<f64>,
}

impl TargetSpec {
    /// Single gaussian with mean `m` and SPD covariance `Σ`.
    ///
    /// `v_offset` defaults to 1 so that `inf V = V(m) = 1 > 0`.
    pub fn gaussian(
        mean: Vec<f64>,
        covariance: DMatrix<f64>,
        v_offset: Option<f64>,
    ) -> Result<Self> {
        Self::gaussian_mixture_impl(
            TargetFamily::Gaussian,
            vec![mean],
            vec![covariance],
            vec![1.0],
            v_offset,
        )
    }

    /// Standard gaussian `N(0, I_d)` with the default offset.
    pub fn standard_gaussian(dim: usize) -> Result<Self> {
        Self::gaussian(vec![0.0; dim], DMatrix::identity(dim, dim), None)
    }

    /// Gaussian mixture with the given means, SPD covariances, and positive
    /// weights (normalized to a simplex internally).
    ///
    /// `v_offset` defaults to `1 + max(0, log Σ_r w_r c_r)`, which dominates the
    /// mixture's maximum log-density and hence keeps `V` strictly positive.
    pub fn gaussian_mixture(
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
        weights: Vec<f64>,
        v_offset: Option<f64>,
    ) -> Result<Self> {
        Self::gaussian_mixture_impl(
            TargetFamily::GaussianMixture,
            means,
            covariances,
            weights,
            v_offset,
        )
    }

    fn gaussian_mixture_impl(
        family: TargetFamily,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
        weights: Vec<f64>,
        v_offset: Option<f64>,
    ) -> Result<Self> {
        if means.is_empty() || means.len() != covariances.len() || means.len() != weights.len() {
            return Err(Error::Config(format!(
                "component counts disagree: {} means, {} covariances, {} weights",
                means.len(),
                covariances.len(),
                weights.len()
            )));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::Config("target dimension must be ≥ 1".into()));
        }
        let wsum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) || !wsum.is_finite() || wsum <= 0.0 {
            return Err(Error::Config(
                "mixture weights must be positive finite numbers".into(),
            ));
        }

        let mut components = Vec::with_capacity(means.len());
        for (r, ((mean, cov), w)) in means.into_iter().zip(covariances).zip(&weights).enumerate() {
            if mean.len() != dim {
                return Err(Error::Config(format!(
                    "component {r}: mean has dimension {} but expected {dim}",
                    mean.len()
                )));
            }
            ensure_finite_slice("mean", &mean).map_err(|e| Error::Config(e.to_string()))?;
            if cov.nrows() != dim || cov.ncols() != dim {
                return Err(Error::Config(format!(
                    "component {r}: covariance is {}×{} but expected {dim}×{dim}",
                    cov.nrows(),
                    cov.ncols()
                )));
            }
            if (&cov - cov.transpose()).amax() > 1e-10 * (1.0 + cov.amax()) {
                return Err(Error::Config(format!(
                    "component {r}: covariance is not symmetric"
                )));
            }
            let chol = nalgebra::linalg::Cholesky::new(cov.clone()).ok_or_else(|| {
                Error::Config(format!(
                    "component {r}: covariance is not symmetric positive definite"
                ))
            })?;
            let precision = chol.inverse();
            let chol_l = chol.l();
            let log_det: f64 = 2.0 * chol_l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let log_norm = -0.5 * (dim as f64) * LOG_2PI - 0.5 * log_det;
            let sym_eigen = nalgebra::linalg::SymmetricEigen::new(precision.clone());
            let precision_lambda_max = sym_eigen.eigenvalues.max();
            components.push(Component {
                mean: DVector::from_vec(mean),
                covariance: cov,
                precision_trace: precision.trace(),
                precision,
                chol_l,
                log_norm,
                weight: w / wsum,
                precision_lambda_max,
            });
        }

        let v_offset = match v_offset {
            Some(v) => {
                if !v.is_finite() {
                    return Err(Error::Config("v_offset must be finite".into()));
                }
                v
            }
            None => match family {
                TargetFamily::Gaussian => 1.0,
                TargetFamily::GaussianMixture => {
                    // log Σ w_r c_r dominates the max log-density of the mixture.
                    let log_peak = log_sum_exp(
                        &components
                            .iter()
                            .map(|c| c.weight.ln() + c.log_norm)
                            .collect::<Vec<_>>(),
                    );
                    1.0 + log_peak.max(0.0)
                }
            },
        };

        let spec = TargetSpec {
            family,
            components,
            dim,
            v_offset,
        };
        // Positivity guard for explicit offsets: V attains its infimum near the
        // highest-density point; probe component modes and pairwise midpoints.
        for probe in spec.probe_points() {
            let v = spec.potential_unchecked(probe.as_slice());
            if v <= 0.0 {
                return Err(Error::Config(format!(
                    "v_offset = {} leaves the potential nonpositive (V = {v} at a \
                     probe point); increase the offset",
                    spec.v_offset
                )));
            }
        }
        Ok(spec)
    }

    pub fn family(&self) -> TargetFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn v_offset(&self) -> f64 {
        self.v_offset
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.mean.iter().copied().collect())
            .collect()
    }

    pub fn mixture_weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn covariances(&self) -> Vec<DMatrix<f64>> {
        self.components.iter().map(|c| c.covariance.clone()).collect()
    }

    fn validate_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has dimension {} but target has dimension {}",
                x.len(),
                self.dim
            )));
        }
        ensure_finite_slice("x", x)
    }

    /// Per-component `(responsibility γ_r, score g_r = Σ_r^{−1}(x−m_r))` plus the
    /// mixture log-density (without offset, negated into V by the callers).
    fn responsibilities(&self, x: &[f64]) -> (Vec<f64>, Vec<DVector<f64>>, f64) {
        let xv = DVector::from_column_slice(x);
        let mut log_terms = Vec::with_capacity(self.components.len());
        let mut scores = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let centered = &xv - &c.mean;
            let g = &c.precision * &centered;
            let q = 0.5 * centered.dot(&g);
            log_terms.push(c.weight.ln() + c.log_norm - q);
            scores.push(g);
        }
        let log_density = log_sum_exp(&log_terms);
        let gammas = log_terms
            .iter()
            .map(|lt| (lt - log_density).exp())
            .collect();
        (gammas, scores, log_density)
    }

    fn potential_unchecked(&self, x: &[f64]) -> f64 {
        if self.components.len() == 1 {
            let c = &self.components[0];
            let xv = DVector::from_column_slice(x);
            let centered = &xv - &c.mean;
            let q = 0.5 * centered.dot(&(&c.precision * &centered));
            return q + self.v_offset;
        }
        let (_, _, log_density) = self.responsibilities(x);
        -log_density + self.v_offset
    }

    /// `V(x)` (offset included).
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        self.validate_point(x)?;
        Ok(self.potential_unchecked(x))
    }

    /// `∇V(x)`.
    pub fn grad_potential(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate_point(x)?;
        Ok(self.grad_unchecked(x).iter().copied().collect())
    }

    pub(crate) fn grad_unchecked(&self, x: &[f64]) -> DVector<f64> {
        if self.components.len() == 1 {
            let c = &self.components[0];
            let xv = DVector::from_column_slice(x);
            return &c.precision * (&xv - &c.mean);
        }
        let (gammas, scores, _) = self.responsibilities(x);
        let mut g = DVector::zeros(self.dim);
        for (gamma, score) in gammas.iter().zip(&scores) {
            g.axpy(*gamma, score, 1.0);
        }
        g
    }

    /// `∇²V(x)`.
    pub fn hessian_potential(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.validate_point(x)?;
        if self.components.len() == 1 {
            return Ok(self.components[0].precision.clone());
        }
        // ∇²V = Σ_r γ_r (P_r − g_r g_rᵀ) + ḡ ḡᵀ.
        let (gammas, scores, _) = self.responsibilities(x);
        let mut h = DMatrix::zeros(self.dim, self.dim);
        let mut gbar = DVector::zeros(self.dim);
        for ((gamma, score), c) in gammas.iter().zip(&scores).zip(&self.components) {
            h += (&c.precision - score * score.transpose()) * *gamma;
            gbar.axpy(*gamma, score, 1.0);
        }
        h += &gbar * gbar.transpose();
        Ok(h)
    }

    /// `ΔV(x) = tr ∇²V(x)`.
    pub fn laplacian_potential(&self, x: &[f64]) -> Result<f64> {
        self.validate_point(x)?;
        Ok(self.laplacian_unchecked(x))
    }

    pub(crate) fn laplacian_unchecked(&self, x: &[f64]) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].precision_trace;
        }
        let (gammas, scores, _) = self.responsibilities(x);
        let mut lap = 0.0;
        let mut gbar = DVector::zeros(self.dim);
        for ((gamma, score), c) in gammas.iter().zip(&scores).zip(&self.components) {
            lap += gamma * (c.precision_trace - score.norm_squared());
            gbar.axpy(*gamma, score, 1.0);
        }
        lap + gbar.norm_squared()
    }

    /// Draws `n` i.i.d. samples from the target density (ignoring the offset,
    /// which does not change the density). Rows of the result are samples.
    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        self.sample_scaled(rng, n, 1.0)
    }

    /// Like [`TargetSpec::sample`] but with every covariance scaled by
    /// `scale²` (used internally to probe tails).
    fn sample_scaled(&self, rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, self.dim);
        for i in 0..n {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (r, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = r;
                    break;
                }
            }
            let c = &self.components[pick];
            let z = DVector::from_fn(self.dim, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let x = &c.mean + &c.chol_l * z * scale;
            for a in 0..self.dim {
                out[(i, a)] = x[a];
            }
        }
        out
    }

    /// Component modes plus pairwise midpoints — the candidate locations of
    /// density extremes, used to seed grid searches and positivity probes.
    fn probe_points(&self) -> Vec<DVector<f64>> {
        let mut pts: Vec<DVector<f64>> =
            self.components.iter().map(|c| c.mean.clone()).collect();
        for i in 0..self.components.len() {
            for j in (i + 1)..self.components.len() {
                pts.push((&self.components[i].mean + &self.components[j].mean) * 0.5);
            }
        }
        pts
    }

    /// Derives `{C_V, A, α, c*}` for this target paired with `kernel`.
    ///
    /// Deterministic: the sampled estimates for mixtures use a fixed internal
    /// RNG stream.
    pub fn derive_constants(&self, kernel: &KernelSpec) -> Result<TargetConstants> {
        let p_lambda_max = self
            .components
            .iter()
            .map(|c| c.precision_lambda_max)
            .fold(f64::NEG_INFINITY, f64::max);

        let (c_v, c_v_empirical, growth_a) = match self.family {
            TargetFamily::Gaussian => {
                // Exact: ∇²V ≡ Σ^{−1} and
                // ‖∇V‖² = (x−m)ᵀP²(x−m) ≤ λ_max(P)·2(V − offset) ≤ 2 C_V V.
                (p_lambda_max, None, (2.0 * p_lambda_max).sqrt())
            }
            TargetFamily::GaussianMixture => {
                let sep_max = self
                    .probe_pair_distances()
                    .into_iter()
                    .fold(0.0f64, f64::max);
                let c_v = p_lambda_max + sep_max * sep_max * p_lambda_max * p_lambda_max / 4.0;

                let mut rng = ChaCha8Rng::seed_from_u64(CONSTANTS_SAMPLING_SEED);
                // Cover bulk and tails: half the probes from the mixture, half
                // from a 3×-inflated version.
                let n_probe = 10_000;
                let bulk = self.sample_scaled(&mut rng, n_probe / 2, 1.0);
                let tail = self.sample_scaled(&mut rng, n_probe / 2, 3.0);
                let mut hess_max = f64::NEG_INFINITY;
                let mut ratio_max: f64 = 0.0;
                for block in [&bulk, &tail] {
                    for i in 0..block.nrows() {
                        let x: Vec<f64> = block.row(i).iter().copied().collect();
                        let h = self.hessian_potential(&x)?;
                        let lmax = nalgebra::linalg::SymmetricEigen::new(h).eigenvalues.max();
                        hess_max = hess_max.max(lmax);
                        let v = self.potential_unchecked(&x);
                        let g = self.grad_unchecked(&x).norm();
                        ratio_max = ratio_max.max(g / v.sqrt());
                    }
                }
                if hess_max > c_v {
                    return Err(Error::Config(format!(
                        "mixture Hessian bound violated empirically: analytic C_V = {c_v}, \
                         sampled max = {hess_max}"
                    )));
                }
                // Margin-inflated sampled sup, floored by the asymptotic
                // single-component rate √(2 λ_max(P)).
                let a = (1.05 * ratio_max).max((2.0 * p_lambda_max).sqrt());
                (c_v, Some(hess_max), a)
            }
        };

        let c_star = self.c_star_estimate(kernel)?;
        Ok(TargetConstants {
            c_v,
            growth_a,
            growth_alpha: 0.5,
            c_star,
            c_v_empirical,
            c_pi: None,
        })
    }

    fn probe_pair_distances(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.components.len() {
            for j in (i + 1)..self.components.len() {
                out.push((&self.components[i].mean - &self.components[j].mean).norm());
            }
        }
        out
    }

    /// `c* = sup_z |Δ₂k(z,z) − ∇₁k(z,z)·∇V(z) − k(z,z)·ΔV(z)| / d`.
    ///
    /// For radial kernels `∇₁k(z,z) = 0` and `Δ₂k(z,z)`, `k(z,z)` are constants,
    /// so the supremum only ranges over `ΔV(z)`: exact for gaussian targets,
    /// grid-searched (with recorded grid and ×1.05 margin) for mixtures.
    fn c_star_estimate(&self, kernel: &KernelSpec) -> Result<CStarEstimate> {
        let origin = vec![0.0; self.dim];
        let lap2_at_coincidence = kernel.laplacian2(&origin, &origin)?;
        let k_at_coincidence = kernel.value(&origin, &origin)?;
        let d = self.dim as f64;

        match self.family {
            TargetFamily::Gaussian => {
                let lap_v = self.components[0].precision_trace;
                let value = (lap2_at_coincidence - k_at_coincidence * lap_v).abs() / d;
                Ok(CStarEstimate {
                    value,
                    exact: true,
                    grid_points_per_dim: 0,
                    grid_lo: vec![],
                    grid_hi: vec![],
                    margin: 1.0,
                })
            }
            TargetFamily::GaussianMixture => {
                // Box covering [−10, 10] per dimension, stretched to include
                // every component mean with slack 10.
                let mut lo = vec![-10.0f64; self.dim];
                let mut hi = vec![10.0f64; self.dim];
                for c in &self.components {
                    for a in 0..self.dim {
                        lo[a] = lo[a].min(c.mean[a] - 10.0);
                        hi[a] = hi[a].max(c.mean[a] + 10.0);
                    }
                }
                // ~1e5 grid nodes total regardless of dimension.
                let per_dim = (1e5f64.powf(1.0 / self.dim as f64).floor() as usize).max(3);
                let mut sup: f64 = 0.0;
                let mut idx = vec![0usize; self.dim];
                let mut z = vec![0.0; self.dim];
                loop {
                    for a in 0..self.dim {
                        let t = idx[a] as f64 / (per_dim - 1) as f64;
                        z[a] = lo[a] + t * (hi[a] - lo[a]);
                    }
                    let lap_v = self.laplacian_unchecked(&z);
                    sup = sup.max((lap2_at_coincidence - k_at_coincidence * lap_v).abs());
                    // Odometer increment over the d-dimensional grid.
                    let mut a = 0;
                    loop {
                        if a == self.dim {
                            break;
                        }
                        idx[a] += 1;
                        if idx[a] < per_dim {
                            break;
                        }
                        idx[a] = 0;
                        a += 1;
                    }
                    if a == self.dim {
                        break;
                    }
                }
                // Seed with the analytic candidates for density extremes.
                for probe in self.probe_points() {
                    let lap_v = self.laplacian_unchecked(probe.as_slice());
                    sup = sup.max((lap2_at_coincidence - k_at_coincidence * lap_v).abs());
                }
                Ok(CStarEstimate {
                    value: 1.05 * sup / d,
                    exact: false,
                    grid_points_per_dim: per_dim,
                    grid_lo: lo,
                    grid_hi: hi,
                    margin: 1.05,
                })
            }
        }
    }
}

/// Numerically stable `log Σ exp(a_i)`.
fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dmat(rows: &[&[f64]]) -> DMatrix<f64> {
        let r = rows.len();
        let c = rows[0].len();
        DMatrix::from_fn(r, c, |i, j| rows[i][j])
    }

    #[test]
    fn standard_gaussian_at_origin() {
        let t = TargetSpec::standard_gaussian(3).unwrap();
        assert_eq!(t.dim(), 3);
        assert_relative_eq!(t.potential(&[0.0; 3]).unwrap(), 1.0); // offset only
        assert!(t.grad_potential(&[0.0; 3]).unwrap().iter().all(|g| *g == 0.0));
        let h = t.hessian_potential(&[0.0; 3]).unwrap();
        assert_relative_eq!((h - DMatrix::<f64>::identity(3, 3)).amax(), 0.0);
        assert_relative_eq!(t.laplacian_potential(&[0.0; 3]).unwrap(), 3.0);
    }

    #[test]
    fn anisotropic_gaussian_constants() {
        let t = TargetSpec::gaussian(
            vec![1.0, -2.0],
            dmat(&[&[4.0, 0.0], &[0.0, 1.0]]),
            None,
        )
        .unwrap();
        let k = KernelSpec::gaussian_rbf(1.0).unwrap();
        let c = t.derive_constants(&k).unwrap();
        // Σ^{-1} = diag(1/4, 1): λ_max = 1.
        assert_relative_eq!(c.c_v, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.growth_alpha, 0.5);
        assert_relative_eq!(c.growth_a, 2f64.sqrt(), max_relative = 1e-12);
        // Gradient at m + (2, 0): Σ^{-1}(2,0) = (1/2, 0).
        let g = t.grad_potential(&[3.0, -2.0]).unwrap();
        assert_relative_eq!(g[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(g[1], 0.0);
    }

    #[test]
    fn gaussian_c_star_is_exact_closed_form() {
        // rbf(ℓ=1) + standard gaussian in d: Δ₂k(z,z) = −d/ℓ², k = 1, ΔV = d
        // ⇒ c* = |−d − d|/d = 2.
        for d in [1usize, 2, 3] {
            let t = TargetSpec::standard_gaussian(d).unwrap();
            let k = KernelSpec::gaussian_rbf(1.0).unwrap();
            let c = t.derive_constants(&k).unwrap();
            assert!(c.c_star.exact);
            assert_relative_eq!(c.c_star.value, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn mixture_potential_matches_direct_density() {
        let t = TargetSpec::gaussian_mixture(
            vec![vec![-1.5], vec![2.0]],
            vec![dmat(&[&[1.0]]), dmat(&[&[0.25]])],
            vec![0.3, 0.7],
            Some(0.0),
        )
        .unwrap();
        let x = [0.4];
        // Direct two-term density without log-sum-exp.
        let n1 = (2.0 * std::f64::consts::PI).sqrt().recip()
            * (-0.5 * (0.4f64 + 1.5).powi(2)).exp();
        let n2 = (2.0 * std::f64::consts::PI * 0.25).sqrt().recip()
            * (-0.5 * (0.4f64 - 2.0).powi(2) / 0.25).exp();
        let expect = -(0.3 * n1 + 0.7 * n2).ln();
        assert_relative_eq!(t.potential(&x).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_mixture_has_zero_gradient_at_midpoint() {
        let t = TargetSpec::gaussian_mixture(
            vec![vec![-2.0, 0.0], vec![2.0, 0.0]],
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
            vec![1.0, 1.0],
            None,
        )
        .unwrap();
        let g = t.grad_potential(&[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14), "gradient {g:?}");
        // Weights were normalized to the simplex.
        assert_relative_eq!(t.mixture_weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn laplacian_equals_hessian_trace() {
        let t = TargetSpec::gaussian_mixture(
            vec![vec![0.0, 0.0], vec![3.0, -1.0]],
            vec![
                dmat(&[&[1.0, 0.3], &[0.3, 0.5]]),
                dmat(&[&[2.0, -0.2], &[-0.2, 1.0]]),
            ],
            vec![0.6, 0.4],
            None,
        )
        .unwrap();
        for x in [[0.5, 0.5], [-1.0, 2.0], [3.0, -1.0]] {
            let h = t.hessian_potential(&x).unwrap();
            assert_relative_eq!(
                t.laplacian_potential(&x).unwrap(),
                h.trace(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn mixture_constants_satisfy_growth_bound() {
        let t = TargetSpec::gaussian_mixture(
            vec![vec![-3.0], vec![3.0]],
            vec![dmat(&[&[1.0]]), dmat(&[&[1.0]])],
            vec![0.5, 0.5],
            None,
        )
        .unwrap();
        let k = KernelSpec::gaussian_rbf(1.0).unwrap();
        let c = t.derive_constants(&k).unwrap();
        assert!(c.c_v >= 1.0 + 9.0 / 4.0 - 1e-12, "C_V = {}", c.c_v);
        assert!(c.c_v_empirical.unwrap() <= c.c_v);
        assert!(!c.c_star.exact);
        assert!(c.c_star.value > 0.0);
        // Spot-check the growth inequality away from the sampling stream.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let x = [rng.sample::<f64, _>(rand_distr::StandardNormal) * 5.0];
            let v = t.potential(&x).unwrap();
            let g = DVector::from_vec(t.grad_potential(&x).unwrap()).norm();
            assert!(
                g <= c.growth_a * v.sqrt() + 1e-9,
                "growth bound fails at {x:?}: ‖∇V‖ = {g}, A√V = {}",
                c.growth_a * v.sqrt()
            );
        }
    }

    #[test]
    fn potential_is_positive_by_default() {
        // A tight mixture has density > 1 near the mode; the default offset
        // must still keep V > 0 there.
        let t = TargetSpec::gaussian_mixture(
            vec![vec![0.0]],
            vec![dmat(&[&[1e-4]])],
            vec![1.0],
            None,
        )
        .unwrap();
        assert!(t.potential(&[0.0]).unwrap() > 0.0);
        // And an explicit bad offset is rejected.
        let r = TargetSpec::gaussian_mixture(
            vec![vec![0.0]],
            vec![dmat(&[&[1e-4]])],
            vec![1.0],
            Some(-10.0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        // Non-SPD covariance.
        assert!(TargetSpec::gaussian(vec![0.0], dmat(&[&[-1.0]]), None).is_err());
        // Asymmetric covariance.
        assert!(TargetSpec::gaussian(
            vec![0.0, 0.0],
            dmat(&[&[1.0, 0.5], &[0.0, 1.0]]),
            None
        )
        .is_err());
        // Nonpositive weights.
        assert!(TargetSpec::gaussian_mixture(
            vec![vec![0.0], vec![1.0]],
            vec![dmat(&[&[1.0]]), dmat(&[&[1.0]])],
            vec![1.0, 0.0],
            None
        )
        .is_err());
        // Dimension mismatch at evaluation.
        let t = TargetSpec::standard_gaussian(2).unwrap();
        assert!(t.potential(&[0.0]).is_err());
        assert!(t.grad_potential(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn sampling_matches_moments_roughly() {
        let t = TargetSpec::gaussian(vec![2.0, -1.0], dmat(&[&[1.0, 0.0], &[0.0, 4.0]]), None)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let s = t.sample(&mut rng, 20_000);
        let mean0 = s.column(0).sum() / 20_000.0;
        let mean1 = s.column(1).sum() / 20_000.0;
        assert!((mean0 - 2.0).abs() < 0.05, "mean0 = {mean0}");
        assert!((mean1 + 1.0).abs() < 0.1, "mean1 = {mean1}");
        let var1 = s.column(1).iter().map(|v| (v - mean1).powi(2)).sum::<f64>() / 20_000.0;
        assert!((var1 - 4.0).abs() < 0.2, "var1 = {var1}");
    }
}
