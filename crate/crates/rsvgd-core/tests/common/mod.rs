//! Shared helpers for the integration-test targets: seeded random problem
//! generation and deliberately naive reference implementations ("oracles").
//!
//! The oracles use only the public pointwise evaluators plus a dense matrix
//! inverse, with plain nested loops in a different contraction order than the
//! library, so agreement is evidence rather than tautology.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rsvgd_core::kernels::KernelSpec;
use rsvgd_core::targets::TargetSpec;

pub fn rand_positions(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| (rng.gen::<f64>() - 0.5) * 2.0 * scale)
}

pub fn rand_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

/// Random SPD covariance with eigenvalues in roughly [0.4, 2.4].
pub fn rand_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() - 0.5);
    let q = a.qr().q();
    let eigs = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            0.4 + 2.0 * rng.gen::<f64>()
        } else {
            0.0
        }
    });
    &q * eigs * q.transpose()
}

pub fn row(positions: &DMatrix<f64>, i: usize) -> Vec<f64> {
    (0..positions.ncols()).map(|a| positions[(i, a)]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stein kernel `κ_π(x, y)` assembled from public evaluators:
/// `k·∇V(x)·∇V(y) − ∇V(x)·∇₂k − ∇V(y)·∇₁k + ∇₁·∇₂k`.
pub fn naive_stein_kernel(
    kernel: &KernelSpec,
    target: &TargetSpec,
    x: &[f64],
    y: &[f64],
) -> f64 {
    let gx = target.grad_potential(x).expect("valid point");
    let gy = target.grad_potential(y).expect("valid point");
    let kv = kernel.value(x, y).expect("valid pair");
    let g1 = kernel.grad1(x, y).expect("valid pair");
    let g2 = kernel.grad2(x, y).expect("valid pair");
    let cross = kernel.cross_div(x, y).expect("valid pair");
    kv * dot(&gx, &gy) - dot(&gx, &g2) - dot(&gy, &g1) + cross
}

/// KSD² as the plain double sum `Σ_{ij} w_i w_j κ_π(x^i, x^j)`.
pub fn naive_ksd2(
    kernel: &KernelSpec,
    target: &TargetSpec,
    positions: &DMatrix<f64>,
    weights: &[f64],
) -> f64 {
    let n = positions.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let xi = row(positions, i);
        for j in 0..n {
            let xj = row(positions, j);
            acc += weights[i] * weights[j] * naive_stein_kernel(kernel, target, &xi, &xj);
        }
    }
    acc
}

/// Dense inverse of `((1−ν)/N·K + νI)` built entrywise.
fn naive_resolvent_inverse(
    kernel: &KernelSpec,
    positions: &DMatrix<f64>,
    nu: f64,
) -> DMatrix<f64> {
    let n = positions.nrows();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = row(positions, i);
        for j in 0..n {
            let xj = row(positions, j);
            m[(i, j)] = (1.0 - nu) / n as f64 * kernel.value(&xi, &xj).expect("valid pair");
        }
        m[(i, i)] += nu;
    }
    m.try_inverse().expect("resolvent is invertible for ν > 0")
}

/// Self-interaction coefficient by brute force: the four sums written as plain
/// nested loops over particle indices, with `K^ν` from a dense inverse.
pub fn naive_c_star(
    kernel: &KernelSpec,
    target: &TargetSpec,
    positions: &DMatrix<f64>,
    nu: f64,
) -> f64 {
    let n = positions.nrows();
    let nn = n as f64;
    let knu = naive_resolvent_inverse(kernel, positions, nu);
    let xs: Vec<Vec<f64>> = (0..n).map(|i| row(positions, i)).collect();
    let grads: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| target.grad_potential(x).expect("valid point"))
        .collect();
    let laps: Vec<f64> = xs
        .iter()
        .map(|x| target.laplacian_potential(x).expect("valid point"))
        .collect();
    let k = |i: usize, j: usize| kernel.value(&xs[i], &xs[j]).expect("valid pair");
    let g1 = |i: usize, j: usize| kernel.grad1(&xs[i], &xs[j]).expect("valid pair");
    let g2 = |i: usize, j: usize| kernel.grad2(&xs[i], &xs[j]).expect("valid pair");
    let cross = |i: usize, j: usize| kernel.cross_div(&xs[i], &xs[j]).expect("valid pair");
    let lap2 = |i: usize, j: usize| kernel.laplacian2(&xs[i], &xs[j]).expect("valid pair");

    // Sum 1: −(1/N) Σ_{ij} K^ν_{ij} [Δ₂k(x^j,x^i) − ∇₁k(x^i,x^j)·∇V(x^i)
    //                                 − k(x^j,x^i)·ΔV(x^i)].
    let mut a1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            a1 += knu[(i, j)] * (lap2(j, i) - dot(&g1(i, j), &grads[i]) - k(j, i) * laps[i]);
        }
    }
    a1 = -a1 / nn;

    // q_i = (K·K^ν)_{ii}, p_i = Σ_j [∇₁·∇₂k(x^i,x^j) − ∇₁k(x^i,x^j)·∇V(x^j)].
    let mut q = vec![0.0; n];
    let mut p = vec![0.0; n];
    for i in 0..n {
        for l in 0..n {
            q[i] += k(i, l) * knu[(l, i)];
        }
        for j in 0..n {
            p[i] += cross(i, j) - dot(&g1(i, j), &grads[j]);
        }
    }
    let mut a2 = 0.0;
    for i in 0..n {
        a2 += q[i] * p[i];
    }
    a2 *= (1.0 - nu) / nu / (nn * nn);

    // s_k = Σ_l [∇₂k(x^k,x^l) − k(x^k,x^l)∇V(x^l)], b = K^ν·s,
    // a_i = Σ_j K^ν_{ij}∇₁k(x^i,x^j).
    let d = positions.ncols();
    let mut s = vec![vec![0.0; d]; n];
    for kk in 0..n {
        for l in 0..n {
            let g = g2(kk, l);
            let kv = k(kk, l);
            for a in 0..d {
                s[kk][a] += g[a] - kv * grads[l][a];
            }
        }
    }
    let mut b = vec![vec![0.0; d]; n];
    for i in 0..n {
        for m in 0..n {
            for a in 0..d {
                b[i][a] += knu[(i, m)] * s[m][a];
            }
        }
    }
    let mut a3 = 0.0;
    for i in 0..n {
        let mut ai = vec![0.0; d];
        for j in 0..n {
            let g = g1(i, j);
            for a in 0..d {
                ai[a] += knu[(i, j)] * g[a];
            }
        }
        a3 += dot(&ai, &b[i]);
    }
    a3 *= (1.0 - nu) / (nn * nn);

    // u_i = Σ_j ∇₁k(x^i,x^j)·b_j.
    let mut a4 = 0.0;
    for i in 0..n {
        let mut u = 0.0;
        for j in 0..n {
            u += dot(&g1(i, j), &b[j]);
        }
        a4 += q[i] * u;
    }
    a4 *= -(1.0 - nu) * (1.0 - nu) / nu / (nn * nn * nn);

    a1 + a2 + a3 + a4
}

/// Regularized Stein Fisher information by brute force: assemble `h`, solve
/// `((1−ν)K·diag(w) + νI)φ = h` with a dense inverse, recover the divergence
/// through the resolvent identity, and contract — all with plain loops.
pub fn naive_reg_stein_fisher(
    kernel: &KernelSpec,
    target: &TargetSpec,
    positions: &DMatrix<f64>,
    weights: &[f64],
    nu: f64,
) -> f64 {
    let n = positions.nrows();
    let d = positions.ncols();
    let xs: Vec<Vec<f64>> = (0..n).map(|i| row(positions, i)).collect();
    let grads: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| target.grad_potential(x).expect("valid point"))
        .collect();

    // h_i = Σ_j w_j [−∇₂k(x^i,x^j) + k(x^i,x^j)∇V(x^j)].
    let mut h = DMatrix::<f64>::zeros(n, d);
    for i in 0..n {
        for j in 0..n {
            let g2 = kernel.grad2(&xs[i], &xs[j]).expect("valid pair");
            let kv = kernel.value(&xs[i], &xs[j]).expect("valid pair");
            for a in 0..d {
                h[(i, a)] += weights[j] * (-g2[a] + kv * grads[j][a]);
            }
        }
    }

    // φ = ((1−ν)·K·diag(w) + νI)^{−1} h via a dense inverse.
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] =
                (1.0 - nu) * kernel.value(&xs[i], &xs[j]).expect("valid pair") * weights[j];
        }
        m[(i, i)] += nu;
    }
    let phi = m.try_inverse().expect("system is invertible for ν > 0") * &h;

    // ∇·φ(x^i) = (1/ν)[Σ_j w_j(−∇₁·∇₂k + ∇₁k·∇V(x^j)) − (1−ν)Σ_j w_j ∇₁k·φ_j].
    let mut total = 0.0;
    for i in 0..n {
        let mut div = 0.0;
        for j in 0..n {
            let cross = kernel.cross_div(&xs[i], &xs[j]).expect("valid pair");
            let g1 = kernel.grad1(&xs[i], &xs[j]).expect("valid pair");
            let mut g1_phi = 0.0;
            let mut g1_gv = 0.0;
            for a in 0..d {
                g1_phi += g1[a] * phi[(j, a)];
                g1_gv += g1[a] * grads[j][a];
            }
            div += weights[j] * (-cross + g1_gv) - (1.0 - nu) * weights[j] * g1_phi;
        }
        div /= nu;
        let mut gv_phi = 0.0;
        for a in 0..d {
            gv_phi += grads[i][a] * phi[(i, a)];
        }
        total += weights[i] * (-div + gv_phi);
    }
    total
}
