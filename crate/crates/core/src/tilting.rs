//! Minimax exponential tilting shared by the orthant-probability estimator
//! and the truncated-normal sampler.
//!
//! The box `l ≤ X ≤ u`, `X ~ N(0, Σ)`, is rewritten through a Cholesky
//! factor with variable reordering (`X = L Z`, most constraining variable
//! first). The sequential importance density draws `Z_k` from a normal with
//! mean `μ_k` truncated to its conditional interval; `(x*, μ*)` is the
//! saddle point of
//!
//! ```text
//! ψ(x; μ) = Σ_k [ ln P(l̃_k − μ_k − c_k < Z < ũ_k − μ_k − c_k) + μ_k²/2 − x_k μ_k ],
//! ```
//!
//! with `c = L̃ x`. At the saddle point the log-weight of every proposal is
//! bounded by `ψ* = ψ(x*; μ*)`, which also bounds the log-probability of the
//! box from above.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_general, Matrix, SymMatrix};
use crate::special::{ln_norm_pr, sample_trunc, trunc_mean};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Newton controls for the saddle-point solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { grad_tol: 1e-8, max_iter: 100 }
    }
}

/// A box problem after reordering and scaling.
#[derive(Debug, Clone)]
pub struct PreparedBox {
    /// Cholesky factor of the permuted covariance.
    pub chol: Matrix,
    /// `chol` with rows divided by their diagonal and the unit diagonal removed.
    pub scaled: Matrix,
    /// Limits divided by the Cholesky diagonal, in permuted order.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `perm[k]` is the original index of permuted coordinate `k`.
    pub perm: Vec<usize>,
    /// Truncated conditional means found during the reordering pass.
    pub cond_means: Vec<f64>,
}

impl PreparedBox {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }
}

/// Cholesky factorisation with greedy reordering: at step `j` the remaining
/// variable with the smallest conditional interval probability is pivoted in.
pub fn prepare(cov: &SymMatrix, lower: &[f64], upper: &[f64]) -> Result<PreparedBox> {
    let d = cov.dim();
    let mut sig = cov.matrix().clone();
    let mut l = lower.to_vec();
    let mut u = upper.to_vec();
    let mut perm: Vec<usize> = (0..d).collect();
    let mut chol = Matrix::zeros(d, d);
    let mut z = vec![0.0; d];

    for j in 0..d {
        // pick the least probable remaining variable
        let mut best = j;
        let mut best_pr = f64::INFINITY;
        for i in j..d {
            let s2 = sig[(i, i)] - chol.row(i)[..j].iter().map(|x| x * x).sum::<f64>();
            let s = libm::sqrt(s2.max(f64::EPSILON));
            let shift = dot(&chol.row(i)[..j], &z[..j]);
            let pr = ln_norm_pr((l[i] - shift) / s, (u[i] - shift) / s);
            if pr < best_pr {
                best_pr = pr;
                best = i;
            }
        }
        if best != j {
            swap_sym(&mut sig, j, best);
            for c in 0..d {
                let t = chol[(j, c)];
                chol[(j, c)] = chol[(best, c)];
                chol[(best, c)] = t;
            }
            l.swap(j, best);
            u.swap(j, best);
            perm.swap(j, best);
        }

        let scale = sig[(j, j)];
        let s2 = scale - chol.row(j)[..j].iter().map(|x| x * x).sum::<f64>();
        if !s2.is_finite() || !(scale > 0.0) || s2 < -1e-8 * scale {
            return Err(Error::NotPositiveDefinite { pivot: perm[j] });
        }
        let djj = libm::sqrt(s2.max(1e-14 * scale));
        chol[(j, j)] = djj;
        for i in j + 1..d {
            let v = (sig[(i, j)] - dot(&chol.row(i)[..j], &chol.row(j)[..j])) / djj;
            chol[(i, j)] = v;
        }
        let shift = dot(&chol.row(j)[..j], &z[..j]);
        z[j] = trunc_mean((l[j] - shift) / djj, (u[j] - shift) / djj);
    }

    let diag = chol.diag();
    let scaled = Matrix::from_fn(d, d, |i, j| if j < i { chol[(i, j)] / diag[i] } else { 0.0 });
    for k in 0..d {
        l[k] /= diag[k];
        u[k] /= diag[k];
    }
    Ok(PreparedBox { chol, scaled, lower: l, upper: u, perm, cond_means: z })
}

fn swap_sym(m: &mut Matrix, a: usize, b: usize) {
    let n = m.rows();
    for c in 0..n {
        let t = m[(a, c)];
        m[(a, c)] = m[(b, c)];
        m[(b, c)] = t;
    }
    for r in 0..n {
        let t = m[(r, a)];
        m[(r, a)] = m[(r, b)];
        m[(r, b)] = t;
    }
}

/// Tilting parameters in permuted coordinates; `mu[d-1]` is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tilting {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    /// Upper bound on every proposal log-weight (`ψ*`).
    pub psi_star: f64,
    /// `false` when the Newton solve failed and zero tilting is used.
    pub converged: bool,
    pub iterations: usize,
}

impl Tilting {
    /// No tilting: plain separation of variables. Weights are products of
    /// interval probabilities, hence bounded by 1.
    pub fn zero(d: usize) -> Self {
        Self { x: vec![0.0; d], mu: vec![0.0; d], psi_star: 0.0, converged: false, iterations: 0 }
    }
}

/// Gradient of ψ in `(x_{1..d-1}, μ_{1..d-1})` and, optionally, its Jacobian.
pub fn psi_gradient(pb: &PreparedBox, y: &[f64], want_jac: bool) -> (Vec<f64>, Option<Matrix>) {
    let d = pb.dim();
    let m = d - 1;
    let mut x = vec![0.0; d];
    let mut mu = vec![0.0; d];
    x[..m].copy_from_slice(&y[..m]);
    mu[..m].copy_from_slice(&y[m..]);
    let l = &pb.scaled;

    let mut p = vec![0.0; d];
    let mut dp = vec![0.0; d];
    for k in 0..d {
        let c = dot(&l.row(k)[..k], &x[..k]);
        let lt = pb.lower[k] - mu[k] - c;
        let ut = pb.upper[k] - mu[k] - c;
        let w = ln_norm_pr(lt, ut);
        let pl = if lt.is_finite() { libm::exp(-0.5 * lt * lt - w) * FRAC_1_SQRT_2PI } else { 0.0 };
        let pu = if ut.is_finite() { libm::exp(-0.5 * ut * ut - w) * FRAC_1_SQRT_2PI } else { 0.0 };
        p[k] = pl - pu;
        let ltp = if lt.is_finite() { lt * pl } else { 0.0 };
        let utp = if ut.is_finite() { ut * pu } else { 0.0 };
        dp[k] = -p[k] * p[k] + ltp - utp;
    }

    let mut grad = vec![0.0; 2 * m];
    for j in 0..m {
        let lp: f64 = (j + 1..d).map(|k| p[k] * l[(k, j)]).sum();
        grad[j] = -mu[j] + lp;
        grad[m + j] = mu[j] - x[j] + p[j];
    }
    if !want_jac {
        return (grad, None);
    }

    let mut jac = Matrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            // Lᵀ diag(dP) L
            let xx: f64 = (i.max(j) + 1..d).map(|k| l[(k, i)] * dp[k] * l[(k, j)]).sum();
            jac[(i, j)] = xx;
            // mx = -I + diag(dP) L
            let mx = dp[i] * l[(i, j)] - if i == j { 1.0 } else { 0.0 };
            jac[(m + i, j)] = mx;
            jac[(j, m + i)] = mx;
        }
        jac[(m + i, m + i)] = 1.0 + dp[i];
    }
    (grad, Some(jac))
}

/// `ψ(x; μ)` for full-length `x`, `μ` (last entries ignored).
pub fn psi(pb: &PreparedBox, x: &[f64], mu: &[f64]) -> f64 {
    let d = pb.dim();
    let l = &pb.scaled;
    let mut total = 0.0;
    for k in 0..d {
        let (xk, mk) = if k + 1 == d { (0.0, 0.0) } else { (x[k], mu[k]) };
        let c: f64 = (0..k).map(|j| l[(k, j)] * if j + 1 == d { 0.0 } else { x[j] }).sum();
        total += ln_norm_pr(pb.lower[k] - mk - c, pb.upper[k] - mk - c) + 0.5 * mk * mk - xk * mk;
    }
    total
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn newton(pb: &PreparedBox, start: Vec<f64>, cfg: &NewtonConfig) -> Option<(Vec<f64>, usize)> {
    let mut y = start;
    let (mut g, _) = psi_gradient(pb, &y, false);
    let mut gnorm = norm(&g);
    for iter in 0..cfg.max_iter {
        if !gnorm.is_finite() {
            return None;
        }
        if gnorm < cfg.grad_tol {
            return Some((y, iter));
        }
        let (_, jac) = psi_gradient(pb, &y, true);
        let step = solve_general(&jac?, &g)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let (gt, _) = psi_gradient(pb, &trial, false);
            let nt = norm(&gt);
            if nt.is_finite() && nt < gnorm {
                y = trial;
                g = gt;
                gnorm = nt;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return None;
            }
        }
    }
    (gnorm < cfg.grad_tol).then_some((y, cfg.max_iter))
}

/// Solves for the minimax tilting parameter. Falls back to zero tilting
/// (flagged by `converged == false`) when Newton fails from both the zero
/// start and the truncated-mean start.
pub fn solve_tilting(pb: &PreparedBox, cfg: &NewtonConfig) -> Tilting {
    let d = pb.dim();
    if d <= 1 {
        // a single variable needs no tilting; its probability is exact
        return Tilting { psi_star: psi(pb, &[0.0], &[0.0]), converged: true, ..Tilting::zero(d) };
    }
    let m = d - 1;
    let mut alt = vec![0.0; 2 * m];
    alt[..m].copy_from_slice(&pb.cond_means[..m]);
    for start in [vec![0.0; 2 * m], alt] {
        if let Some((y, iterations)) = newton(pb, start, cfg) {
            let mut x = vec![0.0; d];
            let mut mu = vec![0.0; d];
            x[..m].copy_from_slice(&y[..m]);
            mu[..m].copy_from_slice(&y[m..]);
            let psi_star = psi(pb, &x, &mu);
            if psi_star.is_finite() {
                return Tilting { x, mu, psi_star, converged: true, iterations };
            }
        }
    }
    Tilting::zero(d)
}

/// One sequential draw from the tilted proposal. Writes the standardised
/// vector into `z` and returns its log-weight `ψ(z; μ)`.
pub fn propose<R: Rng + ?Sized>(pb: &PreparedBox, tilt: &Tilting, z: &mut [f64], rng: &mut R) -> f64 {
    let d = pb.dim();
    let l = &pb.scaled;
    let mut logw = 0.0;
    for k in 0..d {
        let c = dot(&l.row(k)[..k], &z[..k]);
        let mk = tilt.mu[k];
        let lt = pb.lower[k] - mk - c;
        let ut = pb.upper[k] - mk - c;
        z[k] = mk + sample_trunc(lt, ut, rng);
        logw += ln_norm_pr(lt, ut) + 0.5 * mk * mk - mk * z[k];
    }
    logw
}

/// Maps a standardised permuted vector back to the original coordinates:
/// `out[perm[i]] = (L z)_i`.
pub fn unscramble(pb: &PreparedBox, z: &[f64], out: &mut [f64]) {
    for i in 0..pb.dim() {
        out[pb.perm[i]] = dot(&pb.chol.row(i)[..=i], &z[..=i]);
    }
}
