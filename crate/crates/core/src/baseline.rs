//! Data-augmentation Gibbs sampler for probit regression and chain
//! diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::linalg::{cholesky, dot, JitterPolicy, Matrix, SymMatrix};
use crate::probit::BinaryDataset;
use crate::rng;
use crate::special::sample_trunc_inverse;

pub const DEFAULT_DRAWS: usize = 20_000;
pub const DEFAULT_BURN_IN: usize = 5_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    /// Post burn-in draws, one per row.
    pub draws: Matrix,
    pub ess: Vec<f64>,
    /// Coordinates whose chain never moved.
    pub degenerate: Vec<bool>,
    /// Filled in by callers that have a clock.
    pub samples_per_second: Option<f64>,
    pub burn_in: usize,
    pub seed: u64,
}

/// Albert–Chib sampler: `zᵢ | β` truncated normal with mean `xᵢᵀβ`, then
/// `β | z ~ N_p(V(Ω⁻¹ξ + Xᵀz), V)` with `V = (Ω⁻¹ + XᵀX)⁻¹`.
pub fn gibbs_albert_chib(
    data: &BinaryDataset,
    xi: &[f64],
    omega: &SymMatrix,
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Result<ChainSummary> {
    let p = data.dim();
    let n = data.len();
    if xi.len() != p || omega.dim() != p {
        bail!(DimensionMismatch, "prior of dimension {}/{} for {p} covariates", xi.len(), omega.dim());
    }
    if count == 0 {
        bail!(InvalidArgument, "at least one draw must be requested");
    }
    let x = data.x();
    let prior_chol = cholesky(omega, JitterPolicy::NONE)?;
    let prior_prec = prior_chol.inverse();
    let prec_xi = prior_chol.solve(xi);
    let xtx = x.transpose().matmul(x)?;
    let precision = SymMatrix::symmetrized(prior_prec.matrix().add(&xtx)?);
    // factorised once; β = P⁻¹b + L⁻ᵀe
    let pchol = cholesky(&precision, JitterPolicy::NONE)?;

    let mut g = rng::stream(seed, 0);
    let mut beta = xi.to_vec();
    let mut z = vec![0.0; n];
    let mut b = vec![0.0; p];
    let mut e = vec![0.0; p];
    let mut draws = Vec::with_capacity(count * p);
    for it in 0..burn_in + count {
        for i in 0..n {
            let mean = dot(x.row(i), &beta);
            z[i] = if data.y()[i] == 1 {
                sample_trunc_inverse(mean, 1.0, 0.0, f64::INFINITY, &mut g)
            } else {
                sample_trunc_inverse(mean, 1.0, f64::NEG_INFINITY, 0.0, &mut g)
            };
        }
        b.copy_from_slice(&prec_xi);
        for i in 0..n {
            let row = x.row(i);
            for j in 0..p {
                b[j] += row[j] * z[i];
            }
        }
        let m = pchol.solve(&b);
        e.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut g));
        let noise = pchol.solve_upper(&e);
        for j in 0..p {
            beta[j] = m[j] + noise[j];
        }
        if it >= burn_in {
            draws.extend_from_slice(&beta);
        }
    }
    let draws = Matrix::from_vec(count, p, draws)?;
    let (ess, degenerate) = (0..p).map(|j| effective_sample_size(&draws.col(j))).unzip();
    Ok(ChainSummary { draws, ess, degenerate, samples_per_second: None, burn_in, seed })
}

/// Effective sample size of a scalar chain by Geyer's initial positive
/// sequence, clamped to `(0, R]`. The flag is set for constant chains,
/// whose ESS is reported as `R`.
pub fn effective_sample_size(series: &[f64]) -> (f64, bool) {
    let r = series.len();
    if r < 2 {
        return (r as f64, true);
    }
    let mean = series.iter().sum::<f64>() / r as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = dot(&centered, &centered) / r as f64;
    if !(c0 > 0.0) {
        return (r as f64, true);
    }
    let rho = |k: usize| dot(&centered[..r - k], &centered[k..]) / (r as f64 * c0);
    // τ = −1 + 2 Σ Γₖ with Γₖ = ρ₂ₖ + ρ₂ₖ₊₁, summed while positive
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < r {
        let pair = if k == 0 { 1.0 + rho(1) } else { rho(2 * k) + rho(2 * k + 1) };
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    let ess = if tau > 0.0 { r as f64 / tau } else { r as f64 };
    (ess.clamp(f64::MIN_POSITIVE, r as f64), false)
}
