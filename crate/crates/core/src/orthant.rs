//! Gaussian CDF / box probabilities `P(l ≤ X ≤ u)`, `X ~ N(0, Σ)`, by
//! separation of variables with minimax tilting and randomised QMC.
//!
//! Everything is carried in log space: the probabilities met in probit
//! evidence computations are routinely below `1e-300`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::linalg::{cholesky, dot, JitterPolicy, SymMatrix};
use crate::qmc::Richtmyer;
use crate::rng;
use crate::special::{bvn_upper, ln_norm_pr, pdf, trunc_inv_cdf, GL20};
use crate::tilting::{prepare, solve_tilting, NewtonConfig, PreparedBox, Tilting};

/// Accuracy and budget controls for one orthant evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantConfig {
    /// Target relative standard error, in `(0, 0.1]`.
    pub accuracy: f64,
    /// Total QMC budget (points × replicates) per connected component.
    pub max_points: usize,
    /// Number of independently shifted lattice replicates.
    pub replicates: usize,
    pub seed: u64,
    pub newton: NewtonConfig,
}

impl Default for OrthantConfig {
    fn default() -> Self {
        Self { accuracy: 1e-4, max_points: 32 << 16, replicates: 32, seed: 0, newton: NewtonConfig::default() }
    }
}

impl OrthantConfig {
    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = accuracy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_points(mut self, max_points: usize) -> Self {
        self.max_points = max_points;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.accuracy > 0.0 && self.accuracy <= 0.1) {
            bail!(InvalidArgument, "accuracy {} outside (0, 0.1]", self.accuracy);
        }
        if self.replicates < 2 {
            bail!(InvalidArgument, "at least two QMC replicates are needed for an error estimate");
        }
        Ok(())
    }
}

/// `Φₙ(upper; cov)`: the CDF of `N(0, cov)` at `upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthantProblem {
    pub upper: Vec<f64>,
    pub cov: SymMatrix,
    pub config: OrthantConfig,
}

impl OrthantProblem {
    pub fn new(upper: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        Self::with_config(upper, cov, OrthantConfig::default())
    }

    pub fn with_config(upper: Vec<f64>, cov: SymMatrix, config: OrthantConfig) -> Result<Self> {
        if upper.len() != cov.dim() {
            bail!(DimensionMismatch, "{} limits for a {}-dimensional covariance", upper.len(), cov.dim());
        }
        if upper.iter().any(|u| u.is_nan()) {
            bail!(InvalidArgument, "NaN integration limit");
        }
        config.validate()?;
        Ok(Self { upper, cov, config })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantEstimate {
    /// Natural log of the probability (≤ 0).
    pub log_value: f64,
    /// Estimated relative standard error of `exp(log_value)`.
    pub rel_error: f64,
    pub points_used: usize,
    /// The accuracy target was not met within `max_points`.
    pub budget_exceeded: bool,
    /// The saddle-point solve failed somewhere and zero tilting was used.
    pub tilting_fallback: bool,
}

impl OrthantEstimate {
    fn exact(log_value: f64) -> Self {
        Self { log_value, rel_error: 0.0, points_used: 0, budget_exceeded: false, tilting_fallback: false }
    }

    pub fn value(&self) -> f64 {
        libm::exp(self.log_value)
    }
}

/// `ln Φₙ(upper; cov)` with a relative error estimate.
pub fn phi_n(problem: &OrthantProblem) -> Result<OrthantEstimate> {
    let lower = vec![f64::NEG_INFINITY; problem.upper.len()];
    box_probability(&lower, &problem.upper, &problem.cov, &problem.config)
}

/// Elementwise [`phi_n`]; each element is evaluated exactly as a single call
/// would, so results are bit-identical to sequential evaluation.
pub fn phi_n_batch(problems: &[OrthantProblem]) -> Vec<Result<OrthantEstimate>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        problems.par_iter().map(phi_n).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        problems.iter().map(phi_n).collect()
    }
}

/// Correlations at or below this magnitude are treated as exact zeros when
/// splitting the covariance into independent blocks.
const INDEPENDENCE_TOL: f64 = 1e-14;

/// Two-sided box probability `ln P(lower ≤ X ≤ upper)`.
///
/// Unconstrained coordinates are marginalised out exactly and the remaining
/// covariance is split into connected components that are integrated
/// independently.
pub fn box_probability(
    lower: &[f64],
    upper: &[f64],
    cov: &SymMatrix,
    config: &OrthantConfig,
) -> Result<OrthantEstimate> {
    let n = cov.dim();
    if lower.len() != n || upper.len() != n {
        bail!(DimensionMismatch, "limits of length {}/{} for dimension {n}", lower.len(), upper.len());
    }
    config.validate()?;
    if lower.iter().zip(upper).any(|(l, u)| l.is_nan() || u.is_nan()) {
        bail!(InvalidArgument, "NaN integration limit");
    }

    let active: Vec<usize> =
        (0..n).filter(|&i| !(lower[i] == f64::NEG_INFINITY && upper[i] == f64::INFINITY)).collect();
    if active.len() < n {
        // dropped coordinates are never factorised below; validate here
        cholesky(cov, JitterPolicy::NONE)?;
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Ok(OrthantEstimate::exact(f64::NEG_INFINITY));
    }
    if active.is_empty() {
        return Ok(OrthantEstimate::exact(0.0));
    }

    let mut total = OrthantEstimate::exact(0.0);
    let mut rel_sq = 0.0;
    for comp in components(cov, &active) {
        let sub_cov = cov.select(&comp);
        let lo: Vec<f64> = comp.iter().map(|&i| lower[i]).collect();
        let up: Vec<f64> = comp.iter().map(|&i| upper[i]).collect();
        let est = component_probability(&lo, &up, &sub_cov, config)?;
        total.log_value += est.log_value;
        rel_sq += est.rel_error * est.rel_error;
        total.points_used += est.points_used;
        total.budget_exceeded |= est.budget_exceeded;
        total.tilting_fallback |= est.tilting_fallback;
        if est.log_value == f64::NEG_INFINITY {
            break;
        }
    }
    total.rel_error = libm::sqrt(rel_sq);
    total.log_value = total.log_value.min(0.0);
    Ok(total)
}

/// Connected components of the non-zero correlation graph over `active`,
/// each sorted, ordered by smallest member.
fn components(cov: &SymMatrix, active: &[usize]) -> Vec<Vec<usize>> {
    let m = active.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..m {
        for b in 0..a {
            let (i, j) = (active[a], active[b]);
            let scale = libm::sqrt(cov[(i, i)] * cov[(j, j)]);
            if cov[(i, j)].abs() > INDEPENDENCE_TOL * scale {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: Vec<Option<usize>> = vec![None; m];
    for a in 0..m {
        let r = find(&mut parent, a);
        match root_slot[r] {
            Some(g) => groups[g].push(active[a]),
            None => {
                root_slot[r] = Some(groups.len());
                groups.push(vec![active[a]]);
            }
        }
    }
    groups
}

fn component_probability(
    lower: &[f64],
    upper: &[f64],
    cov: &SymMatrix,
    config: &OrthantConfig,
) -> Result<OrthantEstimate> {
    let d = cov.dim();
    if d == 1 {
        let s = libm::sqrt(cov[(0, 0)]);
        if !(s > 0.0) {
            return Err(crate::error::Error::NotPositiveDefinite { pivot: 0 });
        }
        return Ok(OrthantEstimate::exact(ln_norm_pr(lower[0] / s, upper[0] / s)));
    }
    let closed = match d {
        2 => bivariate(lower, upper, cov),
        3 => trivariate(lower, upper, cov),
        _ => None,
    };
    if let Some(est) = closed {
        return Ok(est);
    }
    let pb = prepare(cov, lower, upper)?;
    let tilt = solve_tilting(&pb, &config.newton);
    if tilt.psi_star == f64::NEG_INFINITY {
        return Ok(OrthantEstimate::exact(f64::NEG_INFINITY));
    }
    let mut est = qmc_estimate(&pb, &tilt, config);
    est.tilting_fallback = !tilt.converged;
    Ok(est)
}

/// Smallest bivariate probability taken from the closed-form routine;
/// below it the absolute accuracy of that routine is not enough.
const BIVARIATE_FLOOR: f64 = 1e-8;

/// Closed form for two-dimensional one-sided regions.
fn bivariate(lower: &[f64], upper: &[f64], cov: &SymMatrix) -> Option<OrthantEstimate> {
    let s = [libm::sqrt(cov[(0, 0)]), libm::sqrt(cov[(1, 1)])];
    if !(s[0] > 0.0 && s[1] > 0.0) {
        return None;
    }
    let r = cov[(0, 1)] / (s[0] * s[1]);
    if !(r.abs() < 1.0) {
        return None;
    }
    let a = one_sided(lower, upper)?;
    let v = bvn_upper(-a[0] / s[0], -a[1] / s[1], r);
    if !(v > BIVARIATE_FLOOR) {
        return None;
    }
    let mut est = OrthantEstimate::exact(libm::log(v.min(1.0)));
    est.rel_error = 1e-15 / v;
    Some(est)
}

/// Orthant form `P(X ≤ a)` of a one-sided region: regions bounded below
/// are reflected. `None` for two-sided limits.
fn one_sided(lower: &[f64], upper: &[f64]) -> Option<Vec<f64>> {
    if lower.iter().all(|l| *l == f64::NEG_INFINITY) && upper.iter().all(|u| u.is_finite()) {
        Some(upper.to_vec())
    } else if upper.iter().all(|u| *u == f64::INFINITY) && lower.iter().all(|l| l.is_finite()) {
        Some(lower.iter().map(|l| -l).collect())
    } else {
        None
    }
}

/// Three-dimensional orthant probability as a one-dimensional integral
/// over the least correlated coordinate of bivariate probabilities,
/// `∫_{-∞}^{a_c} φ(t) Φ₂(b_j(t), b_k(t); ρ) dt`, on composite Gauss–Legendre
/// rules at two resolutions. `None` when the resolutions disagree or the
/// probability is below the floor.
fn trivariate(lower: &[f64], upper: &[f64], cov: &SymMatrix) -> Option<OrthantEstimate> {
    let a0 = one_sided(lower, upper)?;
    let sd: Vec<f64> = (0..3).map(|i| libm::sqrt(cov[(i, i)])).collect();
    if !sd.iter().all(|s| *s > 0.0) {
        return None;
    }
    let a: Vec<f64> = (0..3).map(|i| a0[i] / sd[i]).collect();
    let r = |i: usize, j: usize| cov[(i, j)] / (sd[i] * sd[j]);
    let c = (0..3)
        .min_by(|&x, &y| {
            let m = |c: usize| (0..3).filter(|&j| j != c).map(|j| r(c, j).abs()).fold(0.0, f64::max);
            m(x).total_cmp(&m(y))
        })
        .unwrap();
    let (j, k) = match c {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (rj, rk) = (r(c, j), r(c, k));
    if !(rj.abs() < 0.999 && rk.abs() < 0.999) {
        return None;
    }
    let (sj, sk) = (libm::sqrt(1.0 - rj * rj), libm::sqrt(1.0 - rk * rk));
    let rho = (r(j, k) - rj * rk) / (sj * sk);
    if !(rho.abs() < 1.0) {
        return None;
    }
    const SPAN: f64 = 9.0;
    let hi = a[c].min(SPAN);
    if hi <= -SPAN {
        return None;
    }
    let integrate = |panels: usize| -> f64 {
        let h = (hi + SPAN) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = -SPAN + (p as f64 + 0.5) * h;
            for &(x, w) in GL20.iter() {
                for t in [mid - 0.5 * h * x, mid + 0.5 * h * x] {
                    let bj = (a[j] - rj * t) / sj;
                    let bk = (a[k] - rk * t) / sk;
                    total += 0.5 * h * w * pdf(t) * bvn_upper(-bj, -bk, rho);
                }
            }
        }
        total
    };
    let coarse = integrate(12);
    let fine = integrate(24);
    if !(fine > TRIVARIATE_FLOOR) || (fine - coarse).abs() > 1e-9 * fine {
        return None;
    }
    let mut est = OrthantEstimate::exact(libm::log(fine.min(1.0)));
    est.rel_error = ((fine - coarse).abs() / fine).max(1e-15 / fine);
    Some(est)
}

/// Smallest trivariate probability taken from the quadrature routine.
const TRIVARIATE_FLOOR: f64 = 1e-7;

/// Running log-sum of weights for one shifted lattice.
#[derive(Debug, Clone)]
struct Replicate {
    shift: Vec<f64>,
    log_sum: f64,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + libm::log(libm::exp(a - m) + libm::exp(b - m))
}

/// Log-weight of lattice point `q` (length d-1) under the tilted
/// sequential inverse-CDF map.
fn point_log_weight(pb: &PreparedBox, tilt: &Tilting, q: &[f64], z: &mut [f64]) -> f64 {
    let d = pb.dim();
    let l = &pb.scaled;
    let mut logw = 0.0;
    for k in 0..d - 1 {
        let c = dot(&l.row(k)[..k], &z[..k]);
        let mk = tilt.mu[k];
        let lt = pb.lower[k] - mk - c;
        let ut = pb.upper[k] - mk - c;
        let w = ln_norm_pr(lt, ut);
        z[k] = mk + trunc_inv_cdf(lt, ut, q[k]);
        logw += w + 0.5 * mk * mk - mk * z[k];
    }
    let c = dot(&l.row(d - 1)[..d - 1], &z[..d - 1]);
    logw + ln_norm_pr(pb.lower[d - 1] - c, pb.upper[d - 1] - c)
}

fn extend_replicate(pb: &PreparedBox, tilt: &Tilting, rule: &Richtmyer, rep: &mut Replicate, from: u64, to: u64) {
    let d = pb.dim();
    let mut q = vec![0.0; d - 1];
    let mut z = vec![0.0; d];
    let mut acc = f64::NEG_INFINITY;
    for j in from..to {
        rule.point(j + 1, &rep.shift, &mut q);
        acc = log_add(acc, point_log_weight(pb, tilt, &q, &mut z));
    }
    rep.log_sum = log_add(rep.log_sum, acc);
}

fn qmc_estimate(pb: &PreparedBox, tilt: &Tilting, config: &OrthantConfig) -> OrthantEstimate {
    use rand::Rng;

    let d = pb.dim();
    let rule = Richtmyer::new(d - 1);
    let reps = config.replicates;
    let mut replicates: Vec<Replicate> = (0..reps)
        .map(|r| {
            let mut g = rng::stream(config.seed, r as u64);
            Replicate { shift: (0..d - 1).map(|_| g.random::<f64>()).collect(), log_sum: f64::NEG_INFINITY }
        })
        .collect();

    let per_rep_cap = (config.max_points / reps).max(1) as u64;
    let mut done: u64 = 0;
    let mut target: u64 = 128.min(per_rep_cap);
    loop {
        let (from, to) = (done, target);
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            replicates.par_iter_mut().for_each(|rep| extend_replicate(pb, tilt, &rule, rep, from, to));
        }
        #[cfg(not(feature = "parallel"))]
        for rep in replicates.iter_mut() {
            extend_replicate(pb, tilt, &rule, rep, from, to);
        }
        done = to;

        let (log_mean, rel_error) = combine(&replicates, done);
        let converged = rel_error <= config.accuracy;
        if converged || done >= per_rep_cap || log_mean == f64::NEG_INFINITY {
            return OrthantEstimate {
                log_value: log_mean,
                rel_error,
                points_used: (done as usize) * reps,
                budget_exceeded: !converged && log_mean != f64::NEG_INFINITY,
                tilting_fallback: false,
            };
        }
        target = (2 * done).min(per_rep_cap);
    }
}

/// Mean of replicate estimates (log) and relative standard error.
fn combine(replicates: &[Replicate], points: u64) -> (f64, f64) {
    let ln_n = libm::log(points as f64);
    let logs: Vec<f64> = replicates.iter().map(|r| r.log_sum - ln_n).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0);
    }
    let vals: Vec<f64> = logs.iter().map(|l| libm::exp(l - m)).collect();
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    let se = libm::sqrt(var / k);
    (m + libm::log(mean), se / mean)
}
