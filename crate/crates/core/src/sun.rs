//! Unified skew-normal distributions `SUN_{p,n}(ξ, Ω, Δ, γ, Γ)`.
//!
//! With `Ω = ω Ω̄ ω`, the density is
//!
//! ```text
//! φ_p(z − ξ; Ω) · Φₙ(γ + Δᵀ Ω̄⁻¹ ω⁻¹ (z − ξ); Γ − Δᵀ Ω̄⁻¹ Δ) / Φₙ(γ; Γ)
//! ```
//!
//! and a draw is `ξ + ω (V₀ + Δ Γ⁻¹ V₁)` with `V₀ ~ N_p(0, Ω̄ − Δ Γ⁻¹ Δᵀ)`
//! independent of `V₁ ~ N_n(0, Γ)` truncated to `V₁ > −γ`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::{cholesky, cholesky_psd, correlation_decompose, dot, CholFactor, JitterPolicy, Matrix, SymMatrix};
use crate::orthant::{box_probability, OrthantConfig, OrthantEstimate};
use crate::rng::derive_seed;
use crate::truncnorm::{gaussian_factor, sample_with_factor, SamplerConfig, TruncNormSampler, TruncNormSpec};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Latent coordinates whose conditional variance falls below this are
/// treated as point masses.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;
const UNIT_DIAG_TOL: f64 = 1e-10;

/// Orthant settings used by density evaluation.
pub fn density_config() -> OrthantConfig {
    OrthantConfig::default().with_accuracy(1e-5).with_max_points(32 << 19)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SunParams {
    xi: Vec<f64>,
    omega_mat: SymMatrix,
    delta: Matrix,
    gamma: Vec<f64>,
    gamma_mat: SymMatrix,
    omega: Vec<f64>,
    omega_bar: SymMatrix,
}

impl SunParams {
    /// Validates and assembles a parameter set. `gamma_mat` may be
    /// [`SymMatrix::empty`] when `n = 0`, giving the Gaussian `N_p(ξ, Ω)`.
    pub fn new(
        xi: Vec<f64>,
        omega_mat: SymMatrix,
        delta: Matrix,
        gamma: Vec<f64>,
        gamma_mat: SymMatrix,
    ) -> Result<Self> {
        let p = xi.len();
        let n = gamma.len();
        if p == 0 {
            bail!(InvalidParams, "location must have at least one coordinate");
        }
        if omega_mat.dim() != p {
            bail!(DimensionMismatch, "scale is {0}x{0} for location of length {p}", omega_mat.dim());
        }
        if delta.rows() != p || delta.cols() != n {
            bail!(DimensionMismatch, "skewness is {}x{}, expected {p}x{n}", delta.rows(), delta.cols());
        }
        if gamma_mat.dim() != n {
            bail!(DimensionMismatch, "latent correlation is {0}x{0}, expected {n}x{n}", gamma_mat.dim());
        }
        if !xi.iter().chain(&gamma).all(|v| v.is_finite()) || !delta.is_finite() {
            bail!(InvalidParams, "non-finite parameter");
        }
        cholesky(&omega_mat, JitterPolicy::NONE)
            .map_err(|_| Error::InvalidParams("scale matrix is not positive definite".into()))?;
        if let Some(i) = gamma_mat.diag().iter().position(|d| (d - 1.0).abs() > UNIT_DIAG_TOL) {
            bail!(InvalidParams, "latent correlation has diagonal {} at {i}", gamma_mat[(i, i)]);
        }
        let (omega, omega_bar) = correlation_decompose(&omega_mat)?;
        let params = Self { xi, omega_mat, delta, gamma, gamma_mat, omega, omega_bar };
        cholesky_psd(&params.omega_star())
            .map_err(|_| Error::InvalidParams("joint correlation matrix is not positive semi-definite".into()))?;
        Ok(params)
    }

    /// `N_p(ξ, Ω)` as a SUN with no latent coordinates.
    pub fn gaussian(xi: Vec<f64>, omega_mat: SymMatrix) -> Result<Self> {
        let p = xi.len();
        Self::new(xi, omega_mat, Matrix::zeros(p, 0), Vec::new(), SymMatrix::empty())
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn omega_mat(&self) -> &SymMatrix {
        &self.omega_mat
    }

    pub fn delta(&self) -> &Matrix {
        &self.delta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_mat(&self) -> &SymMatrix {
        &self.gamma_mat
    }

    /// Marginal standard deviations `ω`.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Correlation matrix `Ω̄`.
    pub fn omega_bar(&self) -> &SymMatrix {
        &self.omega_bar
    }

    /// The `(n+p)×(n+p)` matrix `[[Γ, Δᵀ], [Δ, Ω̄]]`.
    pub fn omega_star(&self) -> SymMatrix {
        let (p, n) = (self.dim(), self.latent_dim());
        let m = Matrix::from_fn(n + p, n + p, |i, j| match (i < n, j < n) {
            (true, true) => self.gamma_mat[(i, j)],
            (true, false) => self.delta[(j - n, i)],
            (false, true) => self.delta[(i - n, j)],
            (false, false) => self.omega_bar[(i - n, j - n)],
        });
        SymMatrix::symmetrized(m)
    }

    /// `ln Φₙ(γ; Γ)`, the log normalising constant of the latent part.
    pub fn log_normalizer(&self, config: &OrthantConfig) -> Result<OrthantEstimate> {
        ln_cdf(&self.gamma, &self.gamma_mat, config)
    }
}

fn ln_cdf(upper: &[f64], cov: &SymMatrix, config: &OrthantConfig) -> Result<OrthantEstimate> {
    let lower = vec![f64::NEG_INFINITY; upper.len()];
    box_probability(&lower, upper, cov, config)
}

/// Precomputed pieces for repeated density evaluation.
#[derive(Debug, Clone)]
pub struct SunDensity {
    xi: Vec<f64>,
    gamma: Vec<f64>,
    chol: CholFactor,
    log_const: f64,
    /// `Δᵀ Ω̄⁻¹ ω⁻¹`, n×p.
    shift: Matrix,
    /// Latent coordinates with non-degenerate conditional variance.
    active: Vec<usize>,
    degenerate: Vec<usize>,
    cond_cov: SymMatrix,
    ln_denominator: f64,
    config: OrthantConfig,
}

impl SunDensity {
    pub fn new(s: &SunParams) -> Result<Self> {
        Self::with_config(s, density_config())
    }

    pub fn with_config(s: &SunParams, config: OrthantConfig) -> Result<Self> {
        let p = s.dim();
        let n = s.latent_dim();
        let chol = cholesky(&s.omega_mat, JitterPolicy::NONE)?;
        let log_const = -0.5 * (p as f64 * LN_2PI + chol.log_det());
        let bar_chol = cholesky(&s.omega_bar, JitterPolicy::NONE)?;
        let solved = bar_chol.solve_matrix(&s.delta); // Ω̄⁻¹Δ, p×n
        let shift = Matrix::from_fn(n, p, |i, j| solved[(j, i)] / s.omega[j]);
        let cond = Matrix::from_fn(n, n, |i, j| {
            s.gamma_mat[(i, j)] - (0..p).map(|k| s.delta[(k, i)] * solved[(k, j)]).sum::<f64>()
        });
        let cond = SymMatrix::symmetrized(cond);
        let (degenerate, active): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| cond[(i, i)] < DEGENERATE_VARIANCE);
        let cond_cov = if active.is_empty() { SymMatrix::empty() } else { cond.select(&active) };
        if !active.is_empty() && cholesky(&cond_cov, JitterPolicy::NONE).is_err() {
            return Err(Error::DegenerateConditional);
        }
        let ln_denominator = s.log_normalizer(&config)?.log_value;
        Ok(Self {
            xi: s.xi.clone(),
            gamma: s.gamma.clone(),
            chol,
            log_const,
            shift,
            active,
            degenerate,
            cond_cov,
            ln_denominator,
            config,
        })
    }

    /// Log density and the relative error of the numerator CDF estimate.
    pub fn log_density_with_error(&self, z: &[f64]) -> Result<(f64, f64)> {
        if z.len() != self.xi.len() {
            bail!(DimensionMismatch, "point of length {} for dimension {}", z.len(), self.xi.len());
        }
        let u: Vec<f64> = z.iter().zip(&self.xi).map(|(a, b)| a - b).collect();
        let w = self.chol.solve_lower(&u);
        let gauss = self.log_const - 0.5 * dot(&w, &w);
        let arg: Vec<f64> = (0..self.gamma.len()).map(|i| self.gamma[i] + dot(self.shift.row(i), &u)).collect();
        if self.degenerate.iter().any(|&i| arg[i] < 0.0) {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        let upper: Vec<f64> = self.active.iter().map(|&i| arg[i]).collect();
        let num = ln_cdf(&upper, &self.cond_cov, &self.config)?;
        Ok((gauss + num.log_value - self.ln_denominator, num.rel_error))
    }

    /// Cheap upper bound on the log density, replacing the latent orthant
    /// probability by its smallest univariate margin.
    pub fn log_density_bound(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.xi.len() {
            bail!(DimensionMismatch, "point of length {} for dimension {}", z.len(), self.xi.len());
        }
        let u: Vec<f64> = z.iter().zip(&self.xi).map(|(a, b)| a - b).collect();
        let w = self.chol.solve_lower(&u);
        let gauss = self.log_const - 0.5 * dot(&w, &w);
        let mut margin = 0.0f64;
        for i in 0..self.gamma.len() {
            let arg = self.gamma[i] + dot(self.shift.row(i), &u);
            let lp = match self.active.iter().position(|&a| a == i) {
                Some(k) => crate::special::ln_cdf(arg / libm::sqrt(self.cond_cov[(k, k)])),
                None if arg < 0.0 => f64::NEG_INFINITY,
                None => 0.0,
            };
            margin = margin.min(lp);
        }
        Ok(gauss + margin - self.ln_denominator)
    }

    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        self.log_density_with_error(z).map(|r| r.0)
    }
}

/// Log density at `z`.
pub fn sun_log_density(s: &SunParams, z: &[f64]) -> Result<f64> {
    SunDensity::new(s)?.log_density(z)
}

/// Log moment generating function at `t`.
pub fn sun_log_mgf(s: &SunParams, t: &[f64]) -> Result<f64> {
    sun_log_mgf_with(s, t, &density_config())
}

pub fn sun_log_mgf_with(s: &SunParams, t: &[f64], config: &OrthantConfig) -> Result<f64> {
    if t.len() != s.dim() {
        bail!(DimensionMismatch, "argument of length {} for dimension {}", t.len(), s.dim());
    }
    let gauss = dot(&s.xi, t) + 0.5 * s.omega_mat.quad_form(t);
    if s.latent_dim() == 0 {
        return Ok(gauss);
    }
    let wt: Vec<f64> = t.iter().zip(&s.omega).map(|(a, b)| a * b).collect();
    let shifted: Vec<f64> = s.delta.tr_mul_vec(&wt)?.iter().zip(&s.gamma).map(|(a, g)| a + g).collect();
    let num = ln_cdf(&shifted, &s.gamma_mat, config)?;
    let den = s.log_normalizer(config)?;
    Ok(gauss + num.log_value - den.log_value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SunSampleBatch {
    /// One draw per row.
    pub draws: Matrix,
    pub seed: u64,
    /// Wall-clock seconds; filled in by callers that have a clock.
    pub seconds: Option<f64>,
    pub acceptance_rate: f64,
    pub low_acceptance: bool,
    pub tilting_fallback: bool,
}

/// `count` i.i.d. draws via the additive representation.
pub fn sun_sample(s: &SunParams, count: usize, seed: u64) -> Result<SunSampleBatch> {
    if count == 0 {
        bail!(InvalidArgument, "at least one draw must be requested");
    }
    let p = s.dim();
    let n = s.latent_dim();
    if n == 0 {
        let v0 = sample_with_factor(&gaussian_factor(&s.omega_bar)?, count, derive_seed(seed, 0));
        return Ok(assemble(s, v0, None, None, seed));
    }
    let gchol = cholesky(&s.gamma_mat, JitterPolicy::default())?;
    // K = ΔΓ⁻¹, p×n
    let k = gchol.solve_matrix(&s.delta.transpose()).transpose();
    let v0_cov = Matrix::from_fn(p, p, |i, j| s.omega_bar[(i, j)] - dot(k.row(i), s.delta.row(j)));
    let v0 = sample_with_factor(&gaussian_factor(&SymMatrix::symmetrized(v0_cov))?, count, derive_seed(seed, 0));
    let lower: Vec<f64> = s.gamma.iter().map(|g| -g).collect();
    let spec = TruncNormSpec::new(s.gamma_mat.clone(), lower)?;
    let tn = TruncNormSampler::new(&spec, SamplerConfig::default())?.sample(count, derive_seed(seed, 1))?;
    let mut batch = assemble(s, v0, Some((&k, &tn.draws)), None, seed);
    batch.acceptance_rate = tn.acceptance_rate;
    batch.low_acceptance = tn.low_acceptance;
    batch.tilting_fallback = tn.tilting_fallback;
    Ok(batch)
}

/// `ξ + ω (V₀ + K V₁)` row by row.
pub(crate) fn assemble(
    s: &SunParams,
    v0: Matrix,
    latent: Option<(&Matrix, &Matrix)>,
    seconds: Option<f64>,
    seed: u64,
) -> SunSampleBatch {
    let p = s.dim();
    let mut draws = v0;
    for r in 0..draws.rows() {
        let row = draws.row_mut(r);
        if let Some((k, v1)) = latent {
            let v1r = v1.row(r);
            for i in 0..p {
                row[i] += dot(k.row(i), v1r);
            }
        }
        for i in 0..p {
            row[i] = s.xi[i] + s.omega[i] * row[i];
        }
    }
    SunSampleBatch { draws, seed, seconds, acceptance_rate: 1.0, low_acceptance: false, tilting_fallback: false }
}

fn check_indices(idx: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    for &i in idx {
        if i >= p {
            return Err(Error::IndexOutOfRange { index: i, dim: p });
        }
        if seen[i] {
            bail!(InvalidArgument, "index {i} repeated");
        }
        seen[i] = true;
    }
    Ok(())
}

/// Distribution of the coordinates `indices` (in the given order).
pub fn sun_marginal(s: &SunParams, indices: &[usize]) -> Result<SunParams> {
    if indices.is_empty() {
        bail!(InvalidArgument, "marginal over an empty index set");
    }
    check_indices(indices, s.dim())?;
    SunParams::new(
        indices.iter().map(|&i| s.xi[i]).collect(),
        s.omega_mat.select(indices),
        s.delta.select_rows(indices),
        s.gamma.clone(),
        s.gamma_mat.clone(),
    )
}

/// Distribution of `a + Aᵀz` for `A` of size p×q.
pub fn sun_affine(s: &SunParams, a: &[f64], mat: &Matrix) -> Result<SunParams> {
    let p = s.dim();
    let q = mat.cols();
    if mat.rows() != p || a.len() != q {
        bail!(DimensionMismatch, "map is {}x{} with offset {} for dimension {p}", mat.rows(), q, a.len());
    }
    let at = mat.transpose();
    let scale = SymMatrix::symmetrized(at.matmul(s.omega_mat.matrix())?.matmul(mat)?);
    if q == 0 || q > p || cholesky(&scale, JitterPolicy::NONE).is_err() {
        return Err(Error::RankDeficient);
    }
    let xi: Vec<f64> = at.mul_vec(&s.xi)?.iter().zip(a).map(|(v, o)| v + o).collect();
    let new_omega: Vec<f64> = scale.diag().iter().map(|d| libm::sqrt(*d)).collect();
    let inv: Vec<f64> = new_omega.iter().map(|w| 1.0 / w).collect();
    let delta = at.matmul(&s.delta.scale_rows(&s.omega))?.scale_rows(&inv);
    SunParams::new(xi, scale, delta, s.gamma.clone(), s.gamma_mat.clone())
}

/// Distribution of the remaining coordinates given `z[fixed] = values`.
pub fn sun_conditional(s: &SunParams, fixed: &[usize], values: &[f64]) -> Result<SunParams> {
    let p = s.dim();
    let n = s.latent_dim();
    if fixed.len() != values.len() {
        bail!(DimensionMismatch, "{} indices with {} values", fixed.len(), values.len());
    }
    check_indices(fixed, p)?;
    if values.iter().any(|v| !v.is_finite()) {
        bail!(InvalidArgument, "conditioning values must be finite");
    }
    if fixed.is_empty() {
        return Ok(s.clone());
    }
    let free: Vec<usize> = (0..p).filter(|i| !fixed.contains(i)).collect();
    if free.is_empty() {
        bail!(InvalidArgument, "cannot condition on every coordinate");
    }
    let w: Vec<f64> = fixed.iter().zip(values).map(|(&i, v)| (v - s.xi[i]) / s.omega[i]).collect();
    let bar = s.omega_bar.matrix();
    let c22 = cholesky(&s.omega_bar.select(fixed), JitterPolicy::NONE)?;
    let b21 = bar.select(fixed, &free);
    let kmat = c22.solve_matrix(&b21); // Ω̄22⁻¹Ω̄21
    let d2 = s.delta.select_rows(fixed);
    let bmat = c22.solve_matrix(&d2); // Ω̄22⁻¹Δ2
    let m = free.len();

    let schur = SymMatrix::symmetrized(Matrix::from_fn(m, m, |i, j| {
        bar[(free[i], free[j])] - (0..fixed.len()).map(|k| b21[(k, i)] * kmat[(k, j)]).sum::<f64>()
    }));
    let kw = kmat.tr_mul_vec(&w)?;
    let xi: Vec<f64> = (0..m).map(|i| s.xi[free[i]] + s.omega[free[i]] * kw[i]).collect();
    let w1: Vec<f64> = free.iter().map(|&i| s.omega[i]).collect();
    let omega_mat = schur.scale_both(&w1);
    let c: Vec<f64> = schur.diag().iter().map(|d| libm::sqrt(*d)).collect();

    if n == 0 {
        return SunParams::gaussian(xi, omega_mat);
    }
    let lat = Matrix::from_fn(n, n, |i, j| {
        s.gamma_mat[(i, j)] - (0..fixed.len()).map(|k| d2[(k, i)] * bmat[(k, j)]).sum::<f64>()
    });
    let dc: Vec<f64> = (0..n).map(|i| lat[(i, i)]).collect();
    if dc.iter().any(|&v| v < DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateConditional);
    }
    let dc: Vec<f64> = dc.iter().map(|v| libm::sqrt(*v)).collect();
    let bw = bmat.tr_mul_vec(&w)?;
    let gamma: Vec<f64> = (0..n).map(|i| (s.gamma[i] + bw[i]) / dc[i]).collect();
    let inv_dc: Vec<f64> = dc.iter().map(|v| 1.0 / v).collect();
    let mut gamma_mat = SymMatrix::symmetrized(lat).scale_both(&inv_dc).into_matrix();
    for i in 0..n {
        gamma_mat[(i, i)] = 1.0;
    }
    let delta = Matrix::from_fn(m, n, |i, j| {
        let v = s.delta[(free[i], j)] - (0..fixed.len()).map(|k| b21[(k, i)] * bmat[(k, j)]).sum::<f64>();
        v / (c[i] * dc[j])
    });
    SunParams::new(xi, omega_mat, delta, gamma, SymMatrix::symmetrized(gamma_mat))
}

/// Monte Carlo mean with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub mean: Vec<f64>,
    /// `None` when fewer than two draws were used.
    pub std_error: Option<Vec<f64>>,
}

pub fn mean_of_draws(draws: &Matrix) -> MeanEstimate {
    let (r, p) = (draws.rows(), draws.cols());
    let mut mean = vec![0.0; p];
    for i in 0..r {
        for (m, v) in mean.iter_mut().zip(draws.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r as f64);
    if r < 2 {
        return MeanEstimate { mean, std_error: None };
    }
    let mut ss = vec![0.0; p];
    for i in 0..r {
        for ((acc, v), m) in ss.iter_mut().zip(draws.row(i)).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let se = ss.iter().map(|v| libm::sqrt(v / ((r - 1) as f64) / r as f64)).collect();
    MeanEstimate { mean, std_error: Some(se) }
}

pub fn sun_mean_mc(s: &SunParams, count: usize, seed: u64) -> Result<MeanEstimate> {
    Ok(mean_of_draws(&sun_sample(s, count, seed)?.draws))
}
