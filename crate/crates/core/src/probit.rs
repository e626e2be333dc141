//! Conjugate Bayesian probit regression.
//!
//! With `D = diag(2y − 1) X` and `sᵢ = (dᵢᵀ Ω dᵢ + 1)^{1/2}`, a Gaussian prior
//! `N_p(ξ, Ω)` yields the posterior
//!
//! ```text
//! SUN_{p,n}(ξ, Ω, Ω̄ ω Dᵀ s⁻¹, s⁻¹ D ξ, s⁻¹ (D Ω Dᵀ + Iₙ) s⁻¹)
//! ```
//!
//! with evidence `Φₙ(s⁻¹ D ξ; s⁻¹ (D Ω Dᵀ + Iₙ) s⁻¹)`. A SUN prior with `m`
//! latent coordinates yields a SUN posterior with `m + n`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::{cholesky, JitterPolicy, Matrix, SymMatrix};
use crate::orthant::{box_probability, phi_n_batch, OrthantConfig, OrthantEstimate, OrthantProblem};
use crate::rng::derive_seed;
use crate::special::ln_pdf;
use crate::sun::{assemble, mean_of_draws, sun_sample, SunParams, SunSampleBatch};
use crate::truncnorm::{gaussian_factor, sample_with_factor, SamplerConfig, TruncNormSampler, TruncNormSpec};

/// Binary responses with their design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    y: Vec<u8>,
    x: Matrix,
    feature_names: Option<Vec<String>>,
}

impl BinaryDataset {
    /// `x` has one row per response. Zero rows are allowed.
    pub fn new(y: Vec<u8>, x: Matrix) -> Result<Self> {
        if x.rows() != y.len() {
            bail!(DimensionMismatch, "{} responses for {} design rows", y.len(), x.rows());
        }
        if x.cols() == 0 {
            bail!(InvalidArgument, "design matrix has no columns");
        }
        if let Some(i) = y.iter().position(|&v| v > 1) {
            bail!(InvalidArgument, "response {i} is {}, expected 0 or 1", y[i]);
        }
        if !x.is_finite() {
            bail!(InvalidArgument, "design matrix has non-finite entries");
        }
        Ok(Self { y, x, feature_names: None })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.cols() {
            bail!(DimensionMismatch, "{} names for {} columns", names.len(), self.x.cols());
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// `D = diag(2y − 1) X`.
    pub fn signed_design(&self) -> Matrix {
        let signs: Vec<f64> = self.y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        self.x.scale_rows(&signs)
    }

    /// The dataset restricted to the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        check_columns(cols, self.dim())?;
        Ok(Self {
            y: self.y.clone(),
            x: self.x.select_cols(cols),
            feature_names: self.feature_names.as_ref().map(|n| cols.iter().map(|&c| n[c].clone()).collect()),
        })
    }
}

fn check_columns(cols: &[usize], p: usize) -> Result<()> {
    if cols.is_empty() {
        bail!(InvalidArgument, "a model needs at least one column");
    }
    for (k, &c) in cols.iter().enumerate() {
        if c >= p {
            return Err(Error::IndexOutOfRange { index: c, dim: p });
        }
        if cols[..k].contains(&c) {
            bail!(InvalidArgument, "column {c} repeated");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Gaussian,
    Sun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFit {
    pub posterior: SunParams,
    /// `diag(2y − 1) X`.
    pub d: Matrix,
    /// Diagonal of `s`.
    pub s: Vec<f64>,
    pub prior_kind: PriorKind,
    /// Latent dimension of the prior (0 for a Gaussian prior).
    pub prior_latent: usize,
    pub log_evidence: f64,
    pub evidence_rel_error: f64,
}

/// Likelihood block of the update: `s`, `s⁻¹Dξ`, `s⁻¹(DΩDᵀ + I)s⁻¹` and `ΩDᵀ`.
struct Update {
    s: Vec<f64>,
    gamma: Vec<f64>,
    gamma_mat: SymMatrix,
    omega_dt: Matrix,
}

fn update_terms(d: &Matrix, xi: &[f64], omega: &SymMatrix) -> Result<Update> {
    let n = d.rows();
    let omega_dt = omega.matrix().matmul(&d.transpose())?; // p×n
    let dod = d.matmul(&omega_dt)?;
    let s: Vec<f64> = (0..n).map(|i| libm::sqrt(dod[(i, i)] + 1.0)).collect();
    let dxi = d.mul_vec(xi)?;
    let gamma = dxi.iter().zip(&s).map(|(v, si)| v / si).collect();
    let mut g = Matrix::from_fn(n, n, |i, k| (dod[(i, k)] + if i == k { 1.0 } else { 0.0 }) / (s[i] * s[k]));
    for i in 0..n {
        g[(i, i)] = 1.0;
    }
    Ok(Update { s, gamma, gamma_mat: SymMatrix::symmetrized(g), omega_dt })
}

fn ln_cdf(upper: &[f64], cov: &SymMatrix, config: &OrthantConfig) -> Result<OrthantEstimate> {
    let lower = vec![f64::NEG_INFINITY; upper.len()];
    box_probability(&lower, upper, cov, config)
}

fn check_prior(data: &BinaryDataset, xi: &[f64], omega: &SymMatrix) -> Result<()> {
    if xi.len() != data.dim() || omega.dim() != data.dim() {
        bail!(DimensionMismatch, "prior of dimension {}/{} for {} covariates", xi.len(), omega.dim(), data.dim());
    }
    cholesky(omega, JitterPolicy::NONE)?;
    Ok(())
}

/// Posterior under a Gaussian prior `N_p(ξ, Ω)`.
pub fn fit_gaussian_prior(data: &BinaryDataset, xi: &[f64], omega: &SymMatrix) -> Result<PosteriorFit> {
    fit_gaussian_prior_with(data, xi, omega, &OrthantConfig::default())
}

pub fn fit_gaussian_prior_with(
    data: &BinaryDataset,
    xi: &[f64],
    omega: &SymMatrix,
    config: &OrthantConfig,
) -> Result<PosteriorFit> {
    check_prior(data, xi, omega)?;
    let prior = SunParams::gaussian(xi.to_vec(), omega.clone())?;
    let mut fit = fit_sun_prior_with(data, &prior, config)?;
    fit.prior_kind = PriorKind::Gaussian;
    Ok(fit)
}

/// Posterior under a SUN prior. With `n` new observations the latent
/// coordinates of the result are the prior's followed by one per observation.
pub fn fit_sun_prior(data: &BinaryDataset, prior: &SunParams) -> Result<PosteriorFit> {
    fit_sun_prior_with(data, prior, &OrthantConfig::default())
}

pub fn fit_sun_prior_with(data: &BinaryDataset, prior: &SunParams, config: &OrthantConfig) -> Result<PosteriorFit> {
    let p = prior.dim();
    let m = prior.latent_dim();
    let n = data.len();
    if data.dim() != p {
        bail!(DimensionMismatch, "prior of dimension {p} for {} covariates", data.dim());
    }
    let d = data.signed_design();
    let u = update_terms(&d, prior.xi(), prior.omega_mat())?;
    let omega = prior.omega();

    // Δpost = (Δ, Ω̄ωDᵀs⁻¹) and Ω̄ωDᵀ = ω⁻¹ΩDᵀ
    let delta = Matrix::from_fn(p, m + n, |j, k| {
        if k < m {
            prior.delta()[(j, k)]
        } else {
            u.omega_dt[(j, k - m)] / (omega[j] * u.s[k - m])
        }
    });
    let mut gamma = prior.gamma().to_vec();
    gamma.extend_from_slice(&u.gamma);
    // off-diagonal block s⁻¹DωΔ, n×m
    let cross = d.scale_cols(omega).matmul(prior.delta())?;
    let gamma_mat = Matrix::from_fn(m + n, m + n, |i, k| match (i < m, k < m) {
        (true, true) => prior.gamma_mat()[(i, k)],
        (false, false) => u.gamma_mat[(i - m, k - m)],
        (false, true) => cross[(i - m, k)] / u.s[i - m],
        (true, false) => cross[(k - m, i)] / u.s[k - m],
    });
    let posterior = SunParams::new(
        prior.xi().to_vec(),
        prior.omega_mat().clone(),
        delta,
        gamma,
        SymMatrix::symmetrized(gamma_mat),
    )?;

    let (log_evidence, evidence_rel_error) = if n == 0 {
        (0.0, 0.0)
    } else if m == 0 {
        let e = ln_cdf(posterior.gamma(), posterior.gamma_mat(), config)?;
        (e.log_value, e.rel_error)
    } else {
        let num = posterior.log_normalizer(config)?;
        let den = prior.log_normalizer(config)?;
        (num.log_value - den.log_value, libm::hypot(num.rel_error, den.rel_error))
    };
    Ok(PosteriorFit {
        posterior,
        d,
        s: u.s,
        prior_kind: if m == 0 { PriorKind::Gaussian } else { PriorKind::Sun },
        prior_latent: m,
        log_evidence,
        evidence_rel_error,
    })
}

/// Settings for posterior means. The closed form uses `orthant`; fits
/// with a SUN prior fall back to `mc_draws` posterior draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanConfig {
    pub orthant: OrthantConfig,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for MeanConfig {
    fn default() -> Self {
        Self { orthant: OrthantConfig::default(), mc_draws: 100_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMean {
    pub mean: Vec<f64>,
    /// Largest relative error among the orthant terms (closed form only).
    pub rel_error: f64,
    /// Monte Carlo standard errors (SUN-prior fits only).
    pub std_error: Option<Vec<f64>>,
}

pub fn posterior_mean(fit: &PosteriorFit) -> Result<PosteriorMean> {
    posterior_mean_with(fit, &MeanConfig::default())
}

/// Closed-form mean `ξ + ΩDᵀs⁻¹η / Φₙ(γ; Γ)` for Gaussian priors, where
/// `ηᵢ = φ(γᵢ) Φ_{n−1}(γ₋ᵢ − Γ₋ᵢ,ᵢ γᵢ; Γ₋ᵢ,₋ᵢ − Γ₋ᵢ,ᵢ Γᵢ,₋ᵢ)`.
pub fn posterior_mean_with(fit: &PosteriorFit, config: &MeanConfig) -> Result<PosteriorMean> {
    let post = &fit.posterior;
    if fit.prior_kind == PriorKind::Sun {
        let batch = sample_posterior(fit, config.mc_draws, config.seed)?;
        let est = mean_of_draws(&batch.draws);
        return Ok(PosteriorMean { mean: est.mean, rel_error: 0.0, std_error: est.std_error });
    }
    let n = post.latent_dim();
    let p = post.dim();
    if n == 0 {
        return Ok(PosteriorMean { mean: post.xi().to_vec(), rel_error: 0.0, std_error: None });
    }
    let g = post.gamma();
    let gm = post.gamma_mat();
    let mut problems = Vec::with_capacity(n + 1);
    problems.push(OrthantProblem::with_config(g.to_vec(), gm.clone(), config.orthant)?);
    let mut ln_eta = vec![0.0; n];
    let mut sub_index = vec![usize::MAX; n];
    for i in 0..n {
        ln_eta[i] = ln_pdf(g[i]);
        if n == 1 {
            continue;
        }
        let rest: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let upper: Vec<f64> = rest.iter().map(|&k| g[k] - gm[(k, i)] * g[i]).collect();
        let cov = Matrix::from_fn(n - 1, n - 1, |a, b| gm[(rest[a], rest[b])] - gm[(rest[a], i)] * gm[(i, rest[b])]);
        sub_index[i] = problems.len();
        problems.push(OrthantProblem::with_config(upper, SymMatrix::symmetrized(cov), config.orthant)?);
    }
    let results = phi_n_batch(&problems);
    let mut rel_error: f64 = 0.0;
    let mut logs = Vec::with_capacity(results.len());
    for r in results {
        let e = r?;
        rel_error = rel_error.max(e.rel_error);
        logs.push(e.log_value);
    }
    let ln_den = logs[0];
    if ln_den == f64::NEG_INFINITY {
        return Err(Error::InfeasibleRegion);
    }
    // weights wᵢ = ηᵢ / (sᵢ Φₙ)
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let ln_phi = if sub_index[i] == usize::MAX { 0.0 } else { logs[sub_index[i]] };
            libm::exp(ln_eta[i] + ln_phi - ln_den) / fit.s[i]
        })
        .collect();
    let shift = post.omega_mat().matrix().matmul(&fit.d.transpose())?.mul_vec(&w)?;
    let mean = (0..p).map(|j| post.xi()[j] + shift[j]).collect();
    Ok(PosteriorMean { mean, rel_error, std_error: None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub prob: f64,
    pub rel_error: f64,
    /// The orthant errors leave the probability uncertain beyond 1e-3.
    pub uncertain: bool,
}

/// Tolerance on the relative error of a predictive probability.
pub const PREDICTION_TOLERANCE: f64 = 1e-3;

/// `pr(y_new = 1 | y, X)` at `x_new`, as a ratio of evidences.
pub fn predict_prob(fit: &PosteriorFit, x_new: &[f64]) -> Result<Prediction> {
    predict_label(fit, x_new, 1, &OrthantConfig::default())
}

/// `pr(y_new = 0 | y, X)`.
pub fn predict_prob_y0(fit: &PosteriorFit, x_new: &[f64]) -> Result<Prediction> {
    predict_label(fit, x_new, 0, &OrthantConfig::default())
}

pub fn predict_label(fit: &PosteriorFit, x_new: &[f64], label: u8, config: &OrthantConfig) -> Result<Prediction> {
    let post = &fit.posterior;
    if x_new.len() != post.dim() {
        bail!(DimensionMismatch, "new point of length {} for {} covariates", x_new.len(), post.dim());
    }
    let row = BinaryDataset::new(vec![label], Matrix::from_vec(1, x_new.len(), x_new.to_vec())?)?;
    // updating the posterior with the new point has evidence Φ_{n+1} / Φₙ
    let ext = fit_sun_prior_with(&row, post, config)?;
    if ext.log_evidence.is_nan() {
        return Err(Error::InfeasibleRegion);
    }
    let prob = libm::exp(ext.log_evidence).clamp(0.0, 1.0);
    let rel_error = ext.evidence_rel_error;
    Ok(Prediction { prob, rel_error, uncertain: rel_error > PREDICTION_TOLERANCE })
}

/// A candidate model: a subset of columns with its own Gaussian prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub columns: Vec<usize>,
    pub xi: Vec<f64>,
    pub omega: SymMatrix,
    pub prior_prob: f64,
}

impl ModelSpec {
    pub fn new(columns: Vec<usize>, xi: Vec<f64>, omega: SymMatrix, prior_prob: f64) -> Result<Self> {
        if xi.len() != columns.len() || omega.dim() != columns.len() {
            bail!(DimensionMismatch, "prior of dimension {}/{} for {} columns", xi.len(), omega.dim(), columns.len());
        }
        if !(prior_prob > 0.0 && prior_prob <= 1.0) {
            bail!(InvalidArgument, "prior model probability {prior_prob} outside (0, 1]");
        }
        Ok(Self { columns, xi, omega, prior_prob })
    }
}

/// `ln p(y | X_J)` for the model.
pub fn log_marginal_likelihood(model: &ModelSpec, data: &BinaryDataset) -> Result<OrthantEstimate> {
    log_marginal_likelihood_with(model, data, &OrthantConfig::default())
}

pub fn log_marginal_likelihood_with(
    model: &ModelSpec,
    data: &BinaryDataset,
    config: &OrthantConfig,
) -> Result<OrthantEstimate> {
    let sub = data.select_columns(&model.columns)?;
    check_prior(&sub, &model.xi, &model.omega)?;
    let u = update_terms(&sub.signed_design(), &model.xi, &model.omega)?;
    ln_cdf(&u.gamma, &u.gamma_mat, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPosterior {
    pub probabilities: Vec<f64>,
    pub log_evidence: Vec<f64>,
    pub rel_errors: Vec<f64>,
    /// Entry `(i, j)` is `ln p(y | M_i) − ln p(y | M_j)`.
    pub log_bayes_factors: Matrix,
}

/// Tolerance on the sum of prior model probabilities.
const PRIOR_SUM_TOL: f64 = 1e-12;

pub fn model_posterior(models: &[ModelSpec], data: &BinaryDataset) -> Result<ModelPosterior> {
    model_posterior_with(models, data, &OrthantConfig::default())
}

pub fn model_posterior_with(
    models: &[ModelSpec],
    data: &BinaryDataset,
    config: &OrthantConfig,
) -> Result<ModelPosterior> {
    if models.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let total: f64 = models.iter().map(|m| m.prior_prob).sum();
    if (total - 1.0).abs() > PRIOR_SUM_TOL {
        bail!(InvalidArgument, "prior model probabilities sum to {total}");
    }
    let mut log_evidence = Vec::with_capacity(models.len());
    let mut rel_errors = Vec::with_capacity(models.len());
    for m in models {
        let e = log_marginal_likelihood_with(m, data, config)?;
        log_evidence.push(e.log_value);
        rel_errors.push(e.rel_error);
    }
    let scores: Vec<f64> = models.iter().zip(&log_evidence).map(|(m, l)| libm::log(m.prior_prob) + l).collect();
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::InfeasibleRegion);
    }
    let weights: Vec<f64> = scores.iter().map(|s| libm::exp(s - top)).collect();
    let norm: f64 = weights.iter().sum();
    let k = models.len();
    Ok(ModelPosterior {
        probabilities: weights.iter().map(|w| w / norm).collect(),
        log_bayes_factors: Matrix::from_fn(k, k, |i, j| log_evidence[i] - log_evidence[j]),
        log_evidence,
        rel_errors,
    })
}

/// `count` i.i.d. posterior draws. Gaussian-prior fits use the two-block
/// scheme with `V₀ ~ N_p(0, Ω̄ − Ω̄ωDᵀ(DΩDᵀ + I)⁻¹DωΩ̄)` and `V₁` truncated
/// normal, combined as `ξ + ω{V₀ + Ω̄ωDᵀ(DΩDᵀ + I)⁻¹ s V₁}`; SUN-prior
/// fits use the general additive representation.
pub fn sample_posterior(fit: &PosteriorFit, count: usize, seed: u64) -> Result<SunSampleBatch> {
    let post = &fit.posterior;
    if fit.prior_kind == PriorKind::Sun || post.latent_dim() == 0 {
        return sun_sample(post, count, seed);
    }
    if count == 0 {
        bail!(InvalidArgument, "at least one draw must be requested");
    }
    let p = post.dim();
    let n = post.latent_dim();
    let omega = post.omega_mat();
    let w = post.omega();
    let g = omega.matrix().matmul(&fit.d.transpose())?; // ΩDᵀ
    let mut m = fit.d.matmul(&g)?;
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    let mchol = cholesky(&SymMatrix::symmetrized(m), JitterPolicy::default())?;
    let h = mchol.solve_matrix(&g.transpose()); // (DΩDᵀ + I)⁻¹DΩ, n×p
    let v0_cov = Matrix::from_fn(p, p, |i, j| {
        (omega[(i, j)] - (0..n).map(|k| g[(i, k)] * h[(k, j)]).sum::<f64>()) / (w[i] * w[j])
    });
    let v0 = sample_with_factor(&gaussian_factor(&SymMatrix::symmetrized(v0_cov))?, count, derive_seed(seed, 0));
    // K = ω⁻¹ ΩDᵀ (DΩDᵀ + I)⁻¹ s
    let k = Matrix::from_fn(p, n, |i, j| h[(j, i)] * fit.s[j] / w[i]);
    let lower: Vec<f64> = post.gamma().iter().map(|v| -v).collect();
    let spec = TruncNormSpec::new(post.gamma_mat().clone(), lower)?;
    let tn = TruncNormSampler::new(&spec, SamplerConfig::default())?.sample(count, derive_seed(seed, 1))?;
    let mut batch = assemble(post, v0, Some((&k, &tn.draws)), None, seed);
    batch.acceptance_rate = tn.acceptance_rate;
    batch.low_acceptance = tn.low_acceptance;
    batch.tilting_fallback = tn.tilting_fallback;
    Ok(batch)
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed interval for column `j` of a draw matrix.
pub fn credible_interval_from_draws(draws: &Matrix, j: usize, level: f64) -> Result<(f64, f64)> {
    if j >= draws.cols() {
        return Err(Error::IndexOutOfRange { index: j, dim: draws.cols() });
    }
    if !(level > 0.0 && level <= 1.0) {
        bail!(InvalidArgument, "credible level {level} outside (0, 1]");
    }
    if draws.rows() == 0 {
        bail!(InvalidArgument, "no draws");
    }
    let mut col = draws.col(j);
    col.sort_by(f64::total_cmp);
    let a = 0.5 * (1.0 - level);
    Ok((quantile(&col, a), quantile(&col, 1.0 - a)))
}

/// Equal-tailed credible interval for coefficient `j` from `count` posterior draws.
pub fn credible_interval(fit: &PosteriorFit, j: usize, level: f64, count: usize, seed: u64) -> Result<(f64, f64)> {
    if j >= fit.posterior.dim() {
        return Err(Error::IndexOutOfRange { index: j, dim: fit.posterior.dim() });
    }
    let batch = sample_posterior(fit, count, seed)?;
    credible_interval_from_draws(&batch.draws, j, level)
}
