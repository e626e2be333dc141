//! Exact sampling from zero-mean multivariate normals truncated below a
//! bound vector, by accept–reject from the minimax-tilted sequential
//! proposal, plus plain multivariate normal sampling.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{bail, Error, Result};
use crate::linalg::{cholesky, cholesky_psd, CholFactor, JitterPolicy, Matrix, SymMatrix};
use crate::rng;
use crate::tilting::{prepare, propose, solve_tilting, unscramble, NewtonConfig, PreparedBox, Tilting};

/// Proposals generated from one RNG stream.
const CHUNK: usize = 1024;
/// Acceptance rates below this raise [`TruncSampleBatch::low_acceptance`].
pub const LOW_ACCEPTANCE: f64 = 1e-3;

/// `N(0, cov)` restricted to `x ≥ lower`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncNormSpec {
    pub cov: SymMatrix,
    pub lower: Vec<f64>,
}

impl TruncNormSpec {
    pub fn new(cov: SymMatrix, lower: Vec<f64>) -> Result<Self> {
        if lower.len() != cov.dim() {
            bail!(DimensionMismatch, "{} bounds for dimension {}", lower.len(), cov.dim());
        }
        if lower.iter().any(|l| l.is_nan()) {
            bail!(InvalidArgument, "NaN truncation bound");
        }
        Ok(Self { cov, lower })
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub newton: NewtonConfig,
    /// Give up after this many proposals.
    pub max_proposals: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { newton: NewtonConfig::default(), max_proposals: 1 << 34 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncSampleBatch {
    /// One draw per row.
    pub draws: Matrix,
    pub acceptance_rate: f64,
    pub proposals_used: usize,
    pub low_acceptance: bool,
    /// The saddle-point solve failed and untilted proposals were used.
    pub tilting_fallback: bool,
}

/// A reusable sampler: reordering and the saddle-point solve are done once.
#[derive(Debug, Clone)]
pub struct TruncNormSampler {
    prepared: PreparedBox,
    tilt: Tilting,
    config: SamplerConfig,
}

impl TruncNormSampler {
    pub fn new(spec: &TruncNormSpec, config: SamplerConfig) -> Result<Self> {
        if spec.lower.contains(&f64::INFINITY) {
            return Err(Error::InfeasibleRegion);
        }
        let upper = vec![f64::INFINITY; spec.dim()];
        let prepared = prepare(&spec.cov, &spec.lower, &upper)?;
        let tilt = solve_tilting(&prepared, &config.newton);
        if tilt.psi_star == f64::NEG_INFINITY || tilt.psi_star.is_nan() {
            return Err(Error::InfeasibleRegion);
        }
        Ok(Self { prepared, tilt, config })
    }

    pub fn dim(&self) -> usize {
        self.prepared.dim()
    }

    pub fn tilting(&self) -> &Tilting {
        &self.tilt
    }

    /// Runs one chunk of proposals on stream `chunk`, appending accepted
    /// draws (original coordinates, row-major) to `out`.
    fn run_chunk(&self, seed: u64, chunk: u64, out: &mut Vec<f64>) -> usize {
        let d = self.dim();
        let mut g = rng::stream(seed, chunk);
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut accepted = 0;
        for _ in 0..CHUNK {
            let logw = propose(&self.prepared, &self.tilt, &mut z, &mut g);
            let u: f64 = g.random();
            if libm::log(u) <= logw - self.tilt.psi_star {
                unscramble(&self.prepared, &z, &mut x);
                out.extend_from_slice(&x);
                accepted += 1;
            }
        }
        accepted
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<TruncSampleBatch> {
        if count == 0 {
            bail!(InvalidArgument, "at least one draw must be requested");
        }
        let d = self.dim();
        let block_chunks = (2 * count).max(CHUNK).div_ceil(CHUNK);
        let mut draws: Vec<f64> = Vec::with_capacity(count * d);
        let mut accepted = 0usize;
        let mut proposals = 0usize;
        let mut next_chunk = 0u64;
        while accepted < count {
            if proposals >= self.config.max_proposals {
                bail!(InvalidArgument, "accept-reject exhausted {proposals} proposals with {accepted} acceptances");
            }
            let ids: Vec<u64> = (next_chunk..next_chunk + block_chunks as u64).collect();
            next_chunk += block_chunks as u64;
            let run = |&c: &u64| {
                let mut buf = Vec::new();
                let k = self.run_chunk(seed, c, &mut buf);
                (k, buf)
            };
            #[cfg(feature = "parallel")]
            let results: Vec<(usize, Vec<f64>)> = {
                use rayon::prelude::*;
                ids.par_iter().map(run).collect()
            };
            #[cfg(not(feature = "parallel"))]
            let results: Vec<(usize, Vec<f64>)> = ids.iter().map(run).collect();
            for (k, buf) in results {
                accepted += k;
                draws.extend_from_slice(&buf);
            }
            proposals += block_chunks * CHUNK;
        }
        draws.truncate(count * d);
        let acceptance_rate = accepted as f64 / proposals as f64;
        Ok(TruncSampleBatch {
            draws: Matrix::from_vec(count, d, draws)?,
            acceptance_rate,
            proposals_used: proposals,
            low_acceptance: acceptance_rate < LOW_ACCEPTANCE,
            tilting_fallback: !self.tilt.converged,
        })
    }
}

/// `count` exact i.i.d. draws from the truncated normal, reproducible from `seed`.
pub fn sample_tmvn(spec: &TruncNormSpec, count: usize, seed: u64) -> Result<TruncSampleBatch> {
    TruncNormSampler::new(spec, SamplerConfig::default())?.sample(count, seed)
}

/// Factor for Gaussian sampling: plain Cholesky, then the semi-definite
/// factorisation, then jittered Cholesky.
pub fn gaussian_factor(cov: &SymMatrix) -> Result<CholFactor> {
    if let Ok(f) = cholesky(cov, JitterPolicy::NONE) {
        return Ok(f);
    }
    cholesky_psd(cov).or_else(|_| cholesky(cov, JitterPolicy::default()))
}

/// `count` i.i.d. draws from `N(0, cov)`, one per row.
pub fn sample_mvn(cov: &SymMatrix, count: usize, seed: u64) -> Result<Matrix> {
    let factor = gaussian_factor(cov)?;
    Ok(sample_with_factor(&factor, count, seed))
}

pub(crate) fn sample_with_factor(factor: &CholFactor, count: usize, seed: u64) -> Matrix {
    let p = factor.dim();
    let chunks = count.div_ceil(CHUNK);
    let run = |c: usize| {
        let mut g = rng::stream(seed, c as u64);
        let rows = CHUNK.min(count - c * CHUNK);
        let mut out = Vec::with_capacity(rows * p);
        let mut e = vec![0.0; p];
        for _ in 0..rows {
            e.iter_mut().for_each(|v| *v = g.sample(StandardNormal));
            let l = &factor.lower;
            out.extend((0..p).map(|i| crate::linalg::dot(&l.row(i)[..=i], &e[..=i])));
        }
        out
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<f64>> = (0..chunks).map(run).collect();
    let data: Vec<f64> = parts.concat();
    Matrix::from_vec(count, p, data).expect("chunk sizes add up")
}
