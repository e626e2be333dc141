//! Timed comparison of the i.i.d. posterior sampler with the Gibbs baseline.

use std::time::Instant;

use serde::Serialize;
use sunprobit_core::baseline::{effective_sample_size, gibbs_albert_chib};
use sunprobit_core::probit::{fit_gaussian_prior_with, posterior_mean_with, quantile, sample_posterior, MeanConfig};
use sunprobit_core::{BinaryDataset, Matrix, OrthantConfig, SymMatrix};

/// Minimum, quartiles and maximum of the per-coordinate ESS.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EssSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl EssSummary {
    pub fn of(ess: &[f64]) -> Self {
        let mut v = ess.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SamplerReport {
    pub draws: usize,
    pub seconds: f64,
    pub samples_per_sec: f64,
    pub ess: Vec<f64>,
    pub ess_summary: EssSummary,
    /// Wall-clock seconds divided by the median ESS.
    pub seconds_per_effective_sample: f64,
    pub posterior_mean: Vec<f64>,
    /// Monte Carlo standard errors `sd / √ESS`.
    pub std_error: Vec<f64>,
    /// Sampler mean minus the closed-form mean, per coordinate.
    pub discrepancy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Comparison {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub closed_form_mean: Vec<f64>,
    pub closed_form_rel_err: f64,
    pub exact: SamplerReport,
    pub gibbs: SamplerReport,
    /// Fraction of coordinates whose two sampler means lie within four
    /// combined standard errors.
    pub agreement_4se: f64,
}

/// Runs both samplers with `draws` retained draws each. Only the sampling
/// calls are timed; the exact sampler's timing excludes the conjugate
/// update, which is shared with every other posterior functional.
pub fn compare_samplers(
    data: &BinaryDataset,
    xi: &[f64],
    omega: &SymMatrix,
    draws: usize,
    burn_in: usize,
    seed: u64,
    orthant: &OrthantConfig,
) -> sunprobit_core::Result<Comparison> {
    let fit = fit_gaussian_prior_with(data, xi, omega, orthant)?;
    let closed = posterior_mean_with(&fit, &MeanConfig { orthant: *orthant, ..MeanConfig::default() })?;

    let start = Instant::now();
    let batch = sample_posterior(&fit, draws, seed)?;
    let exact_secs = start.elapsed().as_secs_f64();
    let exact_ess: Vec<f64> = (0..batch.draws.cols()).map(|j| effective_sample_size(&batch.draws.col(j)).0).collect();

    let start = Instant::now();
    let chain = gibbs_albert_chib(data, xi, omega, draws, burn_in, seed)?;
    let gibbs_secs = start.elapsed().as_secs_f64();

    let exact = report(&batch.draws, exact_ess, exact_secs, &closed.mean);
    let gibbs = report(&chain.draws, chain.ess, gibbs_secs, &closed.mean);
    let p = closed.mean.len();
    let agree = (0..p)
        .filter(|&j| {
            let se = exact.std_error[j].hypot(gibbs.std_error[j]);
            (exact.posterior_mean[j] - gibbs.posterior_mean[j]).abs() <= 4.0 * se
        })
        .count();
    Ok(Comparison {
        n: data.len(),
        p,
        seed,
        burn_in,
        closed_form_mean: closed.mean,
        closed_form_rel_err: closed.rel_error,
        exact,
        gibbs,
        agreement_4se: if p == 0 { 1.0 } else { agree as f64 / p as f64 },
    })
}

fn report(draws: &Matrix, ess: Vec<f64>, seconds: f64, reference: &[f64]) -> SamplerReport {
    let r = draws.rows();
    let mut mean = Vec::with_capacity(draws.cols());
    let mut se = Vec::with_capacity(draws.cols());
    for (j, e) in ess.iter().enumerate() {
        let col = draws.col(j);
        let m = col.iter().sum::<f64>() / r as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (r.max(2) - 1) as f64;
        mean.push(m);
        se.push((var / e).sqrt());
    }
    let summary = EssSummary::of(&ess);
    SamplerReport {
        draws: r,
        seconds,
        samples_per_sec: r as f64 / seconds,
        seconds_per_effective_sample: seconds / summary.median,
        discrepancy: mean.iter().zip(reference).map(|(a, b)| a - b).collect(),
        posterior_mean: mean,
        std_error: se,
        ess_summary: summary,
        ess,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coordinate_means_agree_with_closed_form() {
        let data = BinaryDataset::new(vec![1], Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let c = compare_samplers(&data, &[0.0], &SymMatrix::identity(1), 20_000, 1_000, 5, &OrthantConfig::default())
            .unwrap();
        let target = 1.0 / std::f64::consts::PI.sqrt();
        assert!((c.closed_form_mean[0] - target).abs() < 1e-12);
        for s in [&c.exact, &c.gibbs] {
            assert!((s.posterior_mean[0] - target).abs() < 4.0 * s.std_error[0], "{s:?}");
        }
        assert!((c.exact.ess[0] / 20_000.0 - 1.0).abs() < 0.15);
        let json = serde_json::to_string(&c).unwrap();
        let back: Comparison = serde_json::from_str(&json).unwrap();
        assert_eq!(back.exact.ess, c.exact.ess);
        assert_eq!(back.gibbs.posterior_mean, c.gibbs.posterior_mean);
    }
}
