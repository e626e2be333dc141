//! Command dispatch.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sunprobit_core::probit::{
    credible_interval_from_draws, fit_gaussian_prior_with, log_marginal_likelihood_with, model_posterior_with,
    posterior_mean_with, predict_label, sample_posterior, MeanConfig, PosteriorFit,
};
use sunprobit_core::{BinaryDataset, ModelSpec, OrthantConfig, SymMatrix};

use crate::bench::compare_samplers;
use crate::config::{Command, DataSource, RunConfig};
use crate::data::{ingest_covariates, ingest_csv, IngestError, IngestOptions};
use crate::report::*;
use crate::synth::synthetic_dataset;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Input(#[from] IngestError),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: io::Error },
    #[error(transparent)]
    Numerical(#[from] sunprobit_core::Error),
}

impl RunError {
    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<crate::config::ConfigError> for RunError {
    fn from(e: crate::config::ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

/// Diagnostic report for a numerical failure.
pub fn failure_report(config: &RunConfig, err: &RunError) -> FailureReport {
    let error = match err {
        RunError::Numerical(e) => match e {
            sunprobit_core::Error::NotPositiveDefinite { .. } => "not_positive_definite",
            sunprobit_core::Error::DimensionMismatch(_) => "dimension_mismatch",
            sunprobit_core::Error::IndexOutOfRange { .. } => "index_out_of_range",
            sunprobit_core::Error::InfeasibleRegion => "infeasible_region",
            sunprobit_core::Error::RankDeficient => "rank_deficient",
            sunprobit_core::Error::DegenerateConditional => "degenerate_conditional",
            sunprobit_core::Error::EmptyModelSet => "empty_model_set",
            sunprobit_core::Error::InvalidParams(_) => "invalid_params",
            sunprobit_core::Error::InvalidArgument(_) => "invalid_argument",
        },
        _ => "input",
    }
    .to_owned();
    FailureReport { header: Header::new(config.command, config.seed, config.accuracy), error, message: err.to_string() }
}

/// One entry of a `--models-file` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    #[serde(default)]
    pub name: Option<String>,
    /// Feature names, as they appear in the report's `feature_names`.
    pub columns: Vec<String>,
    #[serde(default)]
    pub prior_prob: Option<f64>,
    /// Overrides the prior covariance with `prior_scale · I`.
    #[serde(default)]
    pub prior_scale: Option<f64>,
    /// Overrides the prior mean with this value in every coordinate.
    #[serde(default)]
    pub prior_mean: Option<f64>,
}

struct Loaded {
    data: BinaryDataset,
    summary: DataSummary,
    true_beta: Option<Vec<f64>>,
}

/// Executes `config`, writing the report (or draws) to `--out` or `stdout`
/// and notices to `stderr`.
pub fn run(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), RunError> {
    let loaded = load(config)?;
    for w in &loaded.summary.warnings {
        notice(stderr, &format!("warning: {w}"));
    }
    let p = loaded.data.dim();
    let (xi, omega) = config.prior.resolve(p)?;
    if config.prior.defaulted {
        notice(stderr, &format!("note: no prior given; using beta ~ N(0, {}·I)", crate::config::DEFAULT_PRIOR_SCALE));
    }
    let orthant = OrthantConfig::default().with_accuracy(config.accuracy).with_seed(config.seed);
    let header = Header::new(config.command, config.seed, config.accuracy);
    match config.command {
        Command::Fit => {
            let fit = fit_gaussian_prior_with(&loaded.data, &xi, &omega, &orthant)?;
            let mean = posterior_mean_with(&fit, &MeanConfig { orthant, mc_draws: config.draws, seed: config.seed })?;
            let draws = sample_posterior(&fit, config.draws, config.seed)?.draws;
            let (ci_lo, ci_hi) = (0..p)
                .map(|j| credible_interval_from_draws(&draws, j, config.level))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip();
            let rel_err = BTreeMap::from([
                ("log_evidence".to_owned(), fit.evidence_rel_error),
                ("posterior_mean".to_owned(), mean.rel_error),
            ]);
            let report = FitReport {
                header,
                level: config.level,
                data: loaded.summary,
                prior: PriorReport { xi, omega: sym_rows(&omega), default: config.prior.defaulted },
                posterior: SunReport::from(&fit.posterior),
                posterior_mean: mean.mean,
                ci_lo,
                ci_hi,
                ci_draws: config.draws,
                log_evidence: fit.log_evidence,
                rel_err,
            };
            emit(config.out.as_deref(), stdout, &report)
        }
        Command::Sample => {
            let fit = fit_gaussian_prior_with(&loaded.data, &xi, &omega, &orthant)?;
            let batch = sample_posterior(&fit, config.draws, config.seed)?;
            let names = &loaded.summary.feature_names;
            match &config.out {
                Some(path) => {
                    let file = File::create(path).map_err(|source| output_error(path, source))?;
                    write_draws(BufWriter::new(file), names, &batch.draws)
                        .map_err(|source| output_error(path, source))?;
                    let report = SampleReport {
                        header,
                        data: loaded.summary.clone(),
                        draws: config.draws,
                        draws_file: path.display().to_string(),
                        acceptance_rate: batch.acceptance_rate,
                        low_acceptance: batch.low_acceptance,
                    };
                    emit(None, stdout, &report)
                }
                None => write_draws(stdout, names, &batch.draws)
                    .map_err(|source| output_error(Path::new("<stdout>"), source)),
            }
        }
        Command::Predict => {
            let fit = fit_gaussian_prior_with(&loaded.data, &xi, &omega, &orthant)?;
            let path = config.new_data.as_deref().expect("validated");
            let (names, x) =
                ingest_covariates(path, &config.response, config.intercept, loaded.summary.scaling.as_deref())?;
            if names != loaded.summary.feature_names {
                return Err(RunError::Config(format!(
                    "{} has columns {names:?}, the model was fitted on {:?}",
                    path.display(),
                    loaded.summary.feature_names
                )));
            }
            let predictions =
                (0..x.rows()).map(|i| predict_row(&fit, i, x.row(i), &orthant)).collect::<Result<_, _>>()?;
            let report = PredictReport { header, data: loaded.summary, log_evidence: fit.log_evidence, predictions };
            emit(config.out.as_deref(), stdout, &report)
        }
        Command::Evidence => {
            let (entries, specs) = match &config.models_file {
                Some(path) => models_from_file(path, &loaded.summary.feature_names, &xi, &omega)?,
                None => {
                    let full = ModelSpec::new((0..p).collect(), xi.clone(), omega.clone(), 1.0)?;
                    (vec![("full".to_owned(), loaded.summary.feature_names.clone())], vec![full])
                }
            };
            let models = entries
                .into_iter()
                .zip(&specs)
                .map(|((name, columns), spec)| {
                    let est = log_marginal_likelihood_with(spec, &loaded.data, &orthant)?;
                    Ok(ModelReport {
                        name,
                        columns,
                        prior_prob: spec.prior_prob,
                        log_evidence: est.log_value,
                        rel_err: est.rel_error,
                        posterior_prob: None,
                    })
                })
                .collect::<Result<_, RunError>>()?;
            emit(config.out.as_deref(), stdout, &EvidenceReport { header, data: loaded.summary, models })
        }
        Command::Select => {
            let path = config.models_file.as_deref().expect("validated");
            let (entries, specs) = models_from_file(path, &loaded.summary.feature_names, &xi, &omega)?;
            let post = model_posterior_with(&specs, &loaded.data, &orthant)?;
            let best =
                (0..specs.len()).max_by(|&a, &b| post.probabilities[a].total_cmp(&post.probabilities[b])).unwrap_or(0);
            let best = entries[best].0.clone();
            let models = entries
                .into_iter()
                .enumerate()
                .map(|(k, (name, columns))| ModelReport {
                    name,
                    columns,
                    prior_prob: specs[k].prior_prob,
                    log_evidence: post.log_evidence[k],
                    rel_err: post.rel_errors[k],
                    posterior_prob: Some(post.probabilities[k]),
                })
                .collect();
            let report = SelectReport {
                header,
                data: loaded.summary,
                models,
                log_bayes_factors: rows(&post.log_bayes_factors),
                best,
            };
            emit(config.out.as_deref(), stdout, &report)
        }
        Command::Bench => {
            let comparison =
                compare_samplers(&loaded.data, &xi, &omega, config.draws, config.burn_in, config.seed, &orthant)?;
            let report = BenchReport {
                header,
                data: loaded.summary,
                true_beta: loaded.true_beta,
                samples_per_sec: BTreeMap::from([
                    ("exact".to_owned(), comparison.exact.samples_per_sec),
                    ("gibbs".to_owned(), comparison.gibbs.samples_per_sec),
                ]),
                ess: BTreeMap::from([
                    ("exact".to_owned(), comparison.exact.ess_summary.clone()),
                    ("gibbs".to_owned(), comparison.gibbs.ess_summary.clone()),
                ]),
                comparison,
            };
            emit(config.out.as_deref(), stdout, &report)
        }
    }
}

fn load(config: &RunConfig) -> Result<Loaded, RunError> {
    match &config.data {
        DataSource::Csv(path) => {
            let opts = IngestOptions { intercept: config.intercept, standardize: config.standardize };
            let ing = ingest_csv(path, &config.response, &opts)?;
            let summary = DataSummary {
                n: ing.dataset.len(),
                p: ing.dataset.dim(),
                feature_names: ing.feature_names,
                scaling: ing.scaling,
                warnings: ing.warnings,
            };
            Ok(Loaded { data: ing.dataset, summary, true_beta: None })
        }
        DataSource::Synthetic { n, p } => {
            let (data, beta) = synthetic_dataset(*n, *p, config.seed);
            let summary = DataSummary {
                n: *n,
                p: *p,
                feature_names: data.feature_names().map(<[String]>::to_vec).unwrap_or_default(),
                scaling: None,
                warnings: Vec::new(),
            };
            Ok(Loaded { data, summary, true_beta: Some(beta) })
        }
    }
}

fn predict_row(fit: &PosteriorFit, row: usize, x: &[f64], orthant: &OrthantConfig) -> Result<PredictionRow, RunError> {
    let one = predict_label(fit, x, 1, orthant)?;
    let zero = predict_label(fit, x, 0, orthant)?;
    Ok(PredictionRow {
        row: row + 1,
        prob: one.prob,
        prob_y0: zero.prob,
        rel_err: one.rel_error.max(zero.rel_error),
        uncertain: one.uncertain || zero.uncertain,
    })
}

type Models = (Vec<(String, Vec<String>)>, Vec<ModelSpec>);

/// Reads a JSON list of [`ModelEntry`]. Priors default to the matching
/// sub-vector and sub-block of the command-line prior; models without a
/// `prior_prob` share the probability left by the others equally.
fn models_from_file(path: &Path, features: &[String], xi: &[f64], omega: &SymMatrix) -> Result<Models, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let list: Vec<ModelEntry> =
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    if list.is_empty() {
        return Err(RunError::Config(format!("{}: no models", path.display())));
    }
    let given: f64 = list.iter().filter_map(|m| m.prior_prob).sum();
    let unset = list.iter().filter(|m| m.prior_prob.is_none()).count();
    let share = if unset == 0 { 0.0 } else { (1.0 - given) / unset as f64 };
    if (unset == 0 && (given - 1.0).abs() > 1e-9) || (unset > 0 && share <= 0.0) {
        return Err(RunError::Config(format!("{}: prior_prob values must sum to 1 (given {given})", path.display())));
    }
    let mut entries = Vec::with_capacity(list.len());
    let mut specs = Vec::with_capacity(list.len());
    for (k, m) in list.into_iter().enumerate() {
        let name = m.name.unwrap_or_else(|| format!("model{}", k + 1));
        let cols = m
            .columns
            .iter()
            .map(|c| {
                features
                    .iter()
                    .position(|f| f == c)
                    .ok_or_else(|| RunError::Config(format!("model `{name}`: unknown column `{c}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sub_xi = match m.prior_mean {
            Some(v) => vec![v; cols.len()],
            None => cols.iter().map(|&c| xi[c]).collect(),
        };
        let sub_omega = match m.prior_scale {
            Some(s) if !(s > 0.0 && s.is_finite()) => {
                return Err(RunError::Config(format!("model `{name}`: prior_scale {s} must be positive")))
            }
            Some(s) => SymMatrix::from_diag(&vec![s; cols.len()]),
            None => SymMatrix::symmetrized(sunprobit_core::Matrix::from_fn(cols.len(), cols.len(), |a, b| {
                omega[(cols[a], cols[b])]
            })),
        };
        let prior_prob = m.prior_prob.unwrap_or(share);
        let spec = ModelSpec::new(cols, sub_xi, sub_omega, prior_prob)
            .map_err(|e| RunError::Config(format!("model `{name}`: {e}")))?;
        entries.push((name, m.columns));
        specs.push(spec);
    }
    Ok((entries, specs))
}

fn write_draws<W: Write>(w: W, names: &[String], draws: &sunprobit_core::Matrix) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(names)?;
    for i in 0..draws.rows() {
        out.write_record(draws.row(i).iter().map(|v| v.to_string()))?;
    }
    out.flush()
}

fn emit<T: Serialize>(out: Option<&Path>, stdout: &mut dyn Write, report: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialise");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| output_error(path, source)),
        None => stdout.write_all(text.as_bytes()).map_err(|source| output_error(Path::new("<stdout>"), source)),
    }
}

fn output_error(path: &Path, source: io::Error) -> RunError {
    RunError::Output { path: path.display().to_string(), source }
}

fn notice(stderr: &mut dyn Write, msg: &str) {
    let _ = writeln!(stderr, "{msg}");
}
