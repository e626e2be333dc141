//! Command-line arguments and the validated run configuration.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sunprobit_core::{Matrix, SymMatrix};

/// Prior scale used when no prior is given: `Ω = 16·I`.
pub const DEFAULT_PRIOR_SCALE: f64 = 16.0;
pub const DEFAULT_ACCURACY: f64 = 1e-4;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// The benchmark's closed-form reference mean needs `n + 1` orthant
/// probabilities; 1e-3 keeps it cheap at desk-scale `n`.
pub const BENCH_ACCURACY: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "sunprobit", version, about = "Exact Bayesian probit regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Posterior parameters, means, credible intervals and log evidence.
    Fit(CommonArgs),
    /// Write i.i.d. posterior draws as CSV.
    Sample(CommonArgs),
    /// Predictive probabilities for the rows of --new-data.
    Predict(CommonArgs),
    /// Log marginal likelihood of the full model or of each model in --models-file.
    Evidence(CommonArgs),
    /// Posterior model probabilities and Bayes factors for --models-file.
    Select(CommonArgs),
    /// Time the exact sampler against the Gibbs baseline.
    Bench(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Headered CSV with a binary response column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Prepend a column of ones.
    #[arg(long)]
    pub intercept: bool,
    /// Rescale covariates to mean 0 and standard deviation 0.5.
    #[arg(long)]
    pub standardize: bool,
    /// Prior covariance `scale · I`.
    #[arg(long, conflicts_with = "prior_cov_file", allow_negative_numbers = true)]
    pub prior_scale: Option<f64>,
    /// Prior mean: one value for every coefficient or a comma-separated vector.
    #[arg(long, allow_hyphen_values = true)]
    pub prior_mean: Option<String>,
    /// Headerless CSV holding the full prior covariance.
    #[arg(long)]
    pub prior_cov_file: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of posterior draws R.
    #[arg(long = "draws", value_name = "R")]
    pub draws: Option<usize>,
    /// Gibbs burn-in iterations (bench).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Target relative standard error of the orthant probabilities.
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Credible level.
    #[arg(long)]
    pub level: Option<f64>,
    /// Output path: the JSON report, or the draws CSV for `sample`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON list of candidate models (evidence, select).
    #[arg(long)]
    pub models_file: Option<PathBuf>,
    /// Covariate CSV to predict (predict).
    #[arg(long)]
    pub new_data: Option<PathBuf>,
    /// Generate `N,P` synthetic data instead of reading --data (bench).
    #[arg(long, value_name = "N,P")]
    pub synthetic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fit,
    Sample,
    Predict,
    Evidence,
    Select,
    Bench,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic { n: usize, p: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorMean {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorCov {
    Scale(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub mean: PriorMean,
    pub cov: PriorCov,
    /// Neither mean nor covariance was given.
    pub defaulted: bool,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { mean: PriorMean::Scalar(0.0), cov: PriorCov::Scale(DEFAULT_PRIOR_SCALE), defaulted: true }
    }
}

impl PriorSpec {
    /// `(ξ, Ω)` for `p` coefficients.
    pub fn resolve(&self, p: usize) -> Result<(Vec<f64>, SymMatrix), ConfigError> {
        let xi = match &self.mean {
            PriorMean::Scalar(v) => vec![*v; p],
            PriorMean::Vector(v) if v.len() == p => v.clone(),
            PriorMean::Vector(v) => {
                return Err(ConfigError(format!("prior mean has {} entries for {p} coefficients", v.len())))
            }
        };
        let omega = match &self.cov {
            PriorCov::Scale(s) => SymMatrix::from_diag(&vec![*s; p]),
            PriorCov::File(path) => {
                let m = read_matrix(path)?;
                if m.rows() != p {
                    return Err(ConfigError(format!(
                        "prior covariance is {}×{} for {p} coefficients",
                        m.rows(),
                        m.cols()
                    )));
                }
                SymMatrix::new(m).map_err(|e| ConfigError(format!("prior covariance: {e}")))?
            }
        };
        Ok((xi, omega))
    }
}

fn read_matrix(path: &Path) -> Result<Matrix, ConfigError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| ConfigError(format!("{}: row {}: `{f}` is not a number", path.display(), i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub data: DataSource,
    pub response: String,
    pub intercept: bool,
    pub standardize: bool,
    pub prior: PriorSpec,
    pub seed: u64,
    pub draws: usize,
    pub burn_in: usize,
    pub accuracy: f64,
    pub level: f64,
    pub out: Option<PathBuf>,
    pub models_file: Option<PathBuf>,
    pub new_data: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, ConfigError> {
        let (command, args) = match cli.command {
            CliCommand::Fit(a) => (Command::Fit, a),
            CliCommand::Sample(a) => (Command::Sample, a),
            CliCommand::Predict(a) => (Command::Predict, a),
            CliCommand::Evidence(a) => (Command::Evidence, a),
            CliCommand::Select(a) => (Command::Select, a),
            CliCommand::Bench(a) => (Command::Bench, a),
        };
        Self::new(command, args)
    }

    pub fn new(command: Command, a: CommonArgs) -> Result<Self, ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_owned()));
        let data = match (a.data, a.synthetic) {
            (Some(_), Some(_)) => return err("--data and --synthetic are exclusive"),
            (Some(path), None) => DataSource::Csv(path),
            (None, Some(spec)) if command == Command::Bench => {
                let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
                match parts.as_slice() {
                    [n, p] => match (n.parse(), p.parse()) {
                        (Ok(n), Ok(p)) if p > 0 => DataSource::Synthetic { n, p },
                        _ => return Err(ConfigError(format!("--synthetic `{spec}` is not N,P"))),
                    },
                    _ => return Err(ConfigError(format!("--synthetic `{spec}` is not N,P"))),
                }
            }
            (None, Some(_)) => return err("--synthetic is only available for bench"),
            (None, None) => return err("--data is required"),
        };
        let seed = match (a.seed, command) {
            (Some(s), _) => s,
            (None, Command::Sample | Command::Bench) => return err("--seed is required for sample and bench"),
            (None, _) => 0,
        };
        let draws = a.draws.unwrap_or(match command {
            Command::Bench => sunprobit_core::baseline::DEFAULT_DRAWS,
            _ => 10_000,
        });
        if draws == 0 {
            return err("--draws must be positive");
        }
        let accuracy = a.accuracy.unwrap_or(if command == Command::Bench { BENCH_ACCURACY } else { DEFAULT_ACCURACY });
        if !(accuracy > 0.0 && accuracy <= 0.1) {
            return Err(ConfigError(format!("--accuracy {accuracy} outside (0, 0.1]")));
        }
        let level = a.level.unwrap_or(DEFAULT_LEVEL);
        if !(level > 0.0 && level <= 1.0) {
            return Err(ConfigError(format!("--level {level} outside (0, 1]")));
        }
        if command == Command::Select && a.models_file.is_none() {
            return err("select needs --models-file");
        }
        if command == Command::Predict && a.new_data.is_none() {
            return err("predict needs --new-data");
        }
        let prior = parse_prior(a.prior_mean.as_deref(), a.prior_scale, a.prior_cov_file)?;
        Ok(Self {
            command,
            data,
            response: a.response,
            intercept: a.intercept,
            standardize: a.standardize,
            prior,
            seed,
            draws,
            burn_in: a.burn_in.unwrap_or(sunprobit_core::baseline::DEFAULT_BURN_IN),
            accuracy,
            level,
            out: a.out,
            models_file: a.models_file,
            new_data: a.new_data,
        })
    }
}

fn parse_prior(mean: Option<&str>, scale: Option<f64>, file: Option<PathBuf>) -> Result<PriorSpec, ConfigError> {
    let defaulted = mean.is_none() && scale.is_none() && file.is_none();
    let mean = match mean {
        None => PriorMean::Scalar(0.0),
        Some(s) => {
            let vals = s
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| ConfigError(format!("--prior-mean: `{v}` is not a number")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError("--prior-mean must be finite".into()));
            }
            if vals.len() == 1 {
                PriorMean::Scalar(vals[0])
            } else {
                PriorMean::Vector(vals)
            }
        }
    };
    let cov = match (scale, file) {
        (Some(s), _) if !(s > 0.0 && s.is_finite()) => {
            return Err(ConfigError(format!("--prior-scale {s} must be positive")))
        }
        (Some(s), _) => PriorCov::Scale(s),
        (None, Some(f)) => PriorCov::File(f),
        (None, None) => PriorCov::Scale(DEFAULT_PRIOR_SCALE),
    };
    Ok(PriorSpec { mean, cov, defaulted })
}
