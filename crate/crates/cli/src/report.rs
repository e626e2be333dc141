//! JSON report types. Every report carries the command, library version,
//! seed and orthant accuracy so that a run can be repeated exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sunprobit_core::{Matrix, SunParams, SymMatrix};

use crate::bench::{Comparison, EssSummary};
use crate::config::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub accuracy: f64,
}

impl Header {
    pub fn new(command: Command, seed: u64, accuracy: f64) -> Self {
        let command =
            serde_json::to_value(command).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        Self { command, version: sunprobit_core::VERSION.to_owned(), seed, accuracy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub p: usize,
    pub feature_names: Vec<String>,
    /// Training means and standard deviations of standardised covariates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scaling: Option<Vec<(f64, f64)>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorReport {
    pub xi: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub default: bool,
}

/// Parameters `(ξ, Ω, Δ, γ, Γ)` of a SUN posterior, matrices as row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SunReport {
    pub xi: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub gamma_mat: Vec<Vec<f64>>,
}

impl From<&SunParams> for SunReport {
    fn from(s: &SunParams) -> Self {
        Self {
            xi: s.xi().to_vec(),
            omega: rows(s.omega_mat().matrix()),
            delta: rows(s.delta()),
            gamma: s.gamma().to_vec(),
            gamma_mat: rows(s.gamma_mat().matrix()),
        }
    }
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn sym_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    rows(m.matrix())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub header: Header,
    pub level: f64,
    pub data: DataSummary,
    pub prior: PriorReport,
    pub posterior: SunReport,
    pub posterior_mean: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    /// Number of posterior draws behind the credible intervals.
    pub ci_draws: usize,
    pub log_evidence: f64,
    /// Achieved relative errors of the orthant estimates, by quantity.
    pub rel_err: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    #[serde(flatten)]
    pub header: Header,
    pub data: DataSummary,
    pub draws: usize,
    pub draws_file: String,
    pub acceptance_rate: f64,
    pub low_acceptance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub row: usize,
    /// `P(y = 1 | x, data)`.
    pub prob: f64,
    /// `P(y = 0 | x, data)`, computed separately.
    pub prob_y0: f64,
    pub rel_err: f64,
    pub uncertain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    #[serde(flatten)]
    pub header: Header,
    pub data: DataSummary,
    pub log_evidence: f64,
    pub predictions: Vec<PredictionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub columns: Vec<String>,
    pub prior_prob: f64,
    pub log_evidence: f64,
    pub rel_err: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub posterior_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    #[serde(flatten)]
    pub header: Header,
    pub data: DataSummary,
    pub models: Vec<ModelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    #[serde(flatten)]
    pub header: Header,
    pub data: DataSummary,
    pub models: Vec<ModelReport>,
    /// `log_bayes_factors[i][j] = log p(y | Mᵢ) − log p(y | Mⱼ)`.
    pub log_bayes_factors: Vec<Vec<f64>>,
    pub best: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    #[serde(flatten)]
    pub header: Header,
    pub data: DataSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_beta: Option<Vec<f64>>,
    pub samples_per_sec: BTreeMap<String, f64>,
    pub ess: BTreeMap<String, EssSummary>,
    pub comparison: Comparison,
}

/// Written to stdout when a run fails numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    #[serde(flatten)]
    pub header: Header,
    pub error: String,
    pub message: String,
}
