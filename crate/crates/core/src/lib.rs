//! Exact Bayesian inference for probit regression built on the conjugacy
//! between Gaussian (or unified skew-normal) priors and the probit
//! likelihood.
//!
//! The crate is `no_std` (it needs `alloc`). Modules, bottom-up:
//!
//! * [`linalg`]: dense symmetric linear algebra.
//! * [`orthant`]: multivariate normal CDFs via tilted randomised QMC.
//! * [`truncnorm`]: exact truncated multivariate normal sampling.
//! * [`sun`]: the unified skew-normal distribution.
//! * [`probit`]: conjugate posterior updates, closed-form functionals and
//!   the i.i.d. posterior sampler.
//! * [`baseline`]: the data-augmentation Gibbs sampler and ESS diagnostics.
#![no_std]
// NaN-rejecting `!(x > 0.0)` checks and index loops over several arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

extern crate alloc;
#[cfg(any(test, feature = "parallel"))]
extern crate std;

pub mod baseline;
pub mod error;
pub mod linalg;
pub mod orthant;
pub mod probit;
pub mod qmc;
pub mod rng;
pub mod special;
pub mod sun;
pub mod tilting;
pub mod truncnorm;

pub use error::{Error, Result};
pub use linalg::{CholFactor, JitterPolicy, Matrix, SymMatrix};
pub use orthant::{phi_n, phi_n_batch, OrthantConfig, OrthantEstimate, OrthantProblem};
pub use probit::{BinaryDataset, ModelSpec, PosteriorFit};
pub use sun::SunParams;
pub use truncnorm::{sample_mvn, sample_tmvn, TruncNormSpec, TruncSampleBatch};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
