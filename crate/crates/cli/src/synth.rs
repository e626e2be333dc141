//! Seeded synthetic probit data.

use rand::Rng;
use rand_distr::StandardNormal;
use sunprobit_core::rng;
use sunprobit_core::special::cdf;
use sunprobit_core::{BinaryDataset, Matrix};

/// Number of leading covariates with a non-zero true coefficient.
pub const ACTIVE: usize = 5;

/// Synthetic data with an intercept column and `p − 1` covariates drawn
/// from `N(0, 0.5²)`. The first [`ACTIVE`] covariates have coefficients of
/// alternating sign and magnitude 2; the rest are zero. Returns the data and
/// the true coefficients.
pub fn synthetic_dataset(n: usize, p: usize, seed: u64) -> (BinaryDataset, Vec<f64>) {
    assert!(p >= 1, "at least one column");
    let mut g = rng::stream(seed, 0);
    let x = Matrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { 0.5 * g.sample::<f64, _>(StandardNormal) });
    let beta: Vec<f64> = (0..p)
        .map(|j| {
            if (1..=ACTIVE).contains(&j) {
                if j % 2 == 1 {
                    2.0
                } else {
                    -2.0
                }
            } else {
                0.0
            }
        })
        .collect();
    let y = (0..n)
        .map(|i| {
            let eta: f64 = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
            u8::from(g.random::<f64>() < cdf(eta))
        })
        .collect();
    let names = (0..p).map(|j| if j == 0 { crate::data::INTERCEPT.to_owned() } else { format!("x{j}") }).collect();
    let data = BinaryDataset::new(y, x).expect("shapes agree").with_feature_names(names).expect("one name per column");
    (data, beta)
}
