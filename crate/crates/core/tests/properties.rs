//! Randomised invariants of the linear algebra, orthant, sampler and
//! probit layers.

mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use sunprobit_core::linalg::solve_spd;
use sunprobit_core::probit::{fit_gaussian_prior, log_marginal_likelihood, predict_prob, predict_prob_y0};
use sunprobit_core::{phi_n, sample_tmvn, BinaryDataset, Matrix, ModelSpec, OrthantProblem, SymMatrix, TruncNormSpec};

fn correlation(seed: u64, d: usize) -> SymMatrix {
    SymMatrix::symmetrized(random_correlation(&mut rng(seed), d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn solve_spd_residual(n in 1usize..=50, seed in any::<u64>()) {
        let mut g = rng(seed);
        let m = random_spd(&mut g, n, 1.0);
        let rhs = Matrix::from_vec(n, 1, normal_vec(&mut g, n)).unwrap();
        let x = solve_spd(&m, &rhs).unwrap();
        let r = m.matrix().matmul(&x).unwrap().sub(&rhs).unwrap();
        prop_assert!(r.max_abs() / rhs.max_abs() < 1e-8);
    }

    #[test]
    fn orthant_is_monotone(d in 2usize..=6, seed in any::<u64>(), k in 0usize..6, step in 0.01f64..2.0) {
        let cov = correlation(seed, d);
        let upper: Vec<f64> = normal_vec(&mut rng(seed ^ 1), d);
        let mut raised = upper.clone();
        raised[k % d] += step;
        let a = phi_n(&OrthantProblem::new(upper, cov.clone()).unwrap()).unwrap();
        let b = phi_n(&OrthantProblem::new(raised, cov).unwrap()).unwrap();
        let slack = 3.0 * (a.rel_error * a.value() + b.rel_error * b.value());
        prop_assert!(b.value() >= a.value() - slack, "{} -> {}", a.value(), b.value());
    }

    #[test]
    fn truncated_draws_respect_bounds(d in 1usize..=5, seed in any::<u64>(), count in 1usize..3000) {
        let cov = correlation(seed, d);
        let lower: Vec<f64> = normal_vec(&mut rng(seed ^ 2), d);
        let batch = sample_tmvn(&TruncNormSpec::new(cov, lower.clone()).unwrap(), count, seed).unwrap();
        prop_assert_eq!(batch.draws.rows(), count);
        for i in 0..count {
            prop_assert!(batch.draws.row(i).iter().zip(&lower).all(|(x, l)| x >= l));
        }
        let accepted = (batch.acceptance_rate * batch.proposals_used as f64).round() as usize;
        prop_assert!(accepted >= count);
    }

    #[test]
    fn label_flip_leaves_posterior_unchanged(p in 1usize..=4, n in 0usize..=8, seed in any::<u64>()) {
        let inst = random_probit(&mut rng(seed), p, n);
        let flipped_y = inst.data.y().iter().map(|y| 1 - y).collect();
        let flipped = BinaryDataset::new(flipped_y, inst.data.x().scaled(-1.0)).unwrap();
        let a = fit_gaussian_prior(&inst.data, &inst.xi, &inst.omega).unwrap();
        let b = fit_gaussian_prior(&flipped, &inst.xi, &inst.omega).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn posterior_latent_correlation_has_unit_diagonal(p in 1usize..=6, n in 1usize..=12, seed in any::<u64>()) {
        let inst = random_probit(&mut rng(seed), p, n);
        let fit = fit_gaussian_prior(&inst.data, &inst.xi, &inst.omega).unwrap();
        let gm = fit.posterior.gamma_mat();
        prop_assert!((0..n).all(|i| gm[(i, i)] == 1.0));
    }

    #[test]
    fn predictions_are_complementary(p in 1usize..=3, n in 0usize..=4, seed in any::<u64>()) {
        let mut g = rng(seed);
        let inst = random_probit(&mut g, p, n);
        let fit = fit_gaussian_prior(&inst.data, &inst.xi, &inst.omega).unwrap();
        let x: Vec<f64> = (0..p).map(|_| g.random_range(-2.0..2.0)).collect();
        let one = predict_prob(&fit, &x).unwrap();
        let zero = predict_prob_y0(&fit, &x).unwrap();
        prop_assert!((0.0..=1.0).contains(&one.prob) && (0.0..=1.0).contains(&zero.prob));
        let tol = 4.0 * (one.rel_error * one.prob + zero.rel_error * zero.prob) + 1e-12;
        prop_assert!((one.prob + zero.prob - 1.0).abs() <= tol, "{} + {}", one.prob, zero.prob);
    }

    #[test]
    fn fit_evidence_equals_marginal_likelihood(p in 1usize..=3, n in 1usize..=10, seed in any::<u64>()) {
        let inst = random_probit(&mut rng(seed), p, n);
        let fit = fit_gaussian_prior(&inst.data, &inst.xi, &inst.omega).unwrap();
        let model = ModelSpec::new((0..p).collect(), inst.xi.clone(), inst.omega.clone(), 1.0).unwrap();
        let lml = log_marginal_likelihood(&model, &inst.data).unwrap().log_value;
        prop_assert!((fit.log_evidence - lml).exp_m1().abs() < 1e-12);
    }
}

/// Plain Monte Carlo with an independent Cholesky factor.
fn monte_carlo_orthant(upper: &[f64], cov: &SymMatrix, draws: usize, seed: u64) -> (f64, f64) {
    let d = upper.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = cov[(i, j)] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
        }
    }
    let mut g = rng(seed);
    let mut hits = 0usize;
    let mut z = vec![0.0; d];
    for _ in 0..draws {
        z.iter_mut().for_each(|v| *v = g.sample(rand_distr::StandardNormal));
        let inside = (0..d).all(|i| (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>() <= upper[i]);
        hits += usize::from(inside);
    }
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

#[test]
fn orthant_agrees_with_plain_monte_carlo() {
    for seed in 0..6u64 {
        let d = 1 + seed as usize;
        let cov = correlation(seed + 3000, d);
        let upper: Vec<f64> = normal_vec(&mut rng(seed + 3100), d).iter().map(|v| v + 0.5).collect();
        let est = phi_n(&OrthantProblem::new(upper.clone(), cov.clone()).unwrap()).unwrap();
        let (mc, se) = monte_carlo_orthant(&upper, &cov, 1_000_000, seed);
        let combined = (se * se + (est.rel_error * est.value()).powi(2)).sqrt();
        assert!((est.value() - mc).abs() < 4.0 * combined, "d={d}: {} vs {mc} ± {se}", est.value());
    }
}
