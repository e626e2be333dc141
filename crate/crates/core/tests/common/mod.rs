//! Oracles shared by the integration tests: quadrature, goodness-of-fit
//! statistics and random instance generators.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sunprobit_core::sun::SunDensity;
use sunprobit_core::{BinaryDataset, Matrix, SunParams, SymMatrix};

pub type TestRng = ChaCha20Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                x[i] = z;
                break;
            }
        }
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on [a, b].
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// One-sample Kolmogorov–Smirnov statistic.
pub fn ks_one_sample(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0, |d: f64, (i, &v)| {
        let f = cdf(v);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic KS critical value at level 0.01 for sample sizes `n`, `m`
/// (`m = None` for the one-sample test).
pub fn ks_critical_01(n: usize, m: Option<usize>) -> f64 {
    let c = 1.627_624;
    match m {
        None => c / (n as f64).sqrt(),
        Some(m) => c * ((n + m) as f64 / (n * m) as f64).sqrt(),
    }
}

pub fn normal_vec(g: &mut TestRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| g.sample(StandardNormal)).collect()
}

/// Random correlation matrix of dimension `d` with bounded conditioning.
pub fn random_correlation(g: &mut TestRng, d: usize) -> Matrix {
    let a = Matrix::from_fn(d, d + 2, |_, _| g.sample(StandardNormal));
    let c = a.matmul(&a.transpose()).unwrap();
    let c = Matrix::from_fn(d, d, |i, j| c[(i, j)] + if i == j { 0.3 * (d + 2) as f64 } else { 0.0 });
    Matrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt() })
}

pub fn random_spd(g: &mut TestRng, d: usize, scale: f64) -> SymMatrix {
    let corr = random_correlation(g, d);
    let sd: Vec<f64> = (0..d).map(|_| scale * g.random_range(0.6..1.6)).collect();
    SymMatrix::symmetrized(Matrix::from_fn(d, d, |i, j| sd[i] * corr[(i, j)] * sd[j]))
}

/// Random valid SUN with `p` observed and `n` latent coordinates.
pub fn random_sun(g: &mut TestRng, p: usize, n: usize) -> SunParams {
    let star = random_correlation(g, n + p);
    let gamma_mat = SymMatrix::symmetrized(Matrix::from_fn(n, n, |i, j| star[(i, j)]));
    let delta = Matrix::from_fn(p, n, |i, j| star[(n + i, j)]);
    let bar = Matrix::from_fn(p, p, |i, j| star[(n + i, n + j)]);
    let w: Vec<f64> = (0..p).map(|_| g.random_range(0.5..2.0)).collect();
    let omega = SymMatrix::symmetrized(Matrix::from_fn(p, p, |i, j| w[i] * bar[(i, j)] * w[j]));
    let xi: Vec<f64> = (0..p).map(|_| g.random_range(-1.0..1.0)).collect();
    let gamma: Vec<f64> = (0..n).map(|_| g.random_range(-1.0..1.0)).collect();
    SunParams::new(xi, omega, delta, gamma, gamma_mat).unwrap()
}

/// Tensor-product quadrature of `f` over the box `centre ± half`.
pub fn integrate_box(
    centre: &[f64],
    half: &[f64],
    panels: usize,
    order: usize,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let rules: Vec<Vec<(f64, f64)>> =
        centre.iter().zip(half).map(|(c, h)| composite_rule(c - h, c + h, panels, order)).collect();
    match rules.len() {
        1 => rules[0].iter().map(|&(x, w)| w * f(&[x])).sum(),
        2 => {
            let mut total = 0.0;
            for &(x, wx) in &rules[0] {
                for &(y, wy) in &rules[1] {
                    total += wx * wy * f(&[x, y]);
                }
            }
            total
        }
        d => panic!("quadrature in {d} dimensions not supported"),
    }
}

/// Integral of a SUN density (p ≤ 2) over `ξ ± 10ω`. Nodes whose density
/// bound is below `e⁻²⁰` are skipped; over a box of area at most
/// `400 ω₁ω₂` they carry less than `1e-6 ω₁ω₂` in total.
pub fn sun_density_integral(s: &SunParams) -> f64 {
    let dens = SunDensity::new(s).unwrap();
    let half: Vec<f64> = s.omega().iter().map(|w| 10.0 * w).collect();
    let (panels, order) = if s.dim() == 1 { (40, 20) } else { (24, 8) };
    integrate_box(s.xi(), &half, panels, order, |z| {
        if dens.log_density_bound(z).unwrap() < -20.0 {
            return 0.0;
        }
        dens.log_density(z).unwrap().exp()
    })
}

/// Seeded probit problem: data, prior mean and prior covariance.
pub struct ProbitInstance {
    pub data: BinaryDataset,
    pub xi: Vec<f64>,
    pub omega: SymMatrix,
}

pub fn random_probit(g: &mut TestRng, p: usize, n: usize) -> ProbitInstance {
    let x = Matrix::from_fn(n, p, |_, _| g.sample::<f64, _>(StandardNormal));
    let y = (0..n).map(|_| g.random_range(0..2u8)).collect();
    let xi = (0..p).map(|_| g.random_range(-0.5..0.5)).collect();
    let omega = random_spd(g, p, 1.0);
    ProbitInstance { data: BinaryDataset::new(y, x).unwrap(), xi, omega }
}

/// Unnormalised posterior `φ_p(β − ξ; Ω) Πᵢ Φ(dᵢᵀβ)` evaluated directly.
pub fn unnormalised_posterior(inst: &ProbitInstance, beta: &[f64]) -> f64 {
    let p = beta.len();
    let u: Vec<f64> = beta.iter().zip(&inst.xi).map(|(b, m)| b - m).collect();
    let (quad, det) = match p {
        1 => (u[0] * u[0] / inst.omega[(0, 0)], inst.omega[(0, 0)]),
        2 => {
            let (a, b, c) = (inst.omega[(0, 0)], inst.omega[(0, 1)], inst.omega[(1, 1)]);
            let det = a * c - b * b;
            ((c * u[0] * u[0] - 2.0 * b * u[0] * u[1] + a * u[1] * u[1]) / det, det)
        }
        _ => panic!("p = {p} not supported"),
    };
    let prior = (-0.5 * quad).exp() / ((2.0 * std::f64::consts::PI).powi(p as i32) * det).sqrt();
    let x = inst.data.x();
    let like: f64 = (0..inst.data.len())
        .map(|i| {
            let eta: f64 = x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
            let sign = if inst.data.y()[i] == 1 { 1.0 } else { -1.0 };
            normal_cdf(sign * eta)
        })
        .product();
    prior * like
}

/// Standard normal CDF from libm's `erfc`, independent of the library's own.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Normalising constant and mean of the posterior by tensor quadrature
/// over `ξ ± 10√Ω_jj`.
pub fn quadrature_posterior_mean(inst: &ProbitInstance) -> (f64, Vec<f64>) {
    let p = inst.xi.len();
    let half: Vec<f64> = (0..p).map(|j| 10.0 * inst.omega[(j, j)].sqrt()).collect();
    let (panels, order) = if p == 1 { (60, 20) } else { (40, 12) };
    let z = integrate_box(&inst.xi, &half, panels, order, |b| unnormalised_posterior(inst, b));
    let mean = (0..p)
        .map(|j| integrate_box(&inst.xi, &half, panels, order, |b| b[j] * unnormalised_posterior(inst, b)) / z)
        .collect();
    (z, mean)
}
