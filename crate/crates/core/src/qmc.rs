//! Randomly shifted Richtmyer lattice: point `j` has coordinates
//! `frac(j·√p_k + shift_k)` for the first primes `p_k`, folded by the
//! baker's (tent) transform `|2x − 1|` to periodise the integrand.

use alloc::vec::Vec;

/// First `count` primes by trial division (dimensions stay in the hundreds).
pub fn primes(count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(count);
    let mut cand = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= cand).all(|&p| cand % p != 0) {
            out.push(cand);
        }
        cand += 1;
    }
    out
}

/// Generator vector `√p_k` (fractional parts) for a `dim`-dimensional rule.
#[derive(Debug, Clone)]
pub struct Richtmyer {
    alpha: Vec<f64>,
}

impl Richtmyer {
    pub fn new(dim: usize) -> Self {
        let alpha = primes(dim)
            .into_iter()
            .map(|p| {
                let r = libm::sqrt(p as f64);
                r - libm::floor(r)
            })
            .collect();
        Self { alpha }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Writes point `j` (1-based) shifted by `shift` into `out`, folded into
    /// the open interval (0, 1).
    pub fn point(&self, j: u64, shift: &[f64], out: &mut [f64]) {
        let jf = j as f64;
        for ((o, &a), &s) in out.iter_mut().zip(&self.alpha).zip(shift) {
            let x = frac(frac(jf * a) + s);
            let t = libm::fabs(2.0 * x - 1.0);
            *o = t.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        }
    }
}

#[inline]
fn frac(x: f64) -> f64 {
    x - libm::floor(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_primes() {
        assert_eq!(primes(8), [2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(*primes(500).last().unwrap(), 3571);
    }

    #[test]
    fn lattice_integrates_smooth_function() {
        // ∫ over [0,1]^3 of Π (1 + 0.5 cos 2πx) = 1
        let rule = Richtmyer::new(3);
        let shift = [0.3, 0.7, 0.1];
        let n = 4096;
        let mut pt = [0.0; 3];
        let mut sum = 0.0;
        for j in 1..=n {
            rule.point(j, &shift, &mut pt);
            sum += pt.iter().map(|x| 1.0 + 0.5 * libm::cos(2.0 * core::f64::consts::PI * x)).product::<f64>();
        }
        assert!((sum / n as f64 - 1.0).abs() < 1e-3);
    }
}
