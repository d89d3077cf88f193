//! χ²₁ tail and quantile, Kolmogorov–Smirnov tests and empirical CDFs.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{exp, sqrt};

/// Upper tail `P(χ²₁ > x)`.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    libm::erfc(sqrt(x / 2.0))
}

/// Quantile of χ²₁ at probability `level`.
pub fn chi2_1_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level must lie in (0, 1)"));
    }
    // solve erfc(z) = 1 − level for z, then q = 2z²
    let target = 1.0 - level;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    let mut z = 1.0f64;
    for _ in 0..200 {
        let f = libm::erfc(z) - target;
        if f > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        // d/dz erfc = −2/√π e^{−z²}
        let d = -2.0 / sqrt(core::f64::consts::PI) * exp(-z * z);
        let next = z - f / d;
        z = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if (hi - lo) < 1e-15 * hi.max(1e-300) || f == 0.0 {
            break;
        }
    }
    Ok(2.0 * z * z)
}

/// Limiting Kolmogorov distribution tail `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = exp(-2.0 * kf * kf * lambda * lambda);
        s += sign * term;
        if term < 1e-300 {
            break;
        }
        sign = -sign;
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS statistic against Uniform(0, 1).
pub fn ks_statistic_uniform(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        let above = (i as f64 + 1.0) / n - x;
        let below = x - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(d)
}

/// Result of a KS test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size; the asymptotic p-value is rough below 35.
    pub n_eff: f64,
}

impl KsTest {
    pub fn small_sample(&self) -> bool {
        self.n_eff < 35.0
    }
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = sqrt(n_eff);
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// KS test of uniformity on `[0, 1]` with the asymptotic distribution.
pub fn ks_uniform(values: &[f64]) -> Result<KsTest> {
    let d = ks_statistic_uniform(values)?;
    let n = values.len() as f64;
    Ok(KsTest { statistic: d, p_value: ks_p(d, n), n_eff: n })
}

/// Two-sample KS test with the asymptotic distribution.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let n_eff = n * m / (n + m);
    Ok(KsTest { statistic: d, p_value: ks_p(d, n_eff), n_eff })
}

/// Empirical CDF evaluated at each sorted sample point.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i as f64 + 1.0) / n)).collect()
}
