//! Locally weighted polynomial regression of noisy log-likelihoods over the
//! unit cube (log-parameter coordinates).
//!
//! At each query point `z₀` a polynomial in `z − z₀` is fitted by weighted
//! least squares with Gaussian weights `exp(−Σₖ (zₖ − z₀ₖ)² / 2hₖ²)` and a
//! small ridge on every non-constant coefficient; the prediction is the
//! fitted intercept. Bandwidths may differ per axis, since a likelihood
//! surface is often flat along one parameter and sharp along another.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, solve_dense, sqrt};

/// How the kernel bandwidth (and polynomial degree) is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Quadratic fit, `h = multiplier ×` mean nearest-neighbour distance.
    NearestNeighbor { multiplier: f64 },
    /// Leave-one-point-out cross-validation: a common multiplier and the
    /// degree (0–2) from a grid, then per-axis multipliers refined one axis
    /// at a time.
    CrossValidated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub bandwidth: BandwidthRule,
    pub ridge: f64,
    /// Observations more than this many log units below the best one are
    /// raised to that level before fitting; `None` keeps them as they are.
    pub censor_below: Option<f64>,
    /// Cross-validation error is averaged over observations within this many
    /// log units of the best one; all observations still enter the fits.
    pub cv_within: Option<f64>,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self { bandwidth: BandwidthRule::CrossValidated, ridge: 1e-8, censor_below: Some(25.0), cv_within: Some(10.0) }
    }
}

impl SmootherConfig {
    /// Apply the censoring rule in place.
    pub fn censor(&self, ys: &mut [f64]) {
        if let Some(c) = self.censor_below {
            let top = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for y in ys {
                *y = y.max(top - c);
            }
        }
    }
}

/// Multipliers of the nearest-neighbour scale tried by cross-validation.
pub const CV_MULTIPLIERS: [f64; 8] = [1.5, 2.0, 3.0, 4.0, 6.0, 10.0, 20.0, 50.0];

/// Factors applied to one axis' bandwidth during the per-axis refinement.
const AXIS_FACTORS: [f64; 6] = [0.35, 0.5, 0.7, 1.4, 2.0, 4.0];

/// Sweeps over the three axes during the per-axis refinement.
const AXIS_SWEEPS: usize = 2;

/// A fitted smoother.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPolynomial {
    zs: Vec<[f64; 3]>,
    ys: Vec<f64>,
    /// Per-axis kernel bandwidth in unit coordinates.
    pub bandwidth: [f64; 3],
    pub degree: usize,
    pub ridge: f64,
    /// Cross-validated mean squared prediction error, when computed.
    pub cv_error: Option<f64>,
}

fn n_features(degree: usize) -> usize {
    match degree {
        0 => 1,
        1 => 4,
        _ => 10,
    }
}

#[inline]
fn features(v: [f64; 3], degree: usize, out: &mut [f64; 10]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = v[0];
        out[2] = v[1];
        out[3] = v[2];
    }
    if degree >= 2 {
        out[4] = v[0] * v[0];
        out[5] = v[1] * v[1];
        out[6] = v[2] * v[2];
        out[7] = v[0] * v[1];
        out[8] = v[0] * v[2];
        out[9] = v[1] * v[2];
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])
}

/// `Σₖ (aₖ − bₖ)² / 2hₖ²`.
#[inline]
fn scaled_dist2(a: &[f64; 3], b: &[f64; 3], inv: &[f64; 3]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) * inv[0] + (a[1] - b[1]) * (a[1] - b[1]) * inv[1] + (a[2] - b[2]) * (a[2] - b[2]) * inv[2]
}

/// Mean distance from each distinct point to its nearest distinct neighbour.
pub fn mean_nn_distance(zs: &[[f64; 3]]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, a) in zs.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, b) in zs.iter().enumerate() {
            let d = dist2(a, b);
            if i != j && d > 0.0 && d < best {
                best = d;
            }
        }
        if best.is_finite() {
            total += sqrt(best);
            count += 1;
        }
    }
    if count == 0 {
        1.0
    } else {
        total / count as f64
    }
}

/// Largest accepted prediction-variance factor of a local fit, in units of
/// the variance of one observation. A plain weighted mean never exceeds 1.
pub const MAX_VARIANCE_FACTOR: f64 = 1.0;

/// Weighted polynomial fit at `z0`, skipping observations whose point
/// equals `skip`. `None` when the normal equations are singular or the fit
/// would extrapolate with a variance factor above [`MAX_VARIANCE_FACTOR`].
fn local_fit(
    zs: &[[f64; 3]],
    ys: &[f64],
    skip: Option<&[f64; 3]>,
    z0: &[f64; 3],
    h: &[f64; 3],
    degree: usize,
    ridge: f64,
) -> Option<f64> {
    let p = n_features(degree);
    let inv = [1.0 / (2.0 * h[0] * h[0]), 1.0 / (2.0 * h[1] * h[1]), 1.0 / (2.0 * h[2] * h[2])];
    let dmin = zs
        .iter()
        .filter(|z| skip.map_or(true, |s| s != *z))
        .map(|z| scaled_dist2(z, z0, &inv))
        .fold(f64::INFINITY, f64::min);
    if !dmin.is_finite() {
        return None;
    }
    let mut rows: Vec<(f64, [f64; 10])> = Vec::new();
    let mut a = [0.0f64; 100];
    let mut b = [0.0f64; 10];
    for (z, &y) in zs.iter().zip(ys) {
        if skip.is_some_and(|s| s == z) {
            continue;
        }
        let w = exp(-(scaled_dist2(z, z0, &inv) - dmin));
        if w < 1e-300 {
            continue;
        }
        let mut f = [0.0f64; 10];
        features([z[0] - z0[0], z[1] - z0[1], z[2] - z0[2]], degree, &mut f);
        for r in 0..p {
            let wf = w * f[r];
            b[r] += wf * y;
            for c in r..p {
                a[r * p + c] += wf * f[c];
            }
        }
        rows.push((w, f));
    }
    for r in 0..p {
        for c in 0..r {
            a[r * p + c] = a[c * p + r];
        }
        if r > 0 {
            a[r * p + r] += ridge;
        }
    }
    // the intercept is l·y with l_i = w_i f_iᵀ A⁻¹ e₀; its variance factor is Σ l_i²
    let mut a2 = a;
    let mut e0 = [0.0f64; 10];
    e0[0] = 1.0;
    solve_dense(&mut a[..p * p], &mut b[..p], p, 1e-13)?;
    solve_dense(&mut a2[..p * p], &mut e0[..p], p, 1e-13)?;
    let var: f64 = rows
        .iter()
        .map(|(w, f)| {
            let l = w * f[..p].iter().zip(&e0[..p]).map(|(x, y)| x * y).sum::<f64>();
            l * l
        })
        .sum();
    let v = b[0];
    (v.is_finite() && var <= MAX_VARIANCE_FACTOR).then_some(v)
}

/// [`local_fit`] at `degree`, falling back to lower degrees.
fn fit_down_to_constant(
    zs: &[[f64; 3]],
    ys: &[f64],
    skip: Option<&[f64; 3]>,
    z0: &[f64; 3],
    h: &[f64; 3],
    degree: usize,
    ridge: f64,
) -> Option<f64> {
    (0..=degree).rev().find_map(|d| local_fit(zs, ys, skip, z0, h, d, ridge))
}

/// Mean squared leave-one-point-out prediction error over the points
/// flagged in `scored`; duplicates of the left-out point are left out with
/// it. `None` when some fit fails.
fn cv_error(zs: &[[f64; 3]], ys: &[f64], scored: &[bool], h: &[f64; 3], degree: usize, ridge: f64) -> Option<f64> {
    let mut err = 0.0;
    let mut n = 0usize;
    for ((z, y), _) in zs.iter().zip(ys).zip(scored).filter(|(_, s)| **s) {
        let pred = fit_down_to_constant(zs, ys, Some(z), z, h, degree, ridge)?;
        err += (pred - y) * (pred - y);
        n += 1;
    }
    Some(err / n as f64)
}

impl LocalPolynomial {
    /// Fit to observations `ys` at unit-cube points `zs`.
    pub fn fit(zs: Vec<[f64; 3]>, ys: Vec<f64>, cfg: &SmootherConfig) -> Result<Self> {
        if zs.len() != ys.len() {
            return Err(Error::DegenerateDesign("points and values differ in length".into()));
        }
        if zs.len() < 10 {
            return Err(Error::DegenerateDesign(
                "fewer than 10 surface points; add design points before smoothing".into(),
            ));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::DegenerateDesign("non-finite log-likelihood in the surface".into()));
        }
        let base = mean_nn_distance(&zs);
        match cfg.bandwidth {
            BandwidthRule::NearestNeighbor { multiplier } => {
                let h = [multiplier * base; 3];
                let s = Self { zs, ys, bandwidth: h, degree: 2, ridge: cfg.ridge, cv_error: None };
                for z in &s.zs {
                    if fit_down_to_constant(&s.zs, &s.ys, None, z, &h, 2, s.ridge).is_none() {
                        return Err(Error::DegenerateDesign(
                            "local quadratic fit is rank deficient; add design points or widen the bandwidth".into(),
                        ));
                    }
                }
                Ok(s)
            }
            BandwidthRule::CrossValidated => {
                let top = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let floor = cfg.cv_within.map_or(f64::NEG_INFINITY, |w| top - w);
                let scored: Vec<bool> = ys.iter().map(|y| *y >= floor).collect();
                let cv = |h: &[f64; 3], degree: usize| cv_error(&zs, &ys, &scored, h, degree, cfg.ridge);
                let mut best: Option<(f64, [f64; 3], usize)> = None;
                for degree in [2usize, 1, 0] {
                    for m in CV_MULTIPLIERS {
                        let h = [m * base; 3];
                        if let Some(err) = cv(&h, degree) {
                            if best.map_or(true, |b| err < b.0) {
                                best = Some((err, h, degree));
                            }
                        }
                    }
                }
                let (mut err, mut h, degree) = best.ok_or_else(|| {
                    Error::DegenerateDesign(
                        "no bandwidth gives a well-posed local fit; add or spread design points".into(),
                    )
                })?;
                for _ in 0..AXIS_SWEEPS {
                    let before = h;
                    for k in 0..3 {
                        let current = h;
                        for f in AXIS_FACTORS {
                            let mut trial = current;
                            trial[k] *= f;
                            if let Some(e) = cv(&trial, degree) {
                                if e < err {
                                    (err, h) = (e, trial);
                                }
                            }
                        }
                    }
                    if h == before {
                        break;
                    }
                }
                Ok(Self { zs, ys, bandwidth: h, degree, ridge: cfg.ridge, cv_error: Some(err) })
            }
        }
    }

    /// Smoothed value at `z`. Falls back to lower degrees where the local
    /// fit is singular or extrapolates too far.
    pub fn predict(&self, z: &[f64; 3]) -> f64 {
        fit_down_to_constant(&self.zs, &self.ys, None, z, &self.bandwidth, self.degree, self.ridge)
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.zs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Coefficient of determination of the smoothed values at the data.
    pub fn r_squared(&self) -> f64 {
        let n = self.ys.len() as f64;
        let mean = self.ys.iter().sum::<f64>() / n;
        let tot: f64 = self.ys.iter().map(|y| (y - mean) * (y - mean)).sum();
        let res: f64 = self.zs.iter().zip(&self.ys).map(|(z, y)| (self.predict(z) - y) * (self.predict(z) - y)).sum();
        if tot == 0.0 {
            1.0
        } else {
            1.0 - res / tot
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::design::{design_points, SearchRanges};
    use crate::rng::{substream, uniform};

    fn unit_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let r = SearchRanges::new((1.0, 10.0), (1.0, 10.0), (1.0, 10.0)).unwrap();
        design_points(&r, n, seed).unwrap().iter().map(|p| r.params_to_unit(p)).collect()
    }

    #[test]
    fn quadratic_is_reproduced() {
        let zs = unit_points(40, 1);
        let f = |z: &[f64; 3]| -3.0 * (z[0] - 0.3).powi(2) - 2.0 * (z[1] - 0.6).powi(2) - (z[2] - 0.5).powi(2) + 0.5 * z[0] * z[1];
        let ys: Vec<f64> = zs.iter().map(f).collect();
        let s = LocalPolynomial::fit(zs, ys, &SmootherConfig::default()).unwrap();
        assert_eq!(s.degree, 2);
        for z in [[0.1, 0.2, 0.3], [0.5, 0.5, 0.5], [0.9, 0.1, 0.7]] {
            assert!((s.predict(&z) - f(&z)).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_noise_is_flattened() {
        let zs = unit_points(200, 2);
        let mut rng = substream(5, &[]);
        let sd = 1.0;
        let ys: Vec<f64> = zs
            .iter()
            .map(|_| {
                let u1 = uniform(&mut rng).max(1e-300);
                let u2 = uniform(&mut rng);
                sd * (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
            })
            .collect();
        let s = LocalPolynomial::fit(zs.clone(), ys, &SmootherConfig::default()).unwrap();
        let preds: Vec<f64> = zs.iter().map(|z| s.predict(z)).collect();
        let range = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - preds.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(range < sd, "range {range}");
    }

    #[test]
    fn too_few_points_is_degenerate() {
        let zs = unit_points(5, 3);
        let ys = alloc::vec![0.0; 5];
        assert!(matches!(LocalPolynomial::fit(zs, ys, &SmootherConfig::default()), Err(Error::DegenerateDesign(_))));
    }
}
