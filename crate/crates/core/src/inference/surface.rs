//! Likelihood surfaces, their smoothed maximum, profile likelihoods,
//! χ²₁ intervals and likelihood-ratio tests.

use alloc::vec;
use alloc::vec::Vec;

use super::design::{Axis, SearchRanges};
use super::optimize::{maximize_unit_box, OptimizeOptions};
use super::smoother::{LocalPolynomial, SmootherConfig};
use crate::error::{invalid, Error, Result};
use crate::math::sqrt;
use crate::model::ScaledParams;
use crate::stats::{chi2_1_quantile, chi2_1_sf};

/// One evaluated parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub params: ScaledParams,
    pub log_lik: f64,
    /// Independent second estimate at the same point.
    pub log_lik_dup: Option<f64>,
    pub round: u32,
}

/// Raw likelihood estimates over a search box.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodSurface {
    pub ranges: SearchRanges,
    pub points: Vec<SurfacePoint>,
}

impl LikelihoodSurface {
    pub fn new(ranges: SearchRanges) -> Result<Self> {
        ranges.validate()?;
        Ok(Self { ranges, points: Vec::new() })
    }

    pub fn push(&mut self, p: SurfacePoint) {
        self.points.push(p);
    }

    /// Number of observations fed to the smoother (duplicates count twice).
    pub fn n_observations(&self) -> usize {
        self.points.iter().map(|p| 1 + p.log_lik_dup.is_some() as usize).sum()
    }

    /// Root mean squared error of one log-likelihood estimate, from the
    /// spread of duplicate pairs. With `within`, only pairs whose two values
    /// lie within that many log units of the best observation count.
    pub fn lik_rmse(&self, within: Option<f64>) -> Option<f64> {
        let top = self.points.iter().map(|p| p.log_lik.max(p.log_lik_dup.unwrap_or(f64::NEG_INFINITY))).fold(f64::NEG_INFINITY, f64::max);
        let floor = within.map_or(f64::NEG_INFINITY, |w| top - w);
        let diffs: Vec<f64> = self
            .points
            .iter()
            .filter_map(|p| p.log_lik_dup.filter(|d| p.log_lik >= floor && *d >= floor).map(|d| p.log_lik - d))
            .collect();
        if diffs.is_empty() {
            return None;
        }
        Some(sqrt(diffs.iter().map(|d| d * d / 2.0).sum::<f64>() / diffs.len() as f64))
    }

    /// Fit the smoother and locate its maximum.
    pub fn smooth(&self, cfg: &SmootherConfig) -> Result<SmoothedSurface> {
        if self.n_observations() < 20 {
            return Err(Error::DegenerateDesign(
                "at least 20 surface observations are needed; add design points".into(),
            ));
        }
        let mut zs = Vec::with_capacity(self.n_observations());
        let mut ys = Vec::with_capacity(zs.capacity());
        for p in &self.points {
            let z = self.ranges.params_to_unit(&p.params);
            zs.push(z);
            ys.push(p.log_lik);
            if let Some(d) = p.log_lik_dup {
                zs.push(z);
                ys.push(d);
            }
        }
        cfg.censor(&mut ys);
        let smoother = LocalPolynomial::fit(zs, ys, cfg)?;
        let mut s = SmoothedSurface { ranges: self.ranges, smoother, mle: [0.0; 3], max_log_lik: f64::NEG_INFINITY };
        let opts = OptimizeOptions::default();
        let starts: Vec<Vec<f64>> = {
            let mut best: Vec<(f64, [f64; 3])> =
                s.smoother.points().iter().map(|z| (s.smoother.predict(z), *z)).collect();
            best.sort_by(|a, b| b.0.total_cmp(&a.0));
            best.iter().take(2).map(|b| b.1.to_vec()).collect()
        };
        let o = maximize_unit_box(|x| s.smoother.predict(&[x[0], x[1], x[2]]), 3, &starts, &opts);
        s.mle = [o.x[0], o.x[1], o.x[2]];
        s.max_log_lik = o.value;
        Ok(s)
    }
}

/// `(φ̂, log L(φ̂))` on the smoothed surface.
pub fn smooth_and_maximize(surface: &LikelihoodSurface, cfg: &SmootherConfig) -> Result<(ScaledParams, f64)> {
    let s = surface.smooth(cfg)?;
    Ok((s.mle(), s.max_log_lik()))
}

/// A fitted surface with its maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSurface {
    pub ranges: SearchRanges,
    pub smoother: LocalPolynomial,
    mle: [f64; 3],
    max_log_lik: f64,
}

/// Profile likelihood along one axis, normalized by its maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub axis: Axis,
    /// Values of the retained coordinate, increasing; includes the MLE
    /// coordinate.
    pub grid: Vec<f64>,
    /// `log PL(φ₁) − log PL(φ̂₁)`, at most 0.
    pub log_ratio: Vec<f64>,
    pub mle: f64,
    pub log_pl_max: f64,
    pub range: (f64, f64),
}

/// A profile-likelihood confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub axis: Axis,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    /// The profile stays above the threshold down to the lower range edge.
    pub open_lower: bool,
    pub open_upper: bool,
}

impl Interval {
    /// The data do not bound the parameter on at least one side of the
    /// search range; treat the interval as a warning.
    pub fn uninformative(&self) -> bool {
        self.open_lower || self.open_upper
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

impl SmoothedSurface {
    pub fn mle(&self) -> ScaledParams {
        self.ranges.unit_to_params(self.mle)
    }

    pub fn mle_unit(&self) -> [f64; 3] {
        self.mle
    }

    pub fn max_log_lik(&self) -> f64 {
        self.max_log_lik
    }

    pub fn predict(&self, p: &ScaledParams) -> f64 {
        self.smoother.predict(&self.ranges.params_to_unit(p))
    }

    /// Smoothed log-likelihood at `p` minus the maximum.
    pub fn slice_log_ratio(&self, p: &ScaledParams) -> f64 {
        self.predict(p) - self.max_log_lik
    }

    /// `log PL` at unit coordinate `z` on `axis`, maximizing the other two
    /// coordinates; returns the value and the full unit maximizer.
    fn profile_unit(&self, axis: Axis, z: f64) -> (f64, [f64; 3]) {
        let i = axis.index();
        let z = if (z - self.mle[i]).abs() < 1e-12 { self.mle[i] } else { z };
        let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
        let full = |x: &[f64]| {
            let mut p = [0.0; 3];
            p[i] = z;
            p[others[0]] = x[0];
            p[others[1]] = x[1];
            p
        };
        let opts = OptimizeOptions { grid: 9, starts: 2, max_evals: 1500, ..OptimizeOptions::default() };
        let start = vec![vec![self.mle[others[0]], self.mle[others[1]]]];
        let o = maximize_unit_box(|x| self.smoother.predict(&full(x)), 2, &start, &opts);
        (o.value, full(&o.x))
    }

    fn check_in_range(&self, axis: Axis, value: f64) -> Result<()> {
        let (lo, hi) = self.ranges.axis(axis);
        if !(value >= lo * (1.0 - 1e-12) && value <= hi * (1.0 + 1e-12)) {
            return Err(Error::GridOutsideRange { value, lo, hi });
        }
        Ok(())
    }

    /// `log PL(value)` on `axis`.
    pub fn profile_log_lik(&self, axis: Axis, value: f64) -> Result<f64> {
        self.check_in_range(axis, value)?;
        Ok(self.profile_unit(axis, self.ranges.to_unit(axis.index(), value)).0)
    }

    /// Profile likelihood ratio curve over `grid` (any order; the MLE
    /// coordinate is inserted).
    pub fn profile_curve(&self, axis: Axis, grid: &[f64]) -> Result<ProfileCurve> {
        for &g in grid {
            self.check_in_range(axis, g)?;
        }
        let i = axis.index();
        let mle = self.ranges.from_unit(i, self.mle[i]);
        let mut xs: Vec<f64> = grid.to_vec();
        xs.push(mle);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let vals: Vec<f64> = xs.iter().map(|&x| self.profile_unit(axis, self.ranges.to_unit(i, x)).0).collect();
        let top = vals.iter().cloned().fold(self.max_log_lik, f64::max);
        Ok(ProfileCurve {
            axis,
            log_ratio: vals.iter().map(|v| (v - top).min(0.0)).collect(),
            grid: xs,
            mle,
            log_pl_max: top,
            range: self.ranges.axis(axis),
        })
    }

    /// Profile on `n` log-spaced values spanning the search range.
    pub fn profile_on_range(&self, axis: Axis, n: usize) -> Result<ProfileCurve> {
        let i = axis.index();
        let n = n.max(2);
        let grid: Vec<f64> = (0..n).map(|j| self.ranges.from_unit(i, j as f64 / (n - 1) as f64)).collect();
        self.profile_curve(axis, &grid)
    }

    /// p-value of the likelihood-ratio test of `axis = value`.
    pub fn lrt_pvalue(&self, axis: Axis, value: f64) -> Result<f64> {
        let pl = self.profile_log_lik(axis, value)?;
        Ok(chi2_1_sf(2.0 * (self.max_log_lik - pl).max(0.0)))
    }
}

impl ProfileCurve {
    /// The grid value where the ratio is largest.
    pub fn argmax(&self) -> f64 {
        let mut best = 0;
        for (j, v) in self.log_ratio.iter().enumerate() {
            if *v > self.log_ratio[best] {
                best = j;
            }
        }
        self.grid[best]
    }

    /// Deepest dip between two higher points, in log units; 0 for a
    /// unimodal or monotone profile.
    pub fn deepest_interior_minimum(&self) -> f64 {
        let n = self.log_ratio.len();
        let mut left_max = vec![f64::NEG_INFINITY; n];
        let mut right_max = vec![f64::NEG_INFINITY; n];
        for j in 1..n {
            left_max[j] = left_max[j - 1].max(self.log_ratio[j - 1]);
        }
        for j in (0..n - 1).rev() {
            right_max[j] = right_max[j + 1].max(self.log_ratio[j + 1]);
        }
        (1..n.saturating_sub(1))
            .map(|j| (left_max[j].min(right_max[j]) - self.log_ratio[j]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Interval `{φ₁ : 2(log PL(φ̂₁) − log PL(φ₁)) ≤ q}` with `q` the χ²₁ quantile
/// at `level`, reading crossings off the profile grid by linear
/// interpolation in log scale.
pub fn confidence_interval(profile: &ProfileCurve, level: f64) -> Result<Interval> {
    let q = chi2_1_quantile(level)?;
    if profile.grid.len() < 2 {
        return Err(invalid("profile needs at least two grid values"));
    }
    let cut = -q / 2.0;
    let g = &profile.grid;
    let r = &profile.log_ratio;
    let m = g.iter().position(|&x| x == profile.mle).unwrap_or_else(|| {
        let a = profile.argmax();
        g.iter().position(|&x| x == a).unwrap_or(0)
    });
    let cross = |j: usize, k: usize| {
        // r[j] ≥ cut > r[k]
        let t = (r[j] - cut) / (r[j] - r[k]);
        crate::math::exp(crate::math::ln(g[j]) + t * (crate::math::ln(g[k]) - crate::math::ln(g[j])))
    };
    let mut lower = None;
    for j in (0..m).rev() {
        if r[j] < cut {
            lower = Some(cross(j + 1, j));
            break;
        }
    }
    let mut upper = None;
    for j in m + 1..g.len() {
        if r[j] < cut {
            upper = Some(cross(j - 1, j));
            break;
        }
    }
    Ok(Interval {
        axis: profile.axis,
        level,
        lower: lower.unwrap_or(profile.range.0),
        upper: upper.unwrap_or(profile.range.1),
        open_lower: lower.is_none(),
        open_upper: upper.is_none(),
    })
}

/// p-value of the likelihood-ratio test of `axis = value`.
pub fn lrt_pvalue(surface: &SmoothedSurface, axis: Axis, value: f64) -> Result<f64> {
    surface.lrt_pvalue(axis, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::design::design_points;

    fn ranges() -> SearchRanges {
        SearchRanges::new((0.01, 10.0), (0.01, 10.0), (1.0, 1000.0)).unwrap()
    }

    // quadratic in unit coordinates with maximum at `c`
    fn quad(z: [f64; 3], c: [f64; 3], curv: [f64; 3]) -> f64 {
        -(0..3).map(|i| curv[i] * (z[i] - c[i]) * (z[i] - c[i])).sum::<f64>() + 0.2 * (z[0] - c[0]) * (z[1] - c[1])
    }

    fn quad_surface(c: [f64; 3], curv: [f64; 3]) -> LikelihoodSurface {
        let r = ranges();
        let mut s = LikelihoodSurface::new(r).unwrap();
        for p in design_points(&r, 100, 9).unwrap() {
            let z = r.params_to_unit(&p);
            s.push(SurfacePoint { params: p, log_lik: quad(z, c, curv), log_lik_dup: None, round: 0 });
        }
        s
    }

    #[test]
    fn quadratic_maximum_profile_and_interval() {
        let c = [0.4, 0.55, 0.6];
        let curv = [30.0, 20.0, 10.0];
        let s = quad_surface(c, curv).smooth(&SmootherConfig::default()).unwrap();
        let r = ranges();
        let truth = r.unit_to_params(c);
        let mle = s.mle();
        for i in 0..3 {
            assert!(((mle.get(i) - truth.get(i)) / truth.get(i)).abs() < 1e-6, "{mle:?} vs {truth:?}");
        }
        let prof = s.profile_on_range(Axis::D, 201).unwrap();
        assert_eq!(prof.log_ratio.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 0.0);
        assert!((prof.argmax() - truth.d).abs() < 1e-6 * truth.d);
        assert!(prof.log_ratio.iter().all(|v| *v <= 0.0));
        // profiling θ out of the cross term leaves curvature c₁ − 0.2²/(4c₀)
        let ci = confidence_interval(&prof, 0.95).unwrap();
        let q = chi2_1_quantile(0.95).unwrap();
        let half = sqrt(q / (2.0 * (curv[1] - 0.04 / (4.0 * curv[0]))));
        let lo = r.from_unit(1, c[1] - half);
        let hi = r.from_unit(1, c[1] + half);
        assert!(((ci.lower - lo) / lo).abs() < 2e-3 && ((ci.upper - hi) / hi).abs() < 2e-3, "{ci:?} vs {lo} {hi}");
        assert!(!ci.uninformative());
        let p_at_mle = s.lrt_pvalue(Axis::D, mle.d).unwrap();
        assert_eq!(p_at_mle, 1.0);
        let p_lo = s.lrt_pvalue(Axis::D, lo).unwrap();
        assert!((p_lo - 0.05).abs() < 1e-4, "{p_lo}");
    }

    #[test]
    fn nesting_dominance_and_errors() {
        let s = quad_surface([0.4, 0.5, 0.6], [30.0, 20.0, 10.0]).smooth(&SmootherConfig::default()).unwrap();
        let prof = s.profile_on_range(Axis::Theta, 101).unwrap();
        let c90 = confidence_interval(&prof, 0.90).unwrap();
        let c95 = confidence_interval(&prof, 0.95).unwrap();
        let c99 = confidence_interval(&prof, 0.99).unwrap();
        assert!(c99.lower <= c95.lower && c95.lower <= c90.lower);
        assert!(c90.upper <= c95.upper && c95.upper <= c99.upper);
        assert!(c95.contains(prof.mle));
        let mle = s.mle();
        for (x, lr) in prof.grid.iter().zip(&prof.log_ratio) {
            let slice = s.slice_log_ratio(&ScaledParams { theta: *x, ..mle });
            assert!(*lr >= slice - 1e-9);
        }
        assert!(matches!(s.profile_curve(Axis::Theta, &[20.0]), Err(Error::GridOutsideRange { .. })));
        assert!(confidence_interval(&prof, 1.0).is_err());
    }

    #[test]
    fn flat_profile_is_uninformative() {
        let r = ranges();
        let mut surf = LikelihoodSurface::new(r).unwrap();
        for p in design_points(&r, 30, 2).unwrap() {
            let z = r.params_to_unit(&p);
            surf.push(SurfacePoint { params: p, log_lik: -0.1 * z[0] - 5.0 * (z[1] - 0.5).powi(2), log_lik_dup: None, round: 0 });
        }
        let s = surf.smooth(&SmootherConfig::default()).unwrap();
        let ci = confidence_interval(&s.profile_on_range(Axis::Theta, 41).unwrap(), 0.95).unwrap();
        assert!(ci.uninformative() && ci.open_lower && ci.open_upper);
        assert_eq!((ci.lower, ci.upper), r.axis(Axis::Theta));
    }

    #[test]
    fn lik_rmse_from_duplicates() {
        let mut s = LikelihoodSurface::new(ranges()).unwrap();
        let p = ScaledParams::new(1.0, 1.0, 10.0).unwrap();
        s.push(SurfacePoint { params: p, log_lik: -10.0, log_lik_dup: Some(-12.0), round: 0 });
        s.push(SurfacePoint { params: p, log_lik: -10.0, log_lik_dup: None, round: 0 });
        assert!((s.lik_rmse(None).unwrap() - sqrt(2.0)).abs() < 1e-15);
        assert!(s.lik_rmse(Some(1.0)).is_none());
        assert!(s.smooth(&SmootherConfig::default()).is_err());
    }
}
