//! Holding times of the inhomogeneous jump process.
//!
//! With `n = |h|` lineages the backward event rate at scaled time `u` is
//! `r(u) = a · c(u) + b` where `a = n(n−1)`, `b = θn` and `c(u) = θ/θ(u)`.
//! The holding time `δ` after `u` has hazard `r(u + s)`, so
//! `P(δ > x) = exp(−H(x))` with `H(x) = ∫₀ˣ r(u+s) ds`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::math::{abs, exp, expm1, ln1p};
use crate::model::DemographyModel;
use crate::rng::{exponential, uniform};

/// How holding times are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimingStrategy {
    /// Invert `H` numerically against a single uniform draw.
    #[default]
    InverseCdf,
    /// Poisson thinning under a constant bound on `r`.
    Thinning,
}

impl TimingStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::InverseCdf => "inverse",
            Self::Thinning => "thinning",
        }
    }
}

/// Rate components for a fixed lineage count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParts {
    /// Coefficient of `c(u)`.
    pub a: f64,
    /// Constant (mutation) part.
    pub b: f64,
}

impl RateParts {
    pub fn new(n: u32, theta: f64) -> Self {
        let nf = n as f64;
        Self { a: nf * (nf - 1.0), b: theta * nf }
    }
}

/// Holding-time sampler bound to one demography.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingSampler {
    pub strategy: TimingStrategy,
    pub demography: DemographyModel,
}

const ROOT_TOL: f64 = 1e-12;

impl HoldingSampler {
    pub fn new(strategy: TimingStrategy, demography: DemographyModel) -> Self {
        Self { strategy, demography }
    }

    fn parts(&self, n: u32) -> RateParts {
        RateParts::new(n, self.demography.theta())
    }

    /// `r(u)` for `n` lineages.
    #[inline]
    pub fn rate(&self, n: u32, u: f64) -> f64 {
        let p = self.parts(n);
        p.a * self.demography.coal_scale(u) + p.b
    }

    /// `∫_u^{u+δ} c(s) ds`, split at the end of the size change.
    pub fn integrated_scale(&self, u: f64, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let d = self.demography.change_end();
        let beta = self.demography.exponent();
        let end = u + delta;
        let mut total = 0.0;
        if u < d {
            let len = if end < d { delta } else { d - u };
            total += if beta == 0.0 { len } else { exp(beta * u) * expm1(beta * len) / beta };
        }
        if end > d {
            let start = if u > d { u } else { d };
            total += self.demography.coal_scale(d) * (end - start);
        }
        total
    }

    /// Integrated hazard `H(δ)` for `n` lineages starting at `u`.
    pub fn integrated_hazard(&self, n: u32, u: f64, delta: f64) -> f64 {
        self.hazard_with(self.parts(n), u, delta)
    }

    /// Integrated hazard for arbitrary rate components.
    pub fn hazard_with(&self, p: RateParts, u: f64, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        p.b * delta + p.a * self.integrated_scale(u, delta)
    }

    #[inline]
    fn rate_with(&self, p: RateParts, u: f64) -> f64 {
        p.a * self.demography.coal_scale(u) + p.b
    }

    /// Solve `H(δ) = −ln(1−U)`.
    pub fn sample_inverse(&self, n: u32, u: f64, uniform_draw: f64) -> f64 {
        let target = -ln1p(-uniform_draw);
        self.invert_hazard(n, u, target)
    }

    /// Smallest `δ` with `H(δ) = target`.
    pub fn invert_hazard(&self, n: u32, u: f64, target: f64) -> f64 {
        self.invert_with(self.parts(n), u, target)
    }

    /// Smallest `δ` with `H(δ) = target` for arbitrary positive rate
    /// components.
    pub fn invert_with(&self, p: RateParts, u: f64, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        let d = self.demography.change_end();
        let tail_rate = self.rate_with(p, d.max(u));
        if u >= d {
            return target / tail_rate;
        }
        let span = d - u;
        let h_span = self.hazard_with(p, u, span);
        if target >= h_span {
            return span + (target - h_span) / tail_rate;
        }
        // H is smooth and increasing on [0, span]: safeguarded Newton
        let (mut lo, mut hi) = (0.0, span);
        let mut x = target / self.rate_with(p, u);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let f = self.hazard_with(p, u, x) - target;
            if abs(f) <= ROOT_TOL {
                return x;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = x - f / self.rate_with(p, u + x);
            x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        x
    }

    /// Bound `M ≥ sup_{s ≥ u} r(s)`.
    pub fn rate_bound(&self, n: u32, u: f64) -> Result<f64> {
        let now = self.rate(n, u);
        let m = if self.demography.is_nondecreasing() {
            now
        } else {
            let later = self.rate(n, self.demography.change_end());
            if now > later {
                now
            } else {
                later
            }
        };
        if m.is_finite() && m > 0.0 {
            Ok(m)
        } else {
            Err(Error::NoRateBound)
        }
    }

    /// Thinning draw; also returns the number of candidate points generated.
    pub fn sample_thinning_counted<R: RngCore + ?Sized>(
        &self,
        n: u32,
        u: f64,
        rng: &mut R,
    ) -> Result<(f64, u32)> {
        let m = self.rate_bound(n, u)?;
        let mut s = u;
        let mut candidates = 0u32;
        loop {
            s += exponential(rng) / m;
            candidates += 1;
            let accept = self.rate(n, s) / m;
            if accept >= 1.0 || uniform(rng) < accept {
                return Ok((s - u, candidates));
            }
        }
    }

    pub fn sample_thinning<R: RngCore + ?Sized>(&self, n: u32, u: f64, rng: &mut R) -> Result<f64> {
        self.sample_thinning_counted(n, u, rng).map(|r| r.0)
    }

    /// Draw a holding time with the configured strategy.
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, n: u32, u: f64, rng: &mut R) -> Result<f64> {
        match self.strategy {
            TimingStrategy::InverseCdf => Ok(self.sample_inverse(n, u, uniform(rng))),
            TimingStrategy::Thinning => self.sample_thinning(n, u, rng),
        }
    }
}
