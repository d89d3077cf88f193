//! Pairwise composite likelihood of a configuration under a constant
//! population size and the unbounded stepwise model.
//!
//! Two genes at distance `d` have likelihood
//! `L2(d) = ρ(θ)^d / √(1+2θ)` with `ρ(θ) = θ / (1 + θ + √(1+2θ))`.
//! The composite likelihood multiplies `L2` over all unordered gene pairs,
//! so `log L2(h) = C(|h|,2) · log_norm + ln ρ · Σ_{pairs} |x − y|`.

use crate::error::{Error, Result};
use crate::math::{ln, sqrt};
use crate::model::{AlleleConfig, BackwardEvent};

/// `ρ(θ)`, in `[0, 1)` and increasing.
pub fn rho(theta: f64) -> f64 {
    theta / (1.0 + theta + sqrt(1.0 + 2.0 * theta))
}

/// Precomputed constants for one `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PclContext {
    pub theta: f64,
    pub rho: f64,
    pub log_rho: f64,
    pub log_norm: f64,
}

impl PclContext {
    pub fn new(theta: f64) -> Self {
        let r = rho(theta);
        Self { theta, rho: r, log_rho: ln(r), log_norm: -0.5 * ln(1.0 + 2.0 * theta) }
    }

    /// `log L2` for two genes at distance `d`.
    #[inline]
    pub fn log_pair_distance(&self, d: u32) -> f64 {
        if d == 0 {
            self.log_norm
        } else {
            self.log_norm + d as f64 * self.log_rho
        }
    }

    #[inline]
    pub fn log_pair_likelihood(&self, x: u32, y: u32) -> f64 {
        self.log_pair_distance(x.abs_diff(y))
    }

    #[inline]
    fn scale_distance(&self, dist_sum: f64) -> f64 {
        if dist_sum == 0.0 {
            0.0
        } else {
            dist_sum * self.log_rho
        }
    }

    /// `log L2(h)`.
    pub fn log_pcl(&self, h: &AlleleConfig) -> f64 {
        let n = h.total() as f64;
        let pairs = n * (n - 1.0) / 2.0;
        let norm = if pairs == 0.0 { 0.0 } else { pairs * self.log_norm };
        norm + self.scale_distance(pair_distance_sum(h))
    }

    /// Change of `log L2` caused by applying `event` to `h`.
    pub fn log_pcl_delta(&self, h: &AlleleConfig, event: &BackwardEvent) -> Result<f64> {
        if h.total() < 2 {
            return Err(Error::MrcaReached);
        }
        h.check_event(event)?;
        Ok(match *event {
            BackwardEvent::Coalescence { allele } => {
                let others = (h.total() - 1) as f64;
                -(others * self.log_norm) - self.scale_distance(distance_to(h, allele))
            }
            BackwardEvent::Mutation { child, parent } => {
                if child == parent {
                    0.0
                } else {
                    // remove one `child` gene, then add one `parent` gene
                    let without = |x: u32| distance_to(h, x) - x.abs_diff(child) as f64;
                    self.scale_distance(without(parent)) - self.scale_distance(without(child))
                }
            }
        })
    }
}

/// `Σ_C h(C) · |x − C|`.
pub fn distance_to(h: &AlleleConfig, x: u32) -> f64 {
    h.entries().iter().map(|&(a, c)| c as f64 * x.abs_diff(a) as f64).sum()
}

/// `Σ` over unordered gene pairs of their allele distance, in one sweep over
/// the sorted alleles.
pub fn pair_distance_sum(h: &AlleleConfig) -> f64 {
    let mut below = 0.0f64;
    let mut below_sum = 0.0f64;
    let mut total = 0.0f64;
    for &(a, c) in h.entries() {
        let (a, c) = (a as f64, c as f64);
        total += c * (a * below - below_sum);
        below += c;
        below_sum += c * a;
    }
    total
}
