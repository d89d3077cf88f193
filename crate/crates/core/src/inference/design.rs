//! Search box and stratified parameter designs.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::math::{exp, ln};
use crate::model::ScaledParams;
use crate::rng::{substream, tag, uniform};

/// Parameter axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Theta,
    D,
    ThetaAnc,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Theta, Axis::D, Axis::ThetaAnc];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::Theta => 0,
            Axis::D => 1,
            Axis::ThetaAnc => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Theta => "theta",
            Axis::D => "D",
            Axis::ThetaAnc => "theta_anc",
        }
    }
}

impl core::str::FromStr for Axis {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Axis::Theta),
            "D" | "d" => Ok(Axis::D),
            "theta_anc" => Ok(Axis::ThetaAnc),
            _ => Err(invalid("axis must be theta, D or theta_anc")),
        }
    }
}

/// Per-axis positive bounds; all geometry is done on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRanges {
    pub bounds: [(f64, f64); 3],
}

impl SearchRanges {
    pub fn new(theta: (f64, f64), d: (f64, f64), theta_anc: (f64, f64)) -> Result<Self> {
        let r = Self { bounds: [theta, d, theta_anc] };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in self.bounds {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(invalid("search ranges need 0 < lo ≤ hi < ∞"));
            }
        }
        Ok(())
    }

    pub fn axis(&self, a: Axis) -> (f64, f64) {
        self.bounds[a.index()]
    }

    /// Map a parameter value to `[0, 1]` on the log scale.
    #[inline]
    pub fn to_unit(&self, axis: usize, x: f64) -> f64 {
        let (lo, hi) = self.bounds[axis];
        if hi == lo {
            0.0
        } else {
            (ln(x) - ln(lo)) / (ln(hi) - ln(lo))
        }
    }

    #[inline]
    pub fn from_unit(&self, axis: usize, z: f64) -> f64 {
        let (lo, hi) = self.bounds[axis];
        if hi == lo || z <= 0.0 {
            lo
        } else if z >= 1.0 {
            hi
        } else {
            exp(ln(lo) + z * (ln(hi) - ln(lo))).clamp(lo, hi)
        }
    }

    pub fn params_to_unit(&self, p: &ScaledParams) -> [f64; 3] {
        let v = p.as_array();
        [self.to_unit(0, v[0]), self.to_unit(1, v[1]), self.to_unit(2, v[2])]
    }

    pub fn unit_to_params(&self, z: [f64; 3]) -> ScaledParams {
        ScaledParams { theta: self.from_unit(0, z[0]), d: self.from_unit(1, z[1]), theta_anc: self.from_unit(2, z[2]) }
    }

    pub fn contains(&self, p: &ScaledParams) -> bool {
        let v = p.as_array();
        self.bounds.iter().zip(v).all(|(&(lo, hi), x)| x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12))
    }
}

/// Latin-hypercube sample: each axis is cut into `n` equal log-scale strata,
/// one point falls uniformly inside each stratum, and strata are permuted
/// independently per axis.
pub fn design_points(ranges: &SearchRanges, n: usize, seed: u64) -> Result<Vec<ScaledParams>> {
    ranges.validate()?;
    if n == 0 {
        return Err(invalid("at least one design point is required"));
    }
    let mut rng = substream(seed, &[tag::DESIGN]);
    let mut unit = alloc::vec![[0.0f64; 3]; n];
    for axis in 0..3 {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = ((uniform(&mut rng) * (i + 1) as f64) as usize).min(i);
            perm.swap(i, j);
        }
        for (i, z) in unit.iter_mut().enumerate() {
            z[axis] = (perm[i] as f64 + uniform(&mut rng)) / n as f64;
        }
    }
    Ok(unit.into_iter().map(|z| ranges.unit_to_params(z)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_box() -> SearchRanges {
        SearchRanges::new((0.01, 10.0), (0.01, 10.0), (1.0, 1000.0)).unwrap()
    }

    #[test]
    fn design_occupies_every_stratum() {
        let r = default_box();
        let pts = design_points(&r, 100, 4).unwrap();
        assert!(pts.iter().all(|p| r.contains(p)));
        for axis in 0..3 {
            let mut seen = [false; 100];
            for p in &pts {
                let z = r.to_unit(axis, p.get(axis));
                seen[((z * 100.0) as usize).min(99)] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
        assert_eq!(design_points(&r, 1, 0).unwrap().len(), 1);
        assert!(SearchRanges::new((0.0, 1.0), (1.0, 2.0), (1.0, 2.0)).is_err());
    }
}
