//! State space, mutation and demographic models, and the event rates of the
//! ancestral jump process.
//!
//! Scaled time `u = t / 2N` is used throughout. Writing `c(u) = θ / θ(u)`
//! (the ratio of current to instantaneous population size), the rates per
//! unit of `u` are:
//!
//! * forward split of a type-`A` lineage out of ancestor `a`:
//!   `(|a|+1) · a(A) · c(u)`
//! * forward mutation `B → A` out of ancestor `a`: `θ · a(B) · p(B, A)`
//!
//! and the total rate of the genealogy seen backward from a configuration
//! `h` (coalescence plus mutation, the law of the holding times) is
//! `|h| · ((|h|−1) · c(u) + θ)`.
//!
//! Self-mutations (`p(B, B) > 0`, e.g. at the reflecting boundaries of the
//! bounded stepwise model) are kept as backward events that leave the
//! configuration unchanged; this keeps the backward rate independent of the
//! allele types.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use rand::RngCore;

use crate::error::{invalid, Error, Result};
use crate::math::{exp, ln, powf};
use crate::rng::uniform;

/// Default size of the bounded allele space for the stepwise model.
pub const DEFAULT_K: u32 = 200;

/// Multiset of gene counts per allele, stored as sorted `(allele, count)`
/// pairs with positive counts.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlleleConfig {
    k: u32,
    entries: Vec<(u32, u32)>,
    total: u32,
}

impl AlleleConfig {
    /// Build from `(allele, count)` pairs. Duplicate alleles are merged and
    /// zero counts dropped; the result must hold at least one gene.
    pub fn from_counts<I>(k: u32, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        if k == 0 {
            return Err(invalid("allele space bound K must be at least 1"));
        }
        let mut entries: Vec<(u32, u32)> = Vec::new();
        for (a, c) in counts {
            if a == 0 || a > k {
                return Err(Error::AlleleOutOfRange { allele: a, k });
            }
            if c == 0 {
                continue;
            }
            match entries.binary_search_by_key(&a, |e| e.0) {
                Ok(i) => entries[i].1 += c,
                Err(i) => entries.insert(i, (a, c)),
            }
        }
        let total = entries.iter().map(|e| e.1).sum();
        if total == 0 {
            return Err(Error::EmptyConfig);
        }
        Ok(Self { k, entries, total })
    }

    /// Build from one allele per gene.
    pub fn from_alleles<I>(k: u32, alleles: I) -> Result<Self>
    where
        I: IntoIterator<Item = u32>,
    {
        Self::from_counts(k, alleles.into_iter().map(|a| (a, 1)))
    }

    pub fn single(k: u32, allele: u32) -> Result<Self> {
        Self::from_counts(k, [(allele, 1)])
    }

    #[inline]
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of genes `|h|`.
    #[inline]
    pub fn total(&self) -> u32 {
        self.total
    }

    /// Number of distinct alleles present.
    #[inline]
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    #[inline]
    pub fn count(&self, allele: u32) -> u32 {
        match self.entries.binary_search_by_key(&allele, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    /// The single remaining allele once `|h| = 1`.
    pub fn mrca_allele(&self) -> Option<u32> {
        (self.total == 1).then(|| self.entries[0].0)
    }

    fn bump(&mut self, allele: u32, up: bool) {
        match self.entries.binary_search_by_key(&allele, |e| e.0) {
            Ok(i) => {
                if up {
                    self.entries[i].1 += 1;
                    self.total += 1;
                } else {
                    self.entries[i].1 -= 1;
                    self.total -= 1;
                    if self.entries[i].1 == 0 {
                        self.entries.remove(i);
                    }
                }
            }
            Err(i) => {
                debug_assert!(up);
                self.entries.insert(i, (allele, 1));
                self.total += 1;
            }
        }
    }

    /// Check that `event` can be applied to this configuration.
    pub fn check_event(&self, event: &BackwardEvent) -> Result<()> {
        match *event {
            BackwardEvent::Coalescence { allele } => {
                if self.count(allele) < 2 {
                    return Err(Error::InvalidEvent(
                        "coalescence needs two genes of the same allele".to_string(),
                    ));
                }
            }
            BackwardEvent::Mutation { child, parent } => {
                if self.count(child) < 1 {
                    return Err(Error::InvalidEvent(
                        "mutation child allele is absent".to_string(),
                    ));
                }
                if parent == 0 || parent > self.k {
                    return Err(Error::AlleleOutOfRange { allele: parent, k: self.k });
                }
            }
        }
        Ok(())
    }

    /// Apply a backward event in place.
    pub fn apply_mut(&mut self, event: &BackwardEvent) -> Result<()> {
        self.check_event(event)?;
        match *event {
            BackwardEvent::Coalescence { allele } => self.bump(allele, false),
            BackwardEvent::Mutation { child, parent } => {
                if child != parent {
                    self.bump(child, false);
                    self.bump(parent, true);
                }
            }
        }
        Ok(())
    }

    /// The ancestral configuration reached by a backward event.
    pub fn apply(&self, event: &BackwardEvent) -> Result<Self> {
        let mut next = self.clone();
        next.apply_mut(event)?;
        Ok(next)
    }

    /// Alleles of all genes, in increasing order.
    pub fn alleles(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries
            .iter()
            .flat_map(|&(a, c)| core::iter::repeat(a).take(c as usize))
    }
}

impl fmt::Debug for AlleleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (a, c)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}:{c}")?;
        }
        f.write_str("}")
    }
}

/// A backward step of the ancestral process, seen from the descendant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackwardEvent {
    /// Two genes of `allele` merge into one.
    Coalescence { allele: u32 },
    /// A gene of type `child` was, before a mutation, of type `parent`.
    Mutation { child: u32, parent: u32 },
}

impl BackwardEvent {
    #[inline]
    pub fn is_coalescence(&self) -> bool {
        matches!(self, BackwardEvent::Coalescence { .. })
    }
}

/// The scaled parameter point `φ = (θ, D, θ_anc)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams {
    /// Current scaled size `2μN`.
    pub theta: f64,
    /// Scaled time of the end of the size change, `T / 2N`.
    pub d: f64,
    /// Ancestral scaled size `2μN_anc`.
    pub theta_anc: f64,
}

impl ScaledParams {
    pub fn new(theta: f64, d: f64, theta_anc: f64) -> Result<Self> {
        let p = Self { theta, d, theta_anc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(invalid("theta must be positive and finite"));
        }
        if !(self.theta_anc > 0.0 && self.theta_anc.is_finite()) {
            return Err(invalid("theta_anc must be positive and finite"));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(invalid("D must be non-negative and finite"));
        }
        Ok(())
    }

    /// Strength of the size change `θ / θ_anc = N / N_anc`.
    pub fn n_ratio(&self) -> f64 {
        self.theta / self.theta_anc
    }

    /// Coordinate by axis index (0 = θ, 1 = D, 2 = θ_anc).
    pub fn get(&self, axis: usize) -> f64 {
        match axis {
            0 => self.theta,
            1 => self.d,
            _ => self.theta_anc,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta, self.d, self.theta_anc]
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

/// Population size history, expressed through `θ(u) = 2μN(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DemographyModel {
    Constant { theta: f64 },
    /// `θ(u) = θ · (θ_anc/θ)^(u/D)` on `[0, D]`, `θ_anc` afterwards. Covers
    /// expansions too when `θ_anc < θ`.
    ExponentialContraction(ScaledParams),
}

impl DemographyModel {
    pub fn constant(theta: f64) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(invalid("theta must be non-negative and finite"));
        }
        Ok(Self::Constant { theta })
    }

    pub fn contraction(params: ScaledParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::ExponentialContraction(params))
    }

    /// Current (sampling-time) scaled size θ.
    #[inline]
    pub fn theta(&self) -> f64 {
        match self {
            Self::Constant { theta } => *theta,
            Self::ExponentialContraction(p) => p.theta,
        }
    }

    /// Scaled size once the size change is over.
    #[inline]
    pub fn theta_ancestral(&self) -> f64 {
        match self {
            Self::Constant { theta } => *theta,
            Self::ExponentialContraction(p) => p.theta_anc,
        }
    }

    /// Time after which the size is constant.
    #[inline]
    pub fn change_end(&self) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::ExponentialContraction(p) => p.d,
        }
    }

    /// `ln(θ/θ_anc) / D`: growth exponent of `c(u)` on `[0, D)`.
    #[inline]
    pub fn exponent(&self) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::ExponentialContraction(p) => {
                if p.d > 0.0 {
                    ln(p.theta / p.theta_anc) / p.d
                } else {
                    0.0
                }
            }
        }
    }

    pub fn theta_at(&self, u: f64) -> f64 {
        match self {
            Self::Constant { theta } => *theta,
            Self::ExponentialContraction(p) => {
                if u >= p.d {
                    p.theta_anc
                } else {
                    p.theta * powf(p.theta_anc / p.theta, u / p.d)
                }
            }
        }
    }

    /// `c(u) = θ / θ(u)`, the factor applied to coalescence rates.
    #[inline]
    pub fn coal_scale(&self, u: f64) -> f64 {
        match self {
            Self::Constant { .. } => 1.0,
            Self::ExponentialContraction(p) => {
                if u >= p.d {
                    p.theta / p.theta_anc
                } else {
                    exp(self.exponent() * u)
                }
            }
        }
    }

    /// True when `θ(u)` never decreases going back in time.
    pub fn is_nondecreasing(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::ExponentialContraction(p) => p.theta_anc >= p.theta,
        }
    }
}

/// Mutation kernel on the allele space `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub enum MutationModel {
    /// Stepwise model: ±1 with probability 1/2 each; at the two boundary
    /// alleles the outward move is replaced by staying put.
    Smm { k: u32 },
    /// Parent-independent: the new allele is drawn from `weights`
    /// regardless of the parent.
    Pim { weights: Vec<f64> },
}

impl MutationModel {
    pub fn smm(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        Ok(Self::Smm { k })
    }

    /// PIM with weights normalized to sum to one.
    pub fn pim(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("PIM needs at least one allele"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("PIM weights must be positive and finite"));
        }
        let s: f64 = weights.iter().sum();
        Ok(Self::Pim { weights: weights.into_iter().map(|w| w / s).collect() })
    }

    #[inline]
    pub fn k(&self) -> u32 {
        match self {
            Self::Smm { k } => *k,
            Self::Pim { weights } => weights.len() as u32,
        }
    }

    /// Forward mutation probability `p(from, to)`.
    #[inline]
    pub fn prob(&self, from: u32, to: u32) -> f64 {
        match self {
            Self::Smm { k } => {
                let k = *k;
                if k == 1 {
                    return if from == 1 && to == 1 { 1.0 } else { 0.0 };
                }
                if from == to {
                    if from == 1 || from == k {
                        0.5
                    } else {
                        0.0
                    }
                } else if from.abs_diff(to) == 1 && (1..=k).contains(&from) && (1..=k).contains(&to)
                {
                    0.5
                } else {
                    0.0
                }
            }
            Self::Pim { weights } => {
                if from == 0 || from as usize > weights.len() || to == 0 {
                    return 0.0;
                }
                weights.get(to as usize - 1).copied().unwrap_or(0.0)
            }
        }
    }

    /// Stationary probability `ψ(a)`.
    pub fn stationary(&self, allele: u32) -> f64 {
        match self {
            Self::Smm { k } => {
                if (1..=*k).contains(&allele) {
                    1.0 / *k as f64
                } else {
                    0.0
                }
            }
            Self::Pim { weights } => {
                if allele == 0 {
                    0.0
                } else {
                    weights.get(allele as usize - 1).copied().unwrap_or(0.0)
                }
            }
        }
    }

    /// Call `f(parent, p(parent, child))` for every parent with positive
    /// probability of mutating into `child`, in increasing parent order.
    #[inline]
    pub fn for_each_parent<F: FnMut(u32, f64)>(&self, child: u32, mut f: F) {
        match self {
            Self::Smm { k } => {
                let k = *k;
                if k == 1 {
                    f(1, 1.0);
                    return;
                }
                if child > 1 {
                    f(child - 1, 0.5);
                }
                if child == 1 || child == k {
                    f(child, 0.5);
                }
                if child < k {
                    f(child + 1, 0.5);
                }
            }
            Self::Pim { weights } => {
                let p = weights[child as usize - 1];
                for b in 1..=weights.len() as u32 {
                    f(b, p);
                }
            }
        }
    }

    /// Draw the allele a gene of type `from` mutates to.
    pub fn sample_mutation<R: RngCore + ?Sized>(&self, from: u32, rng: &mut R) -> u32 {
        match self {
            Self::Smm { k } => {
                let k = *k;
                if k == 1 {
                    return 1;
                }
                let up = uniform(rng) < 0.5;
                if up {
                    if from == k {
                        k
                    } else {
                        from + 1
                    }
                } else if from == 1 {
                    1
                } else {
                    from - 1
                }
            }
            Self::Pim { weights } => sample_index(weights, rng) as u32 + 1,
        }
    }

    /// Draw an allele from `ψ`.
    pub fn sample_stationary<R: RngCore + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            Self::Smm { k } => {
                let a = (uniform(rng) * *k as f64) as u32 + 1;
                a.min(*k)
            }
            Self::Pim { weights } => sample_index(weights, rng) as u32 + 1,
        }
    }
}

fn sample_index<R: RngCore + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut x = uniform(rng);
    for (i, p) in probs.iter().enumerate() {
        if x < *p {
            return i;
        }
        x -= p;
    }
    probs.len() - 1
}

/// A demography paired with a mutation kernel: everything needed to score
/// or simulate histories at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub demography: DemographyModel,
    pub mutation: MutationModel,
}

impl Model {
    pub fn new(demography: DemographyModel, mutation: MutationModel) -> Self {
        Self { demography, mutation }
    }

    /// Exponential-contraction model under the bounded stepwise kernel.
    pub fn smm_contraction(params: ScaledParams, k: u32) -> Result<Self> {
        Ok(Self::new(DemographyModel::contraction(params)?, MutationModel::smm(k)?))
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.demography.theta()
    }

    /// Total backward event rate at `h` and time `u`: the hazard of the
    /// holding time.
    #[inline]
    pub fn holding_rate(&self, h: &AlleleConfig, u: f64) -> f64 {
        holding_rate_parts(h.total(), self.theta(), self.demography.coal_scale(u))
    }

    /// Forward rate `Λ_u(h | a)` into the descendant `h` from the ancestor
    /// `a = h.apply(event)`. Zero when `p(parent, child) = 0`.
    #[inline]
    pub fn ancestral_rate(&self, h: &AlleleConfig, event: &BackwardEvent, u: f64) -> f64 {
        ancestral_rate_with(h, event, self.theta(), self.demography.coal_scale(u), &self.mutation)
    }

    /// `ln(Λ_u(h | a) / λ*_u(h))`: the target factor of the importance
    /// weight for one backward step.
    pub fn log_target(&self, h: &AlleleConfig, event: &BackwardEvent, u: f64) -> f64 {
        ln(self.ancestral_rate(h, event, u)) - ln(self.holding_rate(h, u))
    }

    /// Total forward rate out of `h` into configurations other than `h`.
    pub fn forward_exit_rate(&self, h: &AlleleConfig, u: f64) -> Result<f64> {
        if h.total() == 0 {
            return Err(Error::EmptyConfig);
        }
        let n = h.total() as f64;
        let split = n * (n + 1.0) * self.demography.coal_scale(u);
        let theta = self.theta();
        let mutate: f64 = h
            .entries()
            .iter()
            .map(|&(b, c)| theta * c as f64 * (1.0 - self.mutation.prob(b, b)))
            .sum();
        Ok(split + mutate)
    }

    /// Probability that the forward jump chain moves from `h` to `next`
    /// (one more lineage, or one mutated gene) at time `u`.
    pub fn forward_transition(&self, next: &AlleleConfig, h: &AlleleConfig, u: f64) -> Result<f64> {
        let rate = self.forward_rate(next, h, u)?;
        Ok(rate / self.forward_exit_rate(h, u)?)
    }

    /// `Λ_u(next | h)`, the forward rate from `h` to `next`.
    pub fn forward_rate(&self, next: &AlleleConfig, h: &AlleleConfig, u: f64) -> Result<f64> {
        if next.k() != h.k() {
            return Err(Error::UnreachableTransition);
        }
        let (plus, minus) = diff(next, h);
        let n = h.total() as f64;
        match (next.total() as i64 - h.total() as i64, plus, minus) {
            (1, Some((a, 1)), None) => {
                Ok((n + 1.0) * h.count(a) as f64 * self.demography.coal_scale(u))
            }
            (0, Some((a, 1)), Some((b, 1))) => {
                Ok(self.theta() * h.count(b) as f64 * self.mutation.prob(b, a))
            }
            _ => Err(Error::UnreachableTransition),
        }
    }

    /// All forward successors of `h` with positive rate, with their rates.
    pub fn forward_successors(&self, h: &AlleleConfig, u: f64) -> Vec<(AlleleConfig, f64)> {
        let mut out = Vec::new();
        let c = self.demography.coal_scale(u);
        let n = h.total() as f64;
        let theta = self.theta();
        for &(a, cnt) in h.entries() {
            let mut next = h.clone();
            next.bump(a, true);
            out.push((next, (n + 1.0) * cnt as f64 * c));
        }
        for &(b, cnt) in h.entries() {
            for to in 1..=h.k() {
                if to == b {
                    continue;
                }
                let p = self.mutation.prob(b, to);
                if p > 0.0 {
                    let mut next = h.clone();
                    next.bump(b, false);
                    next.bump(to, true);
                    out.push((next, theta * cnt as f64 * p));
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn holding_rate_parts(n: u32, theta: f64, coal_scale: f64) -> f64 {
    let n = n as f64;
    n * ((n - 1.0) * coal_scale + theta)
}

#[inline]
pub(crate) fn ancestral_rate_with(
    h: &AlleleConfig,
    event: &BackwardEvent,
    theta: f64,
    coal_scale: f64,
    mutation: &MutationModel,
) -> f64 {
    match *event {
        BackwardEvent::Coalescence { allele } => {
            let c = h.count(allele);
            if c < 2 {
                return 0.0;
            }
            h.total() as f64 * (c - 1) as f64 * coal_scale
        }
        BackwardEvent::Mutation { child, parent } => {
            let in_anc = if child == parent { h.count(parent) } else { h.count(parent) + 1 };
            theta * in_anc as f64 * mutation.prob(parent, child)
        }
    }
}

/// Single-allele differences between two configurations: the allele with
/// one more gene in `x` and the allele with one more gene in `y`. Anything
/// other than unit differences on at most one allele each way yields a count
/// other than 1, which callers reject.
fn diff(x: &AlleleConfig, y: &AlleleConfig) -> (Option<(u32, u32)>, Option<(u32, u32)>) {
    let mut plus: Option<(u32, u32)> = None;
    let mut minus: Option<(u32, u32)> = None;
    let mut bad = false;
    let mut record = |slot: &mut Option<(u32, u32)>, a: u32, d: u32| {
        if slot.is_some() {
            bad = true;
        } else {
            *slot = Some((a, d));
        }
    };
    let (xs, ys) = (x.entries(), y.entries());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() || j < ys.len() {
        let ax = xs.get(i).map(|e| e.0).unwrap_or(u32::MAX);
        let ay = ys.get(j).map(|e| e.0).unwrap_or(u32::MAX);
        if ax == ay {
            let (cx, cy) = (xs[i].1, ys[j].1);
            if cx > cy {
                record(&mut plus, ax, cx - cy);
            } else if cy > cx {
                record(&mut minus, ax, cy - cx);
            }
            i += 1;
            j += 1;
        } else if ax < ay {
            record(&mut plus, ax, xs[i].1);
            i += 1;
        } else {
            record(&mut minus, ay, ys[j].1);
            j += 1;
        }
    }
    if bad {
        (Some((0, 0)), Some((0, 0)))
    } else {
        (plus, minus)
    }
}
