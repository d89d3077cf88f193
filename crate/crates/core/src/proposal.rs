//! Backward proposal distributions for the importance process.
//!
//! Every proposal enumerates the same support, namely all backward events
//! from `h` whose forward rate `Λ_u(h | a)` is positive, and differs only in
//! the weight it puts on each event:
//!
//! * `GriffithsTavare`: proportional to `Λ`.
//! * `PclGuided`: `Λ · exp(β_q · (log L2(a) − log L2(h)) / (|h| − 1))` with
//!   the pairwise composite likelihood evaluated at `θ(u)`. Each gene sits in
//!   `|h| − 1` pairs, so the raw composite ratio is divided by that count.
//! * `ConditionalSampling`: `Λ · F̂(a) / F̂(h)` where `F̂` is the approximate
//!   configuration probability built from a conditional sampling
//!   distribution `π̂(·|g)` at the local size `θ(u)`. For the stepwise model
//!   `π̂(x|g) = Σ_B g(B)/|g| · L2(x − B; θ(u)/|g|)`; for parent-independent
//!   mutation `π̂(x|g) = (g(x) + θψ(x)) / (|g| + θ)`.
//! * `PimOptimal`: the conditional-sampling proposal restricted to
//!   parent-independent mutation, where it is exact at constant size.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::RngCore;

use crate::error::{invalid, Error, Result};
use crate::math::{exp, ln, ln1p, sqrt};
use crate::model::{holding_rate_parts, AlleleConfig, BackwardEvent, Model, MutationModel};
use crate::pcl::{rho, PclContext};
use crate::rng::uniform;

/// Proposal selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProposalKind {
    GriffithsTavare,
    PclGuided { beta_q: f64 },
    PimOptimal,
    ConditionalSampling,
}

impl ProposalKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GriffithsTavare => "gt",
            Self::PclGuided { .. } => "pcl",
            Self::PimOptimal => "pim-optimal",
            Self::ConditionalSampling => "csd",
        }
    }

    pub fn pcl_default() -> Self {
        Self::PclGuided { beta_q: 1.0 }
    }
}

impl Default for ProposalKind {
    fn default() -> Self {
        Self::ConditionalSampling
    }
}

impl fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProposalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt" => Ok(Self::GriffithsTavare),
            "pcl" => Ok(Self::pcl_default()),
            "pim-optimal" => Ok(Self::PimOptimal),
            "csd" => Ok(Self::ConditionalSampling),
            _ => Err(invalid("unknown proposal; expected gt, pcl, pim-optimal or csd")),
        }
    }
}

/// One event of the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub event: BackwardEvent,
    /// `Λ_u(h | a)`.
    pub rate: f64,
    /// Proposal weight; a probability once the distribution is built.
    pub weight: f64,
}

/// Outcome of one proposal draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub event: BackwardEvent,
    pub log_q: f64,
    /// `ln(Λ_u(h | a) / λ*_u(h))`.
    pub log_target: f64,
}

impl Step {
    #[inline]
    pub fn log_increment(&self) -> f64 {
        self.log_target - self.log_q
    }
}

/// Reusable proposal evaluator. Holds scratch buffers so that a particle
/// can step without allocating.
#[derive(Debug, Clone)]
pub struct Proposer {
    kind: ProposalKind,
    cands: Vec<Candidate>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Proposer {
    pub fn new(kind: ProposalKind, model: &Model) -> Result<Self> {
        if let ProposalKind::PimOptimal = kind {
            if !matches!(model.mutation, MutationModel::Pim { .. }) {
                return Err(invalid("pim-optimal requires a parent-independent mutation model"));
            }
        }
        if let ProposalKind::PclGuided { beta_q } = kind {
            if !beta_q.is_finite() {
                return Err(invalid("beta_q must be finite"));
            }
        }
        Ok(Self { kind, cands: Vec::new(), left: Vec::new(), right: Vec::new() })
    }

    pub fn kind(&self) -> ProposalKind {
        self.kind
    }

    /// Fill the candidate list with unnormalized weights; returns their sum.
    fn weigh(&mut self, h: &AlleleConfig, u: f64, model: &Model) -> Result<f64> {
        if h.total() < 2 {
            return Err(Error::MrcaReached);
        }
        self.enumerate(h, u, model);
        match self.kind {
            ProposalKind::GriffithsTavare => {
                for c in &mut self.cands {
                    c.weight = c.rate;
                }
            }
            ProposalKind::PclGuided { beta_q } => self.weigh_pcl(h, u, model, beta_q),
            ProposalKind::PimOptimal | ProposalKind::ConditionalSampling => match &model.mutation {
                MutationModel::Pim { weights } => self.weigh_csd_pim(h, u, model, weights),
                MutationModel::Smm { .. } => {
                    if !self.weigh_csd_smm(h, u, model) {
                        self.weigh_csd_smm_log(h, u, model);
                    }
                }
            },
        }
        let total: f64 = self.cands.iter().map(|c| c.weight).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::ZeroProposal);
        }
        Ok(total)
    }

    /// Normalized proposal distribution at `(h, u)`.
    pub fn distribution(&mut self, h: &AlleleConfig, u: f64, model: &Model) -> Result<&[Candidate]> {
        let total = self.weigh(h, u, model)?;
        for c in &mut self.cands {
            c.weight /= total;
        }
        Ok(&self.cands)
    }

    /// Draw one backward event.
    pub fn step<R: RngCore + ?Sized>(
        &mut self,
        h: &AlleleConfig,
        u: f64,
        model: &Model,
        rng: &mut R,
    ) -> Result<Step> {
        let total = self.weigh(h, u, model)?;
        let x = uniform(rng) * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, c) in self.cands.iter().enumerate() {
            if c.weight > 0.0 {
                acc += c.weight;
                pick = Some(i);
                if x < acc {
                    break;
                }
            }
        }
        let c = self.cands[pick.ok_or(Error::ZeroProposal)?];
        let hold = holding_rate_parts(h.total(), model.theta(), model.demography.coal_scale(u));
        Ok(Step { event: c.event, log_q: ln(c.weight / total), log_target: ln(c.rate / hold) })
    }

    fn enumerate(&mut self, h: &AlleleConfig, u: f64, model: &Model) {
        self.cands.clear();
        let n = h.total() as f64;
        let c = model.demography.coal_scale(u);
        let theta = model.theta();
        for &(a, ha) in h.entries() {
            if ha >= 2 {
                let rate = n * (ha - 1) as f64 * c;
                if rate > 0.0 {
                    self.cands.push(Candidate { event: BackwardEvent::Coalescence { allele: a }, rate, weight: 0.0 });
                }
            }
            if theta > 0.0 {
                let cands = &mut self.cands;
                model.mutation.for_each_parent(a, |b, p| {
                    let anc = if b == a { ha } else { h.count(b) + 1 };
                    let rate = theta * anc as f64 * p;
                    if rate > 0.0 {
                        cands.push(Candidate {
                            event: BackwardEvent::Mutation { child: a, parent: b },
                            rate,
                            weight: 0.0,
                        });
                    }
                });
            }
        }
    }

    /// Turn log weights stored in `weight` into max-shifted linear weights.
    fn exp_shift(&mut self) {
        let max = self.cands.iter().map(|c| c.weight).fold(f64::NEG_INFINITY, f64::max);
        for c in &mut self.cands {
            c.weight = if max.is_finite() { exp(c.weight - max) } else { 0.0 };
        }
    }

    fn weigh_pcl(&mut self, h: &AlleleConfig, u: f64, model: &Model, beta_q: f64) {
        let ctx = PclContext::new(model.demography.theta_at(u));
        let idx = DistanceIndex::new(h);
        let n = h.total() as f64;
        let scale = |d: f64| if d == 0.0 { 0.0 } else { d * ctx.log_rho };
        for c in &mut self.cands {
            let delta = match c.event {
                BackwardEvent::Coalescence { allele } => {
                    -(n - 1.0) * ctx.log_norm - scale(idx.distance_to(allele))
                }
                BackwardEvent::Mutation { child, parent } => {
                    if child == parent {
                        0.0
                    } else {
                        let to_parent = idx.distance_to(parent) - parent.abs_diff(child) as f64;
                        scale(to_parent) - scale(idx.distance_to(child))
                    }
                }
            };
            c.weight = ln(c.rate) + beta_q * delta / (n - 1.0);
        }
        self.exp_shift();
    }

    fn weigh_csd_pim(&mut self, h: &AlleleConfig, u: f64, model: &Model, psi: &[f64]) {
        let theta_c = model.demography.theta_at(u);
        let n = h.total() as f64;
        let den = n - 1.0 + theta_c;
        // π̂(x | h − e_child)
        let pi = |x: u32, child: u32| {
            let g = h.count(x) as f64 - if x == child { 1.0 } else { 0.0 };
            (g + theta_c * psi[x as usize - 1]) / den
        };
        for c in &mut self.cands {
            let ratio = match c.event {
                BackwardEvent::Coalescence { allele } => h.count(allele) as f64 / n / pi(allele, allele),
                BackwardEvent::Mutation { child, parent } => {
                    if child == parent {
                        1.0
                    } else {
                        h.count(child) as f64 / (h.count(parent) + 1) as f64 * pi(parent, child) / pi(child, child)
                    }
                }
            };
            c.weight = c.rate * ratio;
        }
    }

    /// Linear-space conditional-sampling weights for the stepwise model.
    /// Returns `false` when a needed sum underflows.
    fn weigh_csd_smm(&mut self, h: &AlleleConfig, u: f64, model: &Model) -> bool {
        let entries = h.entries();
        let m = entries.len();
        let n = h.total() as f64;
        let theta_g = model.demography.theta_at(u) / (n - 1.0);
        let r = rho(theta_g);
        let norm = 1.0 / (sqrt(1.0 + 2.0 * theta_g) * (n - 1.0));
        // strict left and right sums Σ h(B) ρ^{|x_i − B|}
        self.left.clear();
        self.left.resize(m, 0.0);
        self.right.clear();
        self.right.resize(m, 0.0);
        for i in 1..m {
            let gap = (entries[i].0 - entries[i - 1].0) as i32;
            self.left[i] = (self.left[i - 1] + entries[i - 1].1 as f64) * powi(r, gap);
        }
        for i in (0..m.saturating_sub(1)).rev() {
            let gap = (entries[i + 1].0 - entries[i].0) as i32;
            self.right[i] = (self.right[i + 1] + entries[i + 1].1 as f64) * powi(r, gap);
        }
        let (left, right) = (&self.left, &self.right);
        // Σ_B g(B) ρ^{|x − B|} for g = h − e_{x_i}, x = x_i + s
        let t = |i: usize, s: i32| -> f64 {
            let mid = (entries[i].1 - 1) as f64;
            match s {
                0 => left[i] + right[i] + mid,
                1 => left[i] * r + right[i] / r + mid * r,
                _ => left[i] / r + right[i] * r + mid * r,
            }
        };
        for c in self.cands.iter_mut() {
            let ratio = match c.event {
                BackwardEvent::Coalescence { allele } => {
                    let i = index_of(entries, allele);
                    entries[i].1 as f64 / n / (norm * t(i, 0))
                }
                BackwardEvent::Mutation { child, parent } => {
                    if child == parent {
                        1.0
                    } else {
                        let i = index_of(entries, child);
                        let here = t(i, 0);
                        if here < 1e-280 {
                            return false;
                        }
                        let s = if parent > child { 1 } else { -1 };
                        entries[i].1 as f64 / (h.count(parent) + 1) as f64 * t(i, s) / here
                    }
                }
            };
            if !ratio.is_finite() {
                return false;
            }
            c.weight = c.rate * ratio;
        }
        true
    }

    /// Log-space fallback of [`Self::weigh_csd_smm`] for extremely spread
    /// configurations.
    fn weigh_csd_smm_log(&mut self, h: &AlleleConfig, u: f64, model: &Model) {
        let entries = h.entries();
        let m = entries.len();
        let n = h.total() as f64;
        let theta_g = model.demography.theta_at(u) / (n - 1.0);
        let lr = ln(rho(theta_g));
        let log_norm = -0.5 * ln(1.0 + 2.0 * theta_g) - ln(n - 1.0);
        self.left.clear();
        self.left.resize(m, f64::NEG_INFINITY);
        self.right.clear();
        self.right.resize(m, f64::NEG_INFINITY);
        for i in 1..m {
            let gap = (entries[i].0 - entries[i - 1].0) as f64;
            let prev = log_add(self.left[i - 1], ln(entries[i - 1].1 as f64));
            self.left[i] = prev + gap * lr;
        }
        for i in (0..m.saturating_sub(1)).rev() {
            let gap = (entries[i + 1].0 - entries[i].0) as f64;
            let next = log_add(self.right[i + 1], ln(entries[i + 1].1 as f64));
            self.right[i] = next + gap * lr;
        }
        let (left, right) = (&self.left, &self.right);
        let log_t = |i: usize, s: i32| -> f64 {
            let hi = entries[i].1;
            let mid = if hi > 1 { ln((hi - 1) as f64) + if s == 0 { 0.0 } else { lr } } else { f64::NEG_INFINITY };
            let (l, r) = if s == 0 {
                (left[i], right[i])
            } else {
                (left[i] + s as f64 * lr, right[i] - s as f64 * lr)
            };
            log_add(log_add(l, r), mid)
        };
        for c in &mut self.cands {
            let ratio = match c.event {
                BackwardEvent::Coalescence { allele } => {
                    let i = index_of(entries, allele);
                    ln(entries[i].1 as f64 / n) - (log_norm + log_t(i, 0))
                }
                BackwardEvent::Mutation { child, parent } => {
                    if child == parent {
                        0.0
                    } else {
                        let i = index_of(entries, child);
                        let s = if parent > child { 1 } else { -1 };
                        ln(entries[i].1 as f64 / (h.count(parent) + 1) as f64) + log_t(i, s) - log_t(i, 0)
                    }
                }
            };
            c.weight = ln(c.rate) + ratio;
        }
        self.exp_shift();
    }
}

#[inline]
fn powi(mut x: f64, mut k: i32) -> f64 {
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= x;
        }
        x *= x;
        k >>= 1;
    }
    acc
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + ln1p(exp(b - a))
    } else {
        b + ln1p(exp(a - b))
    }
}

#[inline]
fn index_of(entries: &[(u32, u32)], allele: u32) -> usize {
    entries.binary_search_by_key(&allele, |e| e.0).unwrap_or(0)
}

/// `Σ_C h(C)|x − C|` in `O(log m)` per query after an `O(m)` build.
struct DistanceIndex<'a> {
    entries: &'a [(u32, u32)],
    cnt: Vec<f64>,
    sum: Vec<f64>,
}

impl<'a> DistanceIndex<'a> {
    fn new(h: &'a AlleleConfig) -> Self {
        let entries = h.entries();
        let mut cnt = Vec::with_capacity(entries.len() + 1);
        let mut sum = Vec::with_capacity(entries.len() + 1);
        cnt.push(0.0);
        sum.push(0.0);
        for &(a, c) in entries {
            cnt.push(cnt[cnt.len() - 1] + c as f64);
            sum.push(sum[sum.len() - 1] + c as f64 * a as f64);
        }
        Self { entries, cnt, sum }
    }

    fn distance_to(&self, x: u32) -> f64 {
        let k = self.entries.partition_point(|e| e.0 <= x);
        let m = self.entries.len();
        let xf = x as f64;
        let below = xf * self.cnt[k] - self.sum[k];
        let above = (self.sum[m] - self.sum[k]) - xf * (self.cnt[m] - self.cnt[k]);
        below + above
    }
}

/// Draw one event from the proposal; returns the event and its log
/// probability.
pub fn propose<R: RngCore + ?Sized>(
    h: &AlleleConfig,
    u: f64,
    kind: ProposalKind,
    model: &Model,
    rng: &mut R,
) -> Result<(BackwardEvent, f64)> {
    let mut p = Proposer::new(kind, model)?;
    let s = p.step(h, u, model, rng)?;
    Ok((s.event, s.log_q))
}

/// The normalized proposal distribution as `(event, probability)` pairs.
pub fn proposal_distribution(
    h: &AlleleConfig,
    u: f64,
    kind: ProposalKind,
    model: &Model,
) -> Result<Vec<(BackwardEvent, f64)>> {
    let mut p = Proposer::new(kind, model)?;
    Ok(p.distribution(h, u, model)?.iter().map(|c| (c.event, c.weight)).collect())
}

/// `ln(Λ_u(h|a) / λ*_u(h)) − ln Q_u(a|h)` for the ancestor reached by
/// `event`.
pub fn log_weight_increment(
    h: &AlleleConfig,
    event: &BackwardEvent,
    u: f64,
    kind: ProposalKind,
    model: &Model,
) -> Result<f64> {
    h.check_event(event)?;
    let mut p = Proposer::new(kind, model)?;
    let cands = p.distribution(h, u, model)?;
    let c = cands.iter().find(|c| c.event == *event).ok_or(Error::ZeroProposal)?;
    Ok(model.log_target(h, event, u) - ln(c.weight))
}
