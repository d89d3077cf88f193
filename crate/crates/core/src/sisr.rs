//! Particle collections with checkpointed, ESS-triggered resampling.

use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::math::{exp, ln, log_sum_exp};
use crate::model::{AlleleConfig, Model};
use crate::pcl::PclContext;
use crate::proposal::ProposalKind;
use crate::rng::{substream, tag, uniform, Stream};
use crate::sis::{estimate_sis, EstimateResult, Particle, SisConfig, Stepper};
use crate::timing::TimingStrategy;

/// What counts towards the next checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckpointMode {
    #[default]
    ByCoalescences,
    ByEvents,
}

impl CheckpointMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ByCoalescences => "coal",
            Self::ByEvents => "event",
        }
    }
}

impl core::str::FromStr for CheckpointMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coal" => Ok(Self::ByCoalescences),
            "event" => Ok(Self::ByEvents),
            _ => Err(invalid("checkpoint mode must be coal or event")),
        }
    }
}

/// A checkpoint is reached after `k` events of the chosen kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointPolicy {
    pub mode: CheckpointMode,
    pub k: u32,
}

impl CheckpointPolicy {
    pub fn new(mode: CheckpointMode, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(invalid("checkpoint k must be at least 1"));
        }
        Ok(Self { mode, k })
    }
}

impl Default for CheckpointPolicy {
    fn default() -> Self {
        Self { mode: CheckpointMode::ByCoalescences, k: 1 }
    }
}

/// Resampling distribution `v ∝ w^α · L2(h)^β` and trigger
/// `ESS₊ < ESS₋ / ess_divisor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResamplingParams {
    pub alpha: f64,
    pub beta: f64,
    pub ess_divisor: f64,
}

impl ResamplingParams {
    pub fn new(alpha: f64, beta: f64, ess_divisor: f64) -> Result<Self> {
        let p = Self { alpha, beta, ess_divisor };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta must lie in [0, 1]"));
        }
        if !(self.ess_divisor > 0.0) {
            return Err(invalid("ess divisor must be positive"));
        }
        Ok(())
    }

    /// Parameters under which the trigger never fires.
    pub fn never() -> Self {
        Self { ess_divisor: f64::INFINITY, ..Self::default() }
    }
}

impl Default for ResamplingParams {
    fn default() -> Self {
        Self { alpha: 0.7, beta: 0.01, ess_divisor: 10.0 }
    }
}

/// `(Σw)² / Σw²` from log weights.
pub fn ess(log_w: &[f64]) -> Result<f64> {
    if log_w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Underflow);
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &x in log_w {
        let w = exp(x - max);
        s1 += w;
        s2 += w * w;
    }
    let n = log_w.len() as f64;
    Ok((s1 * s1 / s2).clamp(1.0, n))
}

/// Log resampling probabilities from log weights and log composite
/// likelihoods.
pub fn log_resampling_probs(log_w: &[f64], log_pcl: &[f64], rp: &ResamplingParams) -> Result<Vec<f64>> {
    if log_w.len() != log_pcl.len() {
        return Err(invalid("weights and configurations differ in length"));
    }
    if log_w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut lv: Vec<f64> = log_w
        .iter()
        .zip(log_pcl)
        .map(|(&w, &l)| scaled(rp.alpha, w) + scaled(rp.beta, l))
        .collect();
    let z = log_sum_exp(&lv);
    if !z.is_finite() {
        return Err(Error::Underflow);
    }
    for x in &mut lv {
        *x -= z;
    }
    Ok(lv)
}

#[inline]
fn scaled(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * x
    }
}

/// Resampling probabilities `v` for a collection.
pub fn resampling_distribution(
    log_w: &[f64],
    configs: &[AlleleConfig],
    rp: &ResamplingParams,
    ctx: &PclContext,
) -> Result<Vec<f64>> {
    let lp: Vec<f64> = configs.iter().map(|h| ctx.log_pcl(h)).collect();
    Ok(log_resampling_probs(log_w, &lp, rp)?.into_iter().map(exp).collect())
}

/// Multinomial draw of `n` indices from `v` (ascending order).
pub fn multinomial_indices<R: RngCore + ?Sized>(v: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut cum = Vec::with_capacity(v.len());
    let mut s = 0.0;
    for &p in v {
        s += p;
        cum.push(s);
    }
    let mut out: Vec<usize> = (0..n)
        .map(|_| {
            let x = uniform(rng) * s;
            let mut i = cum.partition_point(|&c| c <= x).min(v.len() - 1);
            while v[i] == 0.0 && i > 0 {
                i -= 1;
            }
            i
        })
        .collect();
    out.sort_unstable();
    out
}

/// Resample a collection with probabilities `v`; each new particle is a copy
/// of its ancestor with weight `w_J / (n · v_J)`.
pub fn resample<R: RngCore + ?Sized>(collection: &[Particle], v: &[f64], rng: &mut R) -> Result<Vec<Particle>> {
    if collection.len() != v.len() {
        return Err(invalid("collection and distribution differ in length"));
    }
    let n = collection.len();
    let lv: Vec<f64> = v.iter().map(|&p| ln(p)).collect();
    let picks = multinomial_indices(v, n, rng);
    Ok(picks
        .into_iter()
        .map(|j| {
            let mut p = collection[j].clone();
            p.log_w = p.log_w - lv[j] - ln(n as f64);
            p
        })
        .collect())
}

/// One checkpoint of a SISR run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRecord {
    pub index: usize,
    pub ess_plus: f64,
    /// The reference ESS the trigger compared against.
    pub ess_minus: f64,
    pub resampled: bool,
    /// Particles still above the MRCA at this checkpoint.
    pub active: usize,
    /// Smallest and largest lineage count among active particles.
    pub lineages: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SisrDiagnostics {
    pub checkpoints: Vec<CheckpointRecord>,
    pub resample_count: usize,
}

/// Per-particle streams plus one collective stream for resampling draws.
fn particle_streams(seed: u64, n: usize) -> (Vec<Stream>, Stream) {
    let streams = (0..n).map(|j| substream(seed, &[tag::PARTICLE, j as u64])).collect();
    (streams, substream(seed, &[tag::RESAMPLE]))
}

/// SISR estimate of the likelihood of `h0`.
pub fn estimate_sisr(
    h0: &AlleleConfig,
    model: &Model,
    cfg: &SisConfig,
    n_h: usize,
    policy: &CheckpointPolicy,
    rp: &ResamplingParams,
    seed: u64,
) -> Result<EstimateResult> {
    if n_h == 0 {
        return Err(Error::NoReplicates);
    }
    if policy.k == 0 {
        return Err(invalid("checkpoint k must be at least 1"));
    }
    rp.validate()?;
    let mut stepper = Stepper::new(model, cfg)?;
    let ctx = PclContext::new(model.demography.theta_ancestral());
    let (mut rngs, mut collective) = particle_streams(seed, n_h);
    let mut particles: Vec<Particle> = (0..n_h).map(|_| Particle::new(h0.clone(), model)).collect();
    let mut diag = SisrDiagnostics::default();
    let mut ess_minus = n_h as f64;
    let mut active: Vec<usize> = Vec::with_capacity(n_h);
    let mut lw = Vec::with_capacity(n_h);
    let mut lp = Vec::with_capacity(n_h);
    loop {
        for (p, rng) in particles.iter_mut().zip(rngs.iter_mut()) {
            let mut control = 0;
            while !p.is_done() && control < policy.k {
                let e = stepper.advance(p, rng)?;
                if policy.mode == CheckpointMode::ByEvents || e.is_coalescence() {
                    control += 1;
                }
            }
        }
        active.clear();
        active.extend((0..n_h).filter(|&j| !particles[j].is_done()));
        if active.is_empty() {
            break;
        }
        lw.clear();
        lw.extend(active.iter().map(|&j| particles[j].log_w));
        let ess_plus = ess(&lw)?;
        let fire = ess_plus < ess_minus / rp.ess_divisor;
        let lineages = active.iter().map(|&j| particles[j].config.total()).fold((u32::MAX, 0), |(lo, hi), n| (lo.min(n), hi.max(n)));
        diag.checkpoints.push(CheckpointRecord {
            index: diag.checkpoints.len(),
            ess_plus,
            ess_minus,
            resampled: fire,
            active: active.len(),
            lineages,
        });
        if !fire {
            continue;
        }
        lp.clear();
        if rp.beta != 0.0 {
            lp.extend(active.iter().map(|&j| ctx.log_pcl(&particles[j].config)));
        } else {
            lp.resize(active.len(), 0.0);
        }
        let lv = log_resampling_probs(&lw, &lp, rp)?;
        let v: Vec<f64> = lv.iter().map(|&x| exp(x)).collect();
        let lz = log_sum_exp(
            &lw.iter().zip(&lp).map(|(&w, &l)| scaled(rp.alpha, w) + scaled(rp.beta, l)).collect::<Vec<_>>(),
        );
        let picks = multinomial_indices(&v, active.len(), &mut collective);
        let log_n = ln(active.len() as f64);
        let fresh: Vec<Particle> = picks
            .iter()
            .map(|&i| {
                let mut p = particles[active[i]].clone();
                // w/(n v) with v = w^α L^β / Z, arranged so that α = 1, β = 0
                // yields bit-identical weights
                p.log_w = scaled(1.0 - rp.alpha, lw[i]) - scaled(rp.beta, lp[i]) + lz - log_n;
                p
            })
            .collect();
        for (&slot, p) in active.iter().zip(fresh) {
            particles[slot] = p;
        }
        lw.clear();
        lw.extend(active.iter().map(|&j| particles[j].log_w));
        ess_minus = ess(&lw)?;
        diag.resample_count += 1;
    }
    let finals: Vec<f64> = particles.iter().map(|p| p.log_w).collect();
    let mut r = EstimateResult::from_log_weights(&finals)?;
    r.diagnostics = Some(diag);
    Ok(r)
}

/// Plain or resampled estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Sis,
    Sisr { policy: CheckpointPolicy, params: ResamplingParams },
}

impl Mode {
    pub fn sisr_default() -> Self {
        Self::Sisr { policy: CheckpointPolicy::default(), params: ResamplingParams::default() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sis => "sis",
            Self::Sisr { .. } => "sisr",
        }
    }
}

/// Everything needed to estimate one locus likelihood at one parameter
/// point, apart from the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub n_h: usize,
    pub sampler: SisConfig,
    pub mode: Mode,
}

impl EstimatorConfig {
    pub fn sis(n_h: usize, proposal: ProposalKind) -> Self {
        Self { n_h, sampler: SisConfig::new(proposal, TimingStrategy::InverseCdf), mode: Mode::Sis }
    }

    pub fn sisr(n_h: usize, proposal: ProposalKind) -> Self {
        Self { mode: Mode::sisr_default(), ..Self::sis(n_h, proposal) }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

/// Estimate with either mode. The executor is only used by plain SIS, whose
/// histories are independent.
pub fn estimate<E: Executor + ?Sized>(
    h0: &AlleleConfig,
    model: &Model,
    cfg: &EstimatorConfig,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    match cfg.mode {
        Mode::Sis => estimate_sis(h0, model, &cfg.sampler, cfg.n_h, seed, exec),
        Mode::Sisr { policy, params } => estimate_sisr(h0, model, &cfg.sampler, cfg.n_h, &policy, &params, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::model::{DemographyModel, MutationModel, ScaledParams};

    #[test]
    fn ess_examples() {
        assert_eq!(ess(&[0.5; 100]).unwrap(), 100.0);
        let mut v = alloc::vec![0.0; 100];
        v[3] = (1e12f64).ln();
        assert!((ess(&v).unwrap() - 1.0).abs() < 1e-6);
        let r = ess(&[0.0, 2f64.ln()]).unwrap();
        assert!((r - 1.8).abs() < 1e-14);
        assert!(ess(&[]).is_err());
    }

    #[test]
    fn distribution_examples() {
        let lw = [1f64.ln(), 4f64.ln()];
        let lp = [0.0, 0.0];
        let half = ResamplingParams::new(0.5, 0.0, 10.0).unwrap();
        let v: Vec<f64> = log_resampling_probs(&lw, &lp, &half).unwrap().into_iter().map(f64::exp).collect();
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15 && (v[1] - 2.0 / 3.0).abs() < 1e-15);
        let flat = ResamplingParams::new(0.0, 0.0, 10.0).unwrap();
        let v: Vec<f64> = log_resampling_probs(&lw, &lp, &flat).unwrap().into_iter().map(f64::exp).collect();
        assert_eq!(v, alloc::vec![0.5, 0.5]);
    }

    #[test]
    fn single_particle_resample_keeps_weight() {
        let m = Model::new(DemographyModel::constant(1.0).unwrap(), MutationModel::smm(10).unwrap());
        let mut p = Particle::new(AlleleConfig::from_counts(10, [(3, 2)]).unwrap(), &m);
        p.log_w = -3.25;
        let mut rng = substream(1, &[]);
        let out = resample(&[p.clone()], &[1.0], &mut rng).unwrap();
        assert_eq!(out, alloc::vec![p]);
    }

    #[test]
    fn never_trigger_matches_sis_bitwise() {
        let m = Model::smm_contraction(ScaledParams::new(0.4, 0.25, 40.0).unwrap(), 200).unwrap();
        let h = AlleleConfig::from_counts(200, [(100, 5), (101, 3), (104, 2)]).unwrap();
        let cfg = SisConfig::default();
        let a = estimate_sis(&h, &m, &cfg, 40, 11, &Sequential).unwrap();
        for mode in [CheckpointMode::ByCoalescences, CheckpointMode::ByEvents] {
            let pol = CheckpointPolicy::new(mode, 2).unwrap();
            let b = estimate_sisr(&h, &m, &cfg, 40, &pol, &ResamplingParams::never(), 11).unwrap();
            assert_eq!(a.log_lik.to_bits(), b.log_lik.to_bits());
            assert_eq!(b.diagnostics.unwrap().resample_count, 0);
        }
    }
}
