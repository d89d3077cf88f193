//! Single histories and the plain importance-sampling estimator.

use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::exec::{try_map, Executor};
use crate::math::{exp, ln, log_mean_exp, log_se_of_mean_exp, log_sum_exp};
use crate::model::{AlleleConfig, BackwardEvent, Model};
use crate::proposal::{ProposalKind, Proposer};
use crate::rng::{substream, tag};
use crate::timing::{HoldingSampler, TimingStrategy};

/// Per-history sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SisConfig {
    pub proposal: ProposalKind,
    pub timing: TimingStrategy,
}

impl SisConfig {
    pub fn new(proposal: ProposalKind, timing: TimingStrategy) -> Self {
        Self { proposal, timing }
    }
}

/// One partial history.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub config: AlleleConfig,
    pub u: f64,
    /// Log importance weight; includes `ln ψ` of the root once the MRCA is
    /// reached.
    pub log_w: f64,
    pub n_coal: u32,
    pub n_events: u32,
}

impl Particle {
    pub fn new(h0: AlleleConfig, model: &Model) -> Self {
        let mut p = Self { config: h0, u: 0.0, log_w: 0.0, n_coal: 0, n_events: 0 };
        if let Some(a) = p.config.mrca_allele() {
            p.log_w = ln(model.mutation.stationary(a));
        }
        p
    }

    #[inline]
    pub fn is_done(&self) -> bool {
        self.config.total() <= 1
    }
}

/// Advances particles one event at a time. Owns the proposal scratch space.
#[derive(Debug, Clone)]
pub struct Stepper<'m> {
    model: &'m Model,
    sampler: HoldingSampler,
    proposer: Proposer,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m Model, cfg: &SisConfig) -> Result<Self> {
        Ok(Self {
            model,
            sampler: HoldingSampler::new(cfg.timing, model.demography),
            proposer: Proposer::new(cfg.proposal, model)?,
        })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// Holding time, proposed event, weight update and state update.
    pub fn advance<R: RngCore + ?Sized>(&mut self, p: &mut Particle, rng: &mut R) -> Result<BackwardEvent> {
        if p.is_done() {
            return Err(Error::MrcaReached);
        }
        let delta = self.sampler.sample(p.config.total(), p.u, rng)?;
        p.u += delta;
        let step = self.proposer.step(&p.config, p.u, self.model, rng)?;
        p.log_w += step.log_increment();
        p.config.apply_mut(&step.event)?;
        p.n_events += 1;
        if step.event.is_coalescence() {
            p.n_coal += 1;
        }
        if let Some(a) = p.config.mrca_allele() {
            p.log_w += ln(self.model.mutation.stationary(a));
        }
        Ok(step.event)
    }

    /// Run until the MRCA.
    pub fn finish<R: RngCore + ?Sized>(
        &mut self,
        p: &mut Particle,
        rng: &mut R,
        mut trace: Option<&mut Vec<TracePoint>>,
    ) -> Result<()> {
        while !p.is_done() {
            let e = self.advance(p, rng)?;
            if e.is_coalescence() {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TracePoint { u: p.u, lineages: p.config.total(), log_w: p.log_w });
                }
            }
        }
        Ok(())
    }
}

/// State of a history right after a coalescence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub u: f64,
    pub lineages: u32,
    pub log_w: f64,
}

/// Simulate one complete history and return its final log weight.
pub fn run_history<R: RngCore + ?Sized>(
    h0: &AlleleConfig,
    model: &Model,
    cfg: &SisConfig,
    rng: &mut R,
    trace: Option<&mut Vec<TracePoint>>,
) -> Result<f64> {
    let mut stepper = Stepper::new(model, cfg)?;
    let mut p = Particle::new(h0.clone(), model);
    stepper.finish(&mut p, rng, trace)?;
    Ok(p.log_w)
}

/// Likelihood estimate aggregated from final log weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Log of the mean final weight.
    pub log_lik: f64,
    /// Log of the standard error of the mean weight; `None` for one
    /// replicate.
    pub log_se: Option<f64>,
    /// ESS of the final weights.
    pub ess_final: f64,
    pub n_h: usize,
    pub diagnostics: Option<crate::sisr::SisrDiagnostics>,
}

impl EstimateResult {
    pub fn from_log_weights(log_w: &[f64]) -> Result<Self> {
        if log_w.is_empty() {
            return Err(Error::NoReplicates);
        }
        Ok(Self {
            log_lik: log_mean_exp(log_w),
            log_se: log_se_of_mean_exp(log_w),
            ess_final: crate::sisr::ess(log_w)?,
            n_h: log_w.len(),
            diagnostics: None,
        })
    }

    /// Standard error of `log_lik` by the delta method.
    pub fn se_log(&self) -> Option<f64> {
        self.log_se.map(|s| exp(s - self.log_lik))
    }

    pub fn likelihood(&self) -> f64 {
        exp(self.log_lik)
    }
}

const CHUNK: usize = 256;

/// Final log weights of `n_h` independent histories; history `j` uses the
/// stream `[PARTICLE, j]` under `seed`.
pub fn sis_log_weights<E: Executor + ?Sized>(
    h0: &AlleleConfig,
    model: &Model,
    cfg: &SisConfig,
    n_h: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<f64>> {
    if n_h == 0 {
        return Err(Error::NoReplicates);
    }
    let chunks = n_h.div_ceil(CHUNK);
    let parts = try_map(exec, chunks, |c| {
        let mut stepper = Stepper::new(model, cfg)?;
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n_h);
        let mut out = Vec::with_capacity(hi - lo);
        for j in lo..hi {
            let mut rng = substream(seed, &[tag::PARTICLE, j as u64]);
            let mut p = Particle::new(h0.clone(), model);
            stepper.finish(&mut p, &mut rng, None)?;
            out.push(p.log_w);
        }
        Ok(out)
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Plain SIS estimate of the likelihood of `h0`.
pub fn estimate_sis<E: Executor + ?Sized>(
    h0: &AlleleConfig,
    model: &Model,
    cfg: &SisConfig,
    n_h: usize,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    let lw = sis_log_weights(h0, model, cfg, n_h, seed, exec)?;
    EstimateResult::from_log_weights(&lw)
}

/// One row of a weight-trajectory table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub replicate: usize,
    /// 1-based index of the coalescence.
    pub coal_index: usize,
    pub u: f64,
    /// Log weight minus the log of the sum over replicates at this index.
    pub norm_log_weight: f64,
}

/// Per-coalescence log weights of `n_h` histories, normalized across
/// replicates at each coalescence index.
pub fn weight_trajectory(
    h0: &AlleleConfig,
    model: &Model,
    cfg: &SisConfig,
    n_h: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRow>> {
    if n_h < 2 {
        return Err(crate::error::invalid("a trajectory needs at least two replicates"));
    }
    let mut stepper = Stepper::new(model, cfg)?;
    let mut traces = Vec::with_capacity(n_h);
    for j in 0..n_h {
        let mut rng = substream(seed, &[tag::PARTICLE, j as u64]);
        let mut p = Particle::new(h0.clone(), model);
        let mut t = Vec::new();
        stepper.finish(&mut p, &mut rng, Some(&mut t))?;
        traces.push(t);
    }
    let steps = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let mut rows = Vec::with_capacity(steps * n_h);
    let mut col = Vec::with_capacity(n_h);
    for k in 0..steps {
        col.clear();
        col.extend(traces.iter().map(|t| t[k].log_w));
        let z = log_sum_exp(&col);
        for (j, t) in traces.iter().enumerate() {
            rows.push(TrajectoryRow { replicate: j, coal_index: k + 1, u: t[k].u, norm_log_weight: t[k].log_w - z });
        }
    }
    Ok(rows)
}
