//! Exact small-instance oracles and the evaluation experiments.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::datasim::{simulate_dataset, Dataset};
use crate::error::{invalid, Error, Result};
use crate::exec::{try_map, Executor, Sequential};
use crate::inference::{infer, InferenceConfig, Interval};
use crate::math::{exp, log_mean_exp, log_se_of_mean_exp, solve_dense, sqrt};
use crate::model::{AlleleConfig, BackwardEvent, DemographyModel, Model, MutationModel, ScaledParams};
use crate::rng::{derive, tag};
use crate::sisr::{estimate, EstimatorConfig};
use crate::stats::{ks_uniform, KsTest};

/// Default cap on the number of configurations at one lineage count.
pub const DP_STATE_LIMIT: usize = 1500;

fn level_states(k: u32, n: u32, limit: usize) -> Result<Vec<AlleleConfig>> {
    // number of compositions of n into k parts, guarded before enumerating
    let mut count: f64 = 1.0;
    for i in 1..k as u64 {
        count = count * (n as u64 + i) as f64 / i as f64;
    }
    if count > limit as f64 {
        return Err(Error::StateSpaceTooLarge { states: count as usize, limit });
    }
    let mut out = Vec::new();
    let mut counts = vec![0u32; k as usize];
    fn rec(i: usize, left: u32, counts: &mut Vec<u32>, k: u32, out: &mut Vec<AlleleConfig>) {
        if i + 1 == counts.len() {
            counts[i] = left;
            let pairs = counts.iter().enumerate().map(|(a, &c)| (a as u32 + 1, c));
            out.push(AlleleConfig::from_counts(k, pairs).expect("non-empty level"));
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, k, out);
        }
    }
    rec(0, n, &mut counts, k, &mut out);
    Ok(out)
}

/// Exact probability of the unordered configuration `h0` under a constant
/// population size, by solving the backward recursion one lineage level at a
/// time. Levels with more than `limit` configurations are refused.
pub fn exact_likelihood_dp_limited(h0: &AlleleConfig, theta: f64, mutation: &MutationModel, limit: usize) -> Result<f64> {
    if h0.k() != mutation.k() {
        return Err(invalid("configuration and mutation model disagree on K"));
    }
    let model = Model::new(DemographyModel::constant(theta)?, mutation.clone());
    let k = h0.k();
    let n = h0.total();
    if n == 1 {
        return Ok(mutation.stationary(h0.entries()[0].0));
    }
    let mut below: BTreeMap<AlleleConfig, f64> = BTreeMap::new();
    for a in 1..=k {
        below.insert(AlleleConfig::single(k, a)?, mutation.stationary(a));
    }
    for m in 2..=n {
        let states = level_states(k, m, limit)?;
        let index: BTreeMap<&AlleleConfig, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let s = states.len();
        let mut a = vec![0.0; s * s];
        let mut rhs = vec![0.0; s];
        for (i, h) in states.iter().enumerate() {
            a[i * s + i] += 1.0;
            let hold = model.holding_rate(h, 0.0);
            for ev in backward_events(h, mutation) {
                let p = model.ancestral_rate(h, &ev, 0.0) / hold;
                if p == 0.0 {
                    continue;
                }
                let anc = h.apply(&ev)?;
                if ev.is_coalescence() {
                    rhs[i] += p * below[&anc];
                } else {
                    a[i * s + index[&anc]] -= p;
                }
            }
        }
        solve_dense(&mut a, &mut rhs, s, 1e-14).ok_or_else(|| invalid("singular level system"))?;
        below = states.into_iter().zip(rhs).collect();
    }
    Ok(below[h0])
}

/// [`exact_likelihood_dp_limited`] with the default state limit.
pub fn exact_likelihood_dp(h0: &AlleleConfig, theta: f64, mutation: &MutationModel) -> Result<f64> {
    exact_likelihood_dp_limited(h0, theta, mutation, DP_STATE_LIMIT)
}

fn backward_events(h: &AlleleConfig, mutation: &MutationModel) -> Vec<BackwardEvent> {
    let mut out = Vec::new();
    for &(a, c) in h.entries() {
        if c >= 2 {
            out.push(BackwardEvent::Coalescence { allele: a });
        }
        mutation.for_each_parent(a, |b, _| out.push(BackwardEvent::Mutation { child: a, parent: b }));
    }
    out
}

/// Closed-form probability of an unordered configuration under
/// parent-independent mutation and constant size.
pub fn pim_closed_form(h: &AlleleConfig, theta: f64, psi: &[f64]) -> f64 {
    let n = h.total() as f64;
    let mut lp = libm::lgamma(n + 1.0) + libm::lgamma(theta) - libm::lgamma(theta + n);
    for &(a, c) in h.entries() {
        let tp = theta * psi[a as usize - 1];
        lp += libm::lgamma(tp + c as f64) - libm::lgamma(tp) - libm::lgamma(c as f64 + 1.0);
    }
    exp(lp)
}

/// Probability of the unordered two-gene configuration `{x, y}` under the
/// unbounded stepwise model with uniform root distribution `1/k`.
pub fn two_gene_smm(x: u32, y: u32, theta: f64, k: u32) -> f64 {
    let ctx = crate::pcl::PclContext::new(theta);
    let l2 = exp(ctx.log_pair_likelihood(x, y));
    let mult = if x == y { 1.0 } else { 2.0 };
    mult * l2 / k as f64
}

/// Relative bias and relative RMSE of estimates of a positive quantity.
pub fn bias_rmse(estimates: &[f64], truth: f64) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(truth > 0.0) {
        return Err(invalid("truth must be positive"));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let mse = estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / n;
    Ok(((mean - truth) / truth, sqrt(mse) / truth))
}

/// Mean of squared relative errors `((L̂ − L)/L)²` with `L̂` given on the
/// log scale.
pub fn relative_mse(log_estimates: &[f64], log_reference: f64) -> Result<f64> {
    if log_estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = log_estimates.len() as f64;
    Ok(log_estimates
        .iter()
        .map(|&l| {
            let r = exp(l - log_reference) - 1.0;
            r * r
        })
        .sum::<f64>()
        / n)
}

/// A simulation scenario and the amount of replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScaledParams,
    pub mutation: MutationModel,
    pub sample_size: u32,
    pub loci: usize,
    pub datasets: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.sample_size == 0 || self.loci == 0 || self.datasets == 0 || self.replicates == 0 {
            return Err(invalid("experiment counts must be at least 1"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Model::new(DemographyModel::contraction(self.scenario)?, self.mutation.clone()))
    }

    pub fn dataset_seed(&self, d: usize) -> u64 {
        derive(self.seed, &[tag::DATASET, d as u64])
    }

    /// Dataset `d` of the experiment.
    pub fn dataset(&self, d: usize) -> Result<Dataset> {
        simulate_dataset(self.loci, self.sample_size, &self.model()?, self.dataset_seed(d))
    }
}

/// A labelled estimator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedEstimator {
    pub label: String,
    pub config: EstimatorConfig,
}

impl NamedEstimator {
    pub fn new(label: impl Into<String>, config: EstimatorConfig) -> Self {
        Self { label: label.into(), config }
    }
}

/// Reference likelihood: the mean of `runs` independent estimates, with a
/// standard error from their spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig {
    pub estimator: EstimatorConfig,
    pub runs: usize,
}

/// Reference value on the log scale with its relative standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub log_lik: f64,
    pub rel_se: f64,
}

pub fn reference_likelihood<E: Executor + ?Sized>(
    h0: &AlleleConfig,
    model: &Model,
    cfg: &ReferenceConfig,
    seed: u64,
    exec: &E,
) -> Result<Reference> {
    if cfg.runs < 2 {
        return Err(invalid("the reference needs at least two runs"));
    }
    let logs = try_map(exec, cfg.runs, |r| {
        estimate(h0, model, &cfg.estimator, derive(seed, &[tag::REFERENCE, r as u64]), &Sequential).map(|e| e.log_lik)
    })?;
    let log_lik = log_mean_exp(&logs);
    let rel_se = log_se_of_mean_exp(&logs).map_or(f64::INFINITY, |s| exp(s - log_lik));
    Ok(Reference { log_lik, rel_se })
}

/// Settings of the MSE-ratio experiment. Each dataset holds one locus.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRatioConfig {
    pub spec: ExperimentSpec,
    pub baseline: NamedEstimator,
    pub candidates: Vec<NamedEstimator>,
    pub reference: ReferenceConfig,
}

/// Replicate estimates on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MseDataset {
    pub dataset: usize,
    pub locus: AlleleConfig,
    pub reference: Reference,
    /// Per configuration (baseline first), the log-likelihood of each
    /// replicate.
    pub log_estimates: Vec<Vec<f64>>,
    /// Per configuration, mean squared relative error against the reference.
    pub rel_mse: Vec<f64>,
}

impl MseDataset {
    /// Ratio of the reference's relative SE to the smallest relative RMSE
    /// among the compared configurations.
    pub fn reference_precision(&self) -> f64 {
        let best = self.rel_mse.iter().cloned().fold(f64::INFINITY, f64::min);
        self.reference.rel_se / sqrt(best)
    }
}

impl MseRatioConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.spec.loci != 1 {
            return Err(invalid("MSE-ratio datasets hold a single locus"));
        }
        Ok(())
    }

    pub fn configs(&self) -> impl Iterator<Item = &NamedEstimator> {
        core::iter::once(&self.baseline).chain(self.candidates.iter())
    }

    /// Run every configuration on dataset `d`. Replicate `r` uses the same
    /// seed under every configuration.
    pub fn run_dataset<E: Executor + ?Sized>(&self, d: usize, exec: &E) -> Result<MseDataset> {
        self.validate()?;
        let model = self.spec.model()?;
        let ds = self.spec.dataset(d)?;
        let locus = ds.loci[0].clone();
        let ds_seed = self.spec.dataset_seed(d);
        let reference = reference_likelihood(&locus, &model, &self.reference, ds_seed, exec)?;
        let configs: Vec<&NamedEstimator> = self.configs().collect();
        let reps = self.spec.replicates;
        let flat = try_map(exec, configs.len() * reps, |job| {
            let (c, r) = (job / reps, job % reps);
            let seed = derive(ds_seed, &[tag::REPLICATE, r as u64]);
            estimate(&locus, &model, &configs[c].config, seed, &Sequential).map(|e| e.log_lik)
        })?;
        let log_estimates: Vec<Vec<f64>> = flat.chunks(reps).map(|c| c.to_vec()).collect();
        let rel_mse = log_estimates.iter().map(|l| relative_mse(l, reference.log_lik)).collect::<Result<_>>()?;
        Ok(MseDataset { dataset: d, locus, reference, log_estimates, rel_mse })
    }
}

/// Per configuration: mean relative MSE over datasets and its ratio to the
/// baseline's.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRatioRow {
    pub label: String,
    pub config: EstimatorConfig,
    pub mean_rel_mse: f64,
    pub ratio: f64,
}

/// Aggregate per-dataset results; rows follow [`MseRatioConfig::configs`].
pub fn mse_ratio_summary(cfg: &MseRatioConfig, runs: &[MseDataset]) -> Result<Vec<MseRatioRow>> {
    if runs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = runs.len() as f64;
    let means: Vec<f64> = (0..=cfg.candidates.len()).map(|c| runs.iter().map(|r| r.rel_mse[c]).sum::<f64>() / n).collect();
    Ok(cfg
        .configs()
        .zip(&means)
        .map(|(e, m)| MseRatioRow { label: e.label.clone(), config: e.config, mean_rel_mse: *m, ratio: m / means[0] })
        .collect())
}

/// Fail when any reference is not at least `1/factor` times more precise
/// than the best compared estimator on its dataset.
pub fn check_references(runs: &[MseDataset], factor: f64) -> Result<()> {
    for r in runs {
        let p = r.reference_precision();
        if !(p < factor) {
            return Err(Error::ImpreciseReference(format!(
                "dataset {}: reference relative SE {:.3e} is {:.3} of the best relative RMSE",
                r.dataset, r.reference.rel_se, p
            )));
        }
    }
    Ok(())
}

/// Full MSE-ratio experiment over all datasets.
pub fn mse_ratio_experiment<E: Executor + ?Sized>(cfg: &MseRatioConfig, exec: &E) -> Result<(Vec<MseDataset>, Vec<MseRatioRow>)> {
    let runs = (0..cfg.spec.datasets).map(|d| cfg.run_dataset(d, exec)).collect::<Result<Vec<_>>>()?;
    let rows = mse_ratio_summary(cfg, &runs)?;
    Ok((runs, rows))
}

/// Settings of the inference calibration experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub spec: ExperimentSpec,
    pub estimator: EstimatorConfig,
    pub inference: InferenceConfig,
}

/// Inference outcome on one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub dataset: usize,
    pub mle: ScaledParams,
    /// LRT p-values at the true parameters, per axis.
    pub pvalues: [f64; 3],
    pub intervals: Vec<Interval>,
}

impl CalibrationConfig {
    pub fn run_dataset<E: Executor + ?Sized>(&self, d: usize, exec: &E) -> Result<CalibrationRow> {
        self.spec.validate()?;
        let ds = self.spec.dataset(d)?;
        let seed = derive(self.spec.dataset_seed(d), &[tag::POINT]);
        let res = infer(&ds, &self.spec.mutation, &self.estimator, &self.inference, seed, exec)?;
        Ok(CalibrationRow { dataset: d, mle: res.mle, pvalues: res.pvalues_at(&self.spec.scenario)?, intervals: res.intervals })
    }
}

/// Per-axis summary: KS test of p-value uniformity, relative bias and
/// relative RMSE of the estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSummary {
    pub ks: [KsTest; 3],
    pub rel_bias: [f64; 3],
    pub rel_rmse: [f64; 3],
    /// Fraction of datasets whose interval covers the truth.
    pub coverage: [f64; 3],
}

pub fn calibration_summary(truth: &ScaledParams, rows: &[CalibrationRow]) -> Result<CalibrationSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut ks = [KsTest { statistic: 0.0, p_value: 1.0, n_eff: 0.0 }; 3];
    let mut rel_bias = [0.0; 3];
    let mut rel_rmse = [0.0; 3];
    let mut coverage = [0.0; 3];
    for i in 0..3 {
        let ps: Vec<f64> = rows.iter().map(|r| r.pvalues[i]).collect();
        ks[i] = ks_uniform(&ps)?;
        let est: Vec<f64> = rows.iter().map(|r| r.mle.get(i)).collect();
        (rel_bias[i], rel_rmse[i]) = bias_rmse(&est, truth.get(i))?;
        coverage[i] = rows.iter().filter(|r| r.intervals[i].contains(truth.get(i))).count() as f64 / rows.len() as f64;
    }
    Ok(CalibrationSummary { ks, rel_bias, rel_rmse, coverage })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dp_single_gene_and_pim() {
        let smm = MutationModel::smm(5).unwrap();
        let h = AlleleConfig::single(5, 2).unwrap();
        assert_eq!(exact_likelihood_dp(&h, 1.0, &smm).unwrap(), 0.2);
        let psi = vec![0.2, 0.3, 0.5];
        let pim = MutationModel::pim(psi.clone()).unwrap();
        for counts in [vec![(1u32, 2u32)], vec![(1, 1), (3, 1)], vec![(1, 2), (2, 1), (3, 2)]] {
            let h = AlleleConfig::from_counts(3, counts).unwrap();
            let dp = exact_likelihood_dp(&h, 0.8, &pim).unwrap();
            let cf = pim_closed_form(&h, 0.8, &psi);
            assert!(((dp - cf) / cf).abs() < 1e-12, "{h:?}: {dp} vs {cf}");
        }
    }

    #[test]
    fn dp_probabilities_sum_to_one() {
        let smm = MutationModel::smm(4).unwrap();
        let total: f64 = level_states(4, 3, 1000)
            .unwrap()
            .iter()
            .map(|h| exact_likelihood_dp(h, 1.3, &smm).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dp_two_genes_matches_pair_law() {
        let k = 41;
        let smm = MutationModel::smm(k).unwrap();
        for d in [0u32, 1, 3] {
            let h = AlleleConfig::from_counts(k, [(21, 1), (21 + d, 1)]).unwrap();
            let dp = exact_likelihood_dp(&h, 1.0, &smm).unwrap();
            let cf = two_gene_smm(21, 21 + d, 1.0, k);
            assert!((dp - cf).abs() < 1e-4 * cf.max(1e-3), "{d}: {dp} vs {cf}");
        }
    }

    #[test]
    fn guard_refuses_large_levels() {
        let smm = MutationModel::smm(200).unwrap();
        let h = AlleleConfig::from_counts(200, [(1, 5)]).unwrap();
        assert!(matches!(exact_likelihood_dp(&h, 1.0, &smm), Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn bias_rmse_examples() {
        assert_eq!(bias_rmse(&[0.4, 0.4], 0.4).unwrap(), (0.0, 0.0));
        let (b, r) = bias_rmse(&[0.3, 0.5], 0.4).unwrap();
        assert!(b.abs() < 1e-15 && (r - 0.25).abs() < 1e-12);
    }

    fn small_mse_config() -> MseRatioConfig {
        let spec = ExperimentSpec {
            scenario: ScaledParams::new(0.4, 0.25, 4.0).unwrap(),
            mutation: MutationModel::smm(60).unwrap(),
            sample_size: 8,
            loci: 1,
            datasets: 2,
            replicates: 6,
            seed: 1,
        };
        let p = crate::ProposalKind::default();
        MseRatioConfig {
            spec,
            baseline: NamedEstimator::new("sis", EstimatorConfig::sis(20, p)),
            candidates: vec![
                NamedEstimator::new("sis-copy", EstimatorConfig::sis(20, p)),
                NamedEstimator::new("sisr", EstimatorConfig::sisr(20, p)),
            ],
            reference: ReferenceConfig { estimator: EstimatorConfig::sis(500, p), runs: 4 },
        }
    }

    #[test]
    fn mse_experiment_shapes_and_identity() {
        let cfg = small_mse_config();
        let (runs, rows) = mse_ratio_experiment(&cfg, &crate::exec::Sequential).unwrap();
        assert_eq!(runs.len(), 2);
        assert!(runs.iter().all(|r| r.log_estimates.len() == 3 && r.log_estimates[0].len() == 6));
        // same seeds under an identical configuration
        assert_eq!(runs[0].log_estimates[0], runs[0].log_estimates[1]);
        assert_eq!(rows[0].ratio, 1.0);
        assert_eq!(rows[1].ratio, 1.0);
        assert!(rows[2].ratio.is_finite() && rows[2].ratio > 0.0);
        assert!(runs.iter().all(|r| r.reference.rel_se.is_finite()));
        assert!(matches!(check_references(&runs, 0.0), Err(Error::ImpreciseReference(_))));
        assert!(mse_ratio_summary(&cfg, &[]).is_err());
    }
}
