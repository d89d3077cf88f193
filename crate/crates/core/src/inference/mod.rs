//! Multilocus inference.
//!
//! Loci are independent given the demographic parameters, so the dataset
//! log-likelihood is the sum of per-locus estimates. A Latin-hypercube design
//! over a log-scale search box is evaluated, the noisy surface is smoothed,
//! and the maximum, profile likelihoods and χ²₁ intervals are read off the
//! smoothed surface. Later rounds spread new points over the region the
//! current smoothed surface ranks as high.

pub mod design;
pub mod optimize;
pub mod smoother;
pub mod surface;

use alloc::vec::Vec;

pub use design::{design_points, Axis, SearchRanges};
pub use smoother::{BandwidthRule, LocalPolynomial, SmootherConfig};
pub use surface::{
    confidence_interval, lrt_pvalue, smooth_and_maximize, Interval, LikelihoodSurface, ProfileCurve,
    SmoothedSurface, SurfacePoint,
};

use crate::datasim::Dataset;
use crate::error::{invalid, Error, Result};
use crate::exec::{try_map, Executor, Sequential};
use crate::math::{ln, sqrt};
use crate::model::{DemographyModel, Model, MutationModel, ScaledParams};
use crate::rng::{derive, tag};
use crate::sis::EstimateResult;
use crate::sisr::{estimate, EstimatorConfig};

/// Dataset log-likelihood at `params`; locus `l` uses seed
/// `derive(seed, [LOCUS, l])`. Per-locus standard errors of the
/// log-likelihood are added in quadrature.
pub fn multilocus_loglik<E: Executor + ?Sized>(
    params: &ScaledParams,
    dataset: &Dataset,
    mutation: &MutationModel,
    cfg: &EstimatorConfig,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    if dataset.loci.is_empty() {
        return Err(Error::EmptyInput);
    }
    if dataset.k != mutation.k() {
        return Err(invalid("dataset and mutation model disagree on K"));
    }
    let model = Model::new(DemographyModel::contraction(*params)?, mutation.clone());
    let per_locus = try_map(exec, dataset.loci.len(), |l| {
        estimate(&dataset.loci[l], &model, cfg, derive(seed, &[tag::LOCUS, l as u64]), &Sequential)
    })?;
    Ok(combine_loci(&per_locus))
}

/// Sum of per-locus results.
pub fn combine_loci(per_locus: &[EstimateResult]) -> EstimateResult {
    let log_lik: f64 = per_locus.iter().map(|r| r.log_lik).sum();
    let se2: Option<f64> = per_locus.iter().map(|r| r.se_log().map(|s| s * s)).sum();
    EstimateResult {
        log_lik,
        log_se: se2.map(|v| ln(sqrt(v)) + log_lik),
        ess_final: per_locus.iter().map(|r| r.ess_final).fold(f64::INFINITY, f64::min),
        n_h: per_locus.first().map_or(0, |r| r.n_h),
        diagnostics: None,
    }
}

/// Settings of the full inference pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceConfig {
    pub ranges: SearchRanges,
    pub points_per_round: usize,
    /// Number of points per round that also get an independent duplicate
    /// estimate.
    pub duplicates_per_round: usize,
    pub rounds: u32,
    pub level: f64,
    /// Values per axis in the reported profile curves.
    pub profile_points: usize,
    /// Later rounds sample where the smoothed log-likelihood is within this
    /// many units of its maximum.
    pub refine_threshold: f64,
    pub smoother: SmootherConfig,
}

impl InferenceConfig {
    pub fn new(ranges: SearchRanges) -> Self {
        Self {
            ranges,
            points_per_round: 100,
            duplicates_per_round: 10,
            rounds: 2,
            level: 0.95,
            profile_points: 41,
            refine_threshold: 10.0,
            smoother: SmootherConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        if self.points_per_round < 10 {
            return Err(invalid("points_per_round must be at least 10"));
        }
        if self.duplicates_per_round > self.points_per_round {
            return Err(invalid("duplicates_per_round cannot exceed points_per_round"));
        }
        if self.rounds == 0 {
            return Err(invalid("rounds must be at least 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level must lie in (0, 1)"));
        }
        if !(self.refine_threshold > 0.0) {
            return Err(invalid("refine_threshold must be positive"));
        }
        if self.profile_points < 2 {
            return Err(invalid("profile_points must be at least 2"));
        }
        Ok(())
    }
}

/// Everything the pipeline produces.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub surface: LikelihoodSurface,
    pub smoothed: SmoothedSurface,
    pub mle: ScaledParams,
    pub max_log_lik: f64,
    pub profiles: Vec<ProfileCurve>,
    pub intervals: Vec<Interval>,
    pub lik_rmse: Option<f64>,
}

impl InferenceResult {
    pub fn interval(&self, axis: Axis) -> &Interval {
        &self.intervals[axis.index()]
    }

    pub fn profile(&self, axis: Axis) -> &ProfileCurve {
        &self.profiles[axis.index()]
    }

    /// LRT p-values at `truth`, one per axis.
    pub fn pvalues_at(&self, truth: &ScaledParams) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for a in Axis::ALL {
            out[a.index()] = self.smoothed.lrt_pvalue(a, truth.get(a.index()))?;
        }
        Ok(out)
    }
}

/// Evaluate the dataset log-likelihood over one design. Every (point,
/// replicate, locus) triple is an independent job.
pub fn evaluate_design<E: Executor + ?Sized>(
    points: &[ScaledParams],
    n_duplicates: usize,
    dataset: &Dataset,
    mutation: &MutationModel,
    est: &EstimatorConfig,
    seed: u64,
    round: u32,
    exec: &E,
) -> Result<Vec<SurfacePoint>> {
    let n_loci = dataset.loci.len();
    let reps: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| {
            let base = derive(seed, &[tag::ROUND, round as u64, tag::POINT, i as u64]);
            let dup = (i < n_duplicates).then(|| (i, derive(base, &[tag::DUPLICATE])));
            core::iter::once((i, base)).chain(dup)
        })
        .collect();
    let models: Vec<Model> = points
        .iter()
        .map(|p| Ok(Model::new(DemographyModel::contraction(*p)?, mutation.clone())))
        .collect::<Result<_>>()?;
    let results = try_map(exec, reps.len() * n_loci, |job| {
        let (i, s) = reps[job / n_loci];
        let l = job % n_loci;
        estimate(&dataset.loci[l], &models[i], est, derive(s, &[tag::LOCUS, l as u64]), &Sequential)
    })?;
    let totals: Vec<f64> = results.chunks(n_loci).map(|c| combine_loci(c).log_lik).collect();
    let mut out: Vec<SurfacePoint> =
        points.iter().map(|p| SurfacePoint { params: *p, log_lik: 0.0, log_lik_dup: None, round }).collect();
    let mut seen = alloc::vec![false; points.len()];
    for ((i, _), t) in reps.iter().zip(totals) {
        if seen[*i] {
            out[*i].log_lik_dup = Some(t);
        } else {
            out[*i].log_lik = t;
            seen[*i] = true;
        }
    }
    Ok(out)
}

/// Candidates drawn per requested point when placing a refinement design.
const CANDIDATES_PER_POINT: usize = 25;

/// Design for a refinement round: `n` points spread over the region where
/// the smoothed log-likelihood is within `threshold` of its maximum.
///
/// Candidates come from a Latin hypercube over the whole box; the high ones
/// are picked greedily, each time taking the candidate farthest (in unit
/// coordinates) from everything already evaluated or picked. When fewer
/// than `n` candidates qualify, the best-predicted ones fill the design.
pub fn high_region_design(
    smoothed: &SmoothedSurface,
    existing: &[ScaledParams],
    ranges: &SearchRanges,
    n: usize,
    threshold: f64,
    seed: u64,
) -> Result<Vec<ScaledParams>> {
    let cands = design_points(ranges, n * CANDIDATES_PER_POINT, seed)?;
    let pred: Vec<f64> = cands.iter().map(|p| smoothed.predict(p)).collect();
    let floor = smoothed.max_log_lik() - threshold;
    let mut high: Vec<usize> = (0..cands.len()).filter(|&i| pred[i] >= floor).collect();
    if high.len() <= n {
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&i, &j| pred[j].total_cmp(&pred[i]).then(i.cmp(&j)));
        order.truncate(n);
        return Ok(order.into_iter().map(|i| cands[i]).collect());
    }
    let mut unit: Vec<[f64; 3]> = high.iter().map(|&i| ranges.params_to_unit(&cands[i])).collect();
    let dist2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>();
    let old: Vec<[f64; 3]> = existing.iter().map(|p| ranges.params_to_unit(p)).collect();
    let mut nearest: Vec<f64> =
        unit.iter().map(|u| old.iter().map(|o| dist2(u, o)).fold(f64::INFINITY, f64::min)).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = 0;
        for j in 1..nearest.len() {
            if nearest[j] > nearest[best] {
                best = j;
            }
        }
        out.push(cands[high.swap_remove(best)]);
        let chosen = unit.swap_remove(best);
        nearest.swap_remove(best);
        for (d, u) in nearest.iter_mut().zip(&unit) {
            *d = d.min(dist2(u, &chosen));
        }
    }
    Ok(out)
}

/// Multi-round maximum-likelihood inference.
pub fn infer<E: Executor + ?Sized>(
    dataset: &Dataset,
    mutation: &MutationModel,
    est: &EstimatorConfig,
    cfg: &InferenceConfig,
    seed: u64,
    exec: &E,
) -> Result<InferenceResult> {
    cfg.validate()?;
    let mut surface = LikelihoodSurface::new(cfg.ranges)?;
    let mut smoothed: Option<SmoothedSurface> = None;
    for round in 0..cfg.rounds {
        let design_seed = derive(seed, &[tag::ROUND, round as u64]);
        let pts = match &smoothed {
            None => design_points(&cfg.ranges, cfg.points_per_round, design_seed)?,
            Some(s) => {
                let existing: Vec<ScaledParams> = surface.points.iter().map(|p| p.params).collect();
                high_region_design(s, &existing, &cfg.ranges, cfg.points_per_round, cfg.refine_threshold, design_seed)?
            }
        };
        for p in evaluate_design(&pts, cfg.duplicates_per_round, dataset, mutation, est, seed, round, exec)? {
            surface.push(p);
        }
        smoothed = Some(surface.smooth(&cfg.smoother)?);
    }
    let smoothed = smoothed.ok_or_else(|| invalid("rounds must be at least 1"))?;
    let (profiles, intervals) = axis_intervals(&smoothed, cfg)?;
    Ok(InferenceResult {
        lik_rmse: surface.lik_rmse(cfg.smoother.censor_below),
        mle: smoothed.mle(),
        max_log_lik: smoothed.max_log_lik(),
        surface,
        smoothed,
        profiles,
        intervals,
    })
}

fn axis_intervals(s: &SmoothedSurface, cfg: &InferenceConfig) -> Result<(Vec<ProfileCurve>, Vec<Interval>)> {
    let mut profiles = Vec::with_capacity(3);
    let mut intervals = Vec::with_capacity(3);
    for a in Axis::ALL {
        let p = s.profile_on_range(a, cfg.profile_points)?;
        intervals.push(confidence_interval(&p, cfg.level)?);
        profiles.push(p);
    }
    Ok((profiles, intervals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasim::simulate_dataset;
    use crate::proposal::ProposalKind;
    use crate::sis::SisConfig;

    fn setup() -> (Dataset, MutationModel, ScaledParams) {
        let p = ScaledParams::new(0.4, 1.25, 4.0).unwrap();
        let mutation = MutationModel::smm(200).unwrap();
        let m = Model::new(DemographyModel::contraction(p).unwrap(), mutation.clone());
        (simulate_dataset(3, 12, &m, 7).unwrap(), mutation, p)
    }

    #[test]
    fn single_locus_matches_per_locus_estimator() {
        let (ds, mutation, p) = setup();
        let one = Dataset::new(ds.loci[..1].to_vec()).unwrap();
        let cfg = EstimatorConfig::sis(50, ProposalKind::default());
        let r = multilocus_loglik(&p, &one, &mutation, &cfg, 11, &Sequential).unwrap();
        let model = Model::new(DemographyModel::contraction(p).unwrap(), mutation.clone());
        let direct = estimate(&one.loci[0], &model, &cfg, derive(11, &[tag::LOCUS, 0]), &Sequential).unwrap();
        assert_eq!(r.log_lik, direct.log_lik);
        assert!((r.se_log().unwrap() - direct.se_log().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_locus_doubles_contribution() {
        let (ds, mutation, p) = setup();
        let cfg = EstimatorConfig { n_h: 30, sampler: SisConfig::default(), mode: crate::sisr::Mode::Sis };
        let one = Dataset::new(ds.loci[..1].to_vec()).unwrap();
        let two = Dataset::new(alloc::vec![ds.loci[0].clone(), ds.loci[0].clone()]).unwrap();
        let a = multilocus_loglik(&p, &one, &mutation, &cfg, 3, &Sequential).unwrap();
        // the second copy gets its own stream, so compare against the sum of both estimates
        let model = Model::new(DemographyModel::contraction(p).unwrap(), mutation.clone());
        let b1 = estimate(&ds.loci[0], &model, &cfg, derive(3, &[tag::LOCUS, 1]), &Sequential).unwrap();
        let b = multilocus_loglik(&p, &two, &mutation, &cfg, 3, &Sequential).unwrap();
        assert!((b.log_lik - (a.log_lik + b1.log_lik)).abs() < 1e-12);
        assert!(multilocus_loglik(&p, &ds, &MutationModel::smm(50).unwrap(), &cfg, 3, &Sequential).is_err());
    }

    #[test]
    fn pipeline_runs_and_is_deterministic() {
        let (ds, mutation, _) = setup();
        let ranges = SearchRanges::new((0.05, 5.0), (0.1, 10.0), (0.5, 50.0)).unwrap();
        let cfg = InferenceConfig { points_per_round: 24, duplicates_per_round: 4, profile_points: 9, ..InferenceConfig::new(ranges) };
        let est = EstimatorConfig::sisr(10, ProposalKind::default());
        let a = infer(&ds, &mutation, &est, &cfg, 5, &Sequential).unwrap();
        let b = infer(&ds, &mutation, &est, &cfg, 5, &Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.surface.points.len(), 48);
        assert!(ranges.contains(&a.mle));
        assert!(a.lik_rmse.is_some());
        let round2: Vec<_> = a.surface.points.iter().filter(|p| p.round == 1).collect();
        assert_eq!(round2.len(), 24);
        for a_ in Axis::ALL {
            let iv = a.interval(a_);
            assert!(iv.contains(a.profile(a_).mle));
        }
        let p = a.pvalues_at(&a.mle).unwrap();
        assert!(p.iter().all(|v| *v > 0.999));
    }
}
