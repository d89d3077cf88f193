use coalsisr_core::exec::Sequential;
use coalsisr_core::harness::{
    mse_ratio_experiment, relative_mse, CalibrationConfig, ExperimentSpec, MseRatioConfig, NamedEstimator,
    ReferenceConfig,
};
use coalsisr_core::inference::{InferenceConfig, SearchRanges};
use coalsisr_core::model::{MutationModel, ScaledParams};
use coalsisr_core::sisr::EstimatorConfig;
use coalsisr_core::ProposalKind;

fn spec(datasets: usize, replicates: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        scenario: ScaledParams::new(0.4, 0.25, 40.0).unwrap(),
        mutation: MutationModel::smm(200).unwrap(),
        sample_size: 20,
        loci: 1,
        datasets,
        replicates,
        seed,
    }
}

fn mse_config(datasets: usize, replicates: usize, seed: u64) -> MseRatioConfig {
    let p = ProposalKind::default();
    MseRatioConfig {
        spec: spec(datasets, replicates, seed),
        baseline: NamedEstimator::new("sis", EstimatorConfig::sis(20, p)),
        candidates: vec![NamedEstimator::new("sisr", EstimatorConfig::sisr(20, p))],
        reference: ReferenceConfig { estimator: EstimatorConfig::sis(2000, p), runs: 4 },
    }
}

#[test]
fn self_mse_ratio_is_near_one() {
    // two disjoint halves of the replicates of one configuration
    let (runs, _) = mse_ratio_experiment(&mse_config(30, 200, 3), &Sequential).unwrap();
    let (mut first, mut second) = (0.0, 0.0);
    for r in &runs {
        let (a, b) = r.log_estimates[0].split_at(100);
        first += relative_mse(a, r.reference.log_lik).unwrap();
        second += relative_mse(b, r.reference.log_lik).unwrap();
    }
    let ratio = second / first;
    assert!((0.75..1.33).contains(&ratio), "{ratio}");
}

#[test]
fn experiments_are_seed_reproducible() {
    let cfg = mse_config(2, 5, 11);
    let a = mse_ratio_experiment(&cfg, &Sequential).unwrap();
    let b = mse_ratio_experiment(&cfg, &Sequential).unwrap();
    assert_eq!(a, b);
    let c = mse_ratio_experiment(&mse_config(2, 5, 12), &Sequential).unwrap();
    assert_ne!(a.0[0].locus, c.0[0].locus);

    let ranges = SearchRanges::new((0.05, 5.0), (0.05, 5.0), (4.0, 400.0)).unwrap();
    let cal = CalibrationConfig {
        spec: ExperimentSpec { loci: 3, ..spec(1, 1, 5) },
        estimator: EstimatorConfig::sisr(10, ProposalKind::default()),
        inference: InferenceConfig { points_per_round: 25, duplicates_per_round: 5, profile_points: 9, ..InferenceConfig::new(ranges) },
    };
    assert_eq!(cal.run_dataset(0, &Sequential).unwrap(), cal.run_dataset(0, &Sequential).unwrap());
}
