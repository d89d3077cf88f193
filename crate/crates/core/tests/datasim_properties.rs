use coalsisr_core::datasim::{simulate_dataset, Dataset};
use coalsisr_core::model::{AlleleConfig, DemographyModel, Model, MutationModel, ScaledParams};
use coalsisr_core::pcl::rho;

fn pair_distances(theta: f64, count: usize, seed: u64) -> Vec<u32> {
    let m = Model::new(DemographyModel::constant(theta).unwrap(), MutationModel::smm(400).unwrap());
    let d = simulate_dataset(count, 2, &m, seed).unwrap();
    d.loci
        .iter()
        .map(|h| {
            let genes: Vec<u32> = h.alleles().collect();
            genes[0].abs_diff(genes[1])
        })
        .collect()
}

#[test]
fn two_gene_homozygosity_and_distance_law() {
    for theta in [0.5, 2.0] {
        let n = 40_000;
        let ds = pair_distances(theta, n, 1);
        let norm = 1.0 / (1.0 + 2.0 * theta).sqrt();
        let r = rho(theta);
        for d in 0..4u32 {
            // both signs of the difference for d > 0
            let p = if d == 0 { norm } else { 2.0 * norm * r.powi(d as i32) };
            let freq = ds.iter().filter(|&&x| x == d).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "θ={theta} d={d}: {freq} vs {p}");
        }
    }
}

#[test]
fn mean_pairwise_homozygosity_in_larger_samples() {
    let theta = 1.0;
    let m = Model::new(DemographyModel::constant(theta).unwrap(), MutationModel::smm(400).unwrap());
    let d = simulate_dataset(4000, 10, &m, 2).unwrap();
    let per_locus: Vec<f64> = d
        .loci
        .iter()
        .map(|h| {
            let same: f64 = h.entries().iter().map(|&(_, c)| (c * (c - 1)) as f64 / 2.0).sum();
            same / 45.0
        })
        .collect();
    let n = per_locus.len() as f64;
    let mean = per_locus.iter().sum::<f64>() / n;
    let sd = (per_locus.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let expected = 1.0 / 3f64.sqrt();
    assert!((mean - expected).abs() < 4.0 * sd / n.sqrt(), "{mean} vs {expected}");
}

#[test]
fn datasets_are_reproducible_and_shaped() {
    let m = Model::smm_contraction(ScaledParams::new(0.4, 1.25, 40.0).unwrap(), 200).unwrap();
    let a = simulate_dataset(8, 492, &m, 77).unwrap();
    let b = simulate_dataset(8, 492, &m, 77).unwrap();
    let c = simulate_dataset(8, 492, &m, 78).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.loci.len(), 8);
    assert_eq!(a.sample_size(), 492);
    assert_eq!(a.seed, Some(77));
    assert!(a.loci.iter().all(|h| h.total() == 492 && h.k() == 200));
}

#[test]
fn dataset_rejects_mixed_shapes() {
    let x = AlleleConfig::from_counts(10, [(2, 3)]).unwrap();
    let y = AlleleConfig::from_counts(10, [(2, 4)]).unwrap();
    let z = AlleleConfig::from_counts(12, [(2, 3)]).unwrap();
    assert!(Dataset::new(vec![x.clone(), y]).is_err());
    assert!(Dataset::new(vec![x.clone(), z]).is_err());
    assert!(Dataset::new(vec![]).is_err());
    assert_eq!(Dataset::new(vec![x.clone(), x]).unwrap().sample_size(), 3);
}
