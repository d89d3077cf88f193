//! Simulation of allele configurations under the coalescent with mutation.
//!
//! Genealogies are drawn backward in time (`j` lineages coalesce at rate
//! `j(j−1)·c(u)`), then mutations are dropped on the branches at rate `θ`
//! per lineage and applied forward from a root allele drawn from `ψ`.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{invalid, Result};
use crate::model::{AlleleConfig, Model};
use crate::rng::{exponential, substream, tag, uniform};
use crate::timing::{HoldingSampler, RateParts, TimingStrategy};

/// Loci sharing an allele space and a sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub k: u32,
    pub loci: Vec<AlleleConfig>,
    /// Root seed, when simulated.
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(loci: Vec<AlleleConfig>) -> Result<Self> {
        let first = loci.first().ok_or(crate::Error::EmptyInput)?;
        let (k, n) = (first.k(), first.total());
        if loci.iter().any(|l| l.k() != k) {
            return Err(invalid("all loci must share the allele space bound"));
        }
        if loci.iter().any(|l| l.total() != n) {
            return Err(invalid("all loci must carry the same number of genes"));
        }
        Ok(Self { k, loci, seed: None })
    }

    /// Genes per locus.
    pub fn sample_size(&self) -> u32 {
        self.loci[0].total()
    }
}

/// Draw the allele configuration of `n` sampled genes.
pub fn simulate_locus<R: RngCore + ?Sized>(n: u32, model: &Model, rng: &mut R) -> Result<AlleleConfig> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let k = model.mutation.k();
    let n = n as usize;
    let sampler = HoldingSampler::new(TimingStrategy::InverseCdf, model.demography);
    // node i < n are leaves; internal nodes are appended as they are created
    let mut time = vec![0.0f64; n];
    let mut parent = vec![usize::MAX; n];
    let mut lineages: Vec<usize> = (0..n).collect();
    let mut u = 0.0;
    while lineages.len() > 1 {
        let j = lineages.len() as f64;
        let parts = RateParts { a: j * (j - 1.0), b: 0.0 };
        u += sampler.invert_with(parts, u, exponential(rng));
        let a = pick(lineages.len(), rng);
        let na = lineages.swap_remove(a);
        let b = pick(lineages.len(), rng);
        let nb = lineages.swap_remove(b);
        let id = time.len();
        time.push(u);
        parent.push(usize::MAX);
        parent[na] = id;
        parent[nb] = id;
        lineages.push(id);
    }
    let root = time.len() - 1;
    let theta = model.theta();
    let mut allele = vec![0u32; time.len()];
    allele[root] = model.mutation.sample_stationary(rng);
    for node in (0..root).rev() {
        let mut a = allele[parent[node]];
        if theta > 0.0 {
            let span = theta * (time[parent[node]] - time[node]);
            let mut s = exponential(rng);
            while s < span {
                a = model.mutation.sample_mutation(a, rng);
                s += exponential(rng);
            }
        }
        allele[node] = a;
    }
    AlleleConfig::from_alleles(k, allele[..n].iter().copied())
}

#[inline]
fn pick<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> usize {
    ((uniform(rng) * len as f64) as usize).min(len - 1)
}

/// `n_loci` independent loci of `n` genes; locus `l` uses the stream
/// `[SIMULATE, l]` under `seed`.
pub fn simulate_dataset(n_loci: usize, n: u32, model: &Model, seed: u64) -> Result<Dataset> {
    if n_loci == 0 {
        return Err(invalid("at least one locus is required"));
    }
    let loci = (0..n_loci)
        .map(|l| simulate_locus(n, model, &mut substream(seed, &[tag::SIMULATE, l as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mut d = Dataset::new(loci)?;
    d.seed = Some(seed);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DemographyModel, MutationModel, ScaledParams};

    #[test]
    fn shapes_and_reproducibility() {
        let m = Model::smm_contraction(ScaledParams::new(0.4, 1.25, 40.0).unwrap(), 200).unwrap();
        let d = simulate_dataset(10, 100, &m, 5).unwrap();
        assert_eq!(d.loci.len(), 10);
        assert!(d.loci.iter().all(|l| l.total() == 100));
        assert_eq!(d, simulate_dataset(10, 100, &m, 5).unwrap());
        let bat = simulate_dataset(8, 492, &m, 1).unwrap();
        assert_eq!((bat.loci.len(), bat.sample_size()), (8, 492));
    }

    #[test]
    fn no_mutation_gives_one_allele() {
        let m = Model::new(DemographyModel::constant(0.0).unwrap(), MutationModel::smm(200).unwrap());
        let mut rng = substream(3, &[]);
        for _ in 0..20 {
            assert_eq!(simulate_locus(30, &m, &mut rng).unwrap().distinct(), 1);
        }
        assert_eq!(simulate_locus(1, &m, &mut rng).unwrap().total(), 1);
    }
}
