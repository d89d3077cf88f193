use coalsisr_core::exec::Sequential;
use coalsisr_core::model::{AlleleConfig, BackwardEvent, DemographyModel, Model, MutationModel, ScaledParams};
use coalsisr_core::proposal::{proposal_distribution, ProposalKind};
use coalsisr_core::sis::{estimate_sis, SisConfig};
use coalsisr_core::timing::TimingStrategy;
use proptest::prelude::*;

fn config_strategy(k: u32) -> impl Strategy<Value = AlleleConfig> {
    prop::collection::vec((1..=k, 1u32..5), 1..6).prop_map(move |pairs| {
        let mut counts = std::collections::BTreeMap::new();
        for (a, c) in pairs {
            *counts.entry(a).or_insert(0) += c;
        }
        AlleleConfig::from_counts(k, counts).unwrap()
    })
}

fn model_strategy(k: u32) -> impl Strategy<Value = Model> {
    (-2.0f64..1.0, -2.0f64..0.5, -1.0f64..2.7).prop_map(move |(a, b, c)| {
        let p = ScaledParams::new(10f64.powf(a), 10f64.powf(b), 10f64.powf(c)).unwrap();
        Model::smm_contraction(p, k).unwrap()
    })
}

/// Every backward event whose ancestral rate is positive.
fn positive_rate_events(h: &AlleleConfig, m: &Model, u: f64) -> Vec<BackwardEvent> {
    let mut out = Vec::new();
    for &(a, c) in h.entries() {
        if c >= 2 {
            out.push(BackwardEvent::Coalescence { allele: a });
        }
        for b in 1..=m.mutation.k() {
            if m.mutation.prob(b, a) > 0.0 {
                out.push(BackwardEvent::Mutation { child: a, parent: b });
            }
        }
    }
    out.retain(|e| m.ancestral_rate(h, e, u) > 0.0);
    out
}

const SMM_KINDS: [ProposalKind; 4] = [
    ProposalKind::GriffithsTavare,
    ProposalKind::PclGuided { beta_q: 1.0 },
    ProposalKind::PclGuided { beta_q: 0.3 },
    ProposalKind::ConditionalSampling,
];

proptest! {
    #[test]
    fn distributions_are_normalized_and_cover_the_support(
        h in config_strategy(30),
        m in model_strategy(30),
        u in 0.0f64..3.0,
    ) {
        prop_assume!(h.total() >= 2);
        let support = positive_rate_events(&h, &m, u);
        for kind in SMM_KINDS {
            let dist = proposal_distribution(&h, u, kind, &m).unwrap();
            let total: f64 = dist.iter().map(|d| d.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "{:?}: {}", kind, total);
            for e in &support {
                let p = dist.iter().find(|d| d.0 == *e).map(|d| d.1).unwrap_or(0.0);
                prop_assert!(p > 0.0, "{:?} misses {:?}", kind, e);
            }
        }
    }

    #[test]
    fn pim_optimal_covers_the_support(h in config_strategy(4), theta in 0.05f64..10.0) {
        prop_assume!(h.total() >= 2);
        let m = Model::new(DemographyModel::constant(theta).unwrap(), MutationModel::pim(vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let dist = proposal_distribution(&h, 0.0, ProposalKind::PimOptimal, &m).unwrap();
        let total: f64 = dist.iter().map(|d| d.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for e in positive_rate_events(&h, &m, 0.0) {
            prop_assert!(dist.iter().any(|d| d.0 == e && d.1 > 0.0));
        }
    }
}

#[test]
fn pim_optimal_is_refused_for_stepwise_mutation() {
    let m = Model::smm_contraction(ScaledParams::new(1.0, 0.5, 2.0).unwrap(), 10).unwrap();
    let h = AlleleConfig::from_counts(10, [(3, 2)]).unwrap();
    assert!(proposal_distribution(&h, 0.0, ProposalKind::PimOptimal, &m).is_err());
}

#[test]
fn gt_and_pcl_proposals_agree_in_mean() {
    let m = Model::smm_contraction(ScaledParams::new(0.8, 0.3, 4.0).unwrap(), 40).unwrap();
    let h = AlleleConfig::from_counts(40, [(18, 2), (20, 2), (21, 1)]).unwrap();
    let run = |kind| {
        let r = estimate_sis(&h, &m, &SisConfig::new(kind, TimingStrategy::InverseCdf), 100_000, 31, &Sequential).unwrap();
        (r.likelihood(), r.log_se.unwrap().exp())
    };
    let (gt, gt_se) = run(ProposalKind::GriffithsTavare);
    let (pcl, pcl_se) = run(ProposalKind::pcl_default());
    let (csd, csd_se) = run(ProposalKind::ConditionalSampling);
    let within = |a: f64, sa: f64, b: f64, sb: f64| (a - b).abs() < 3.0 * (sa * sa + sb * sb).sqrt();
    assert!(within(gt, gt_se, pcl, pcl_se), "gt {gt}±{gt_se} pcl {pcl}±{pcl_se}");
    assert!(within(gt, gt_se, csd, csd_se), "gt {gt}±{gt_se} csd {csd}±{csd_se}");
}
