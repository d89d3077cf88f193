//! Run configuration, read from JSON.

use std::path::{Path, PathBuf};

use coalsisr_core::inference::{InferenceConfig, SearchRanges};
use coalsisr_core::model::{DemographyModel, Model, MutationModel, ScaledParams};
use coalsisr_core::sisr::{EstimatorConfig, Mode};
use coalsisr_core::{CheckpointMode, CheckpointPolicy, ProposalKind, ResamplingParams, TimingStrategy};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DemographySpec {
    Constant { theta: f64 },
    Contraction { theta: f64, d: f64, theta_anc: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MutationSpec {
    Smm { k: u32 },
    Pim { weights: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Sis,
    Sisr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalName {
    Gt,
    Pcl,
    PimOptimal,
    Csd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointName {
    Coal,
    Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingName {
    InverseCdf,
    Thinning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub mode: ModeName,
    pub n_h: usize,
    pub proposal: ProposalName,
    /// Exponent of the PCL-guided proposal.
    pub beta_q: f64,
    pub k: u32,
    pub checkpoint: CheckpointName,
    pub alpha: f64,
    pub beta: f64,
    pub ess_divisor: f64,
    pub timing: TimingName,
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        Self {
            mode: ModeName::Sisr,
            n_h: 100,
            proposal: ProposalName::Csd,
            beta_q: 1.0,
            k: 1,
            checkpoint: CheckpointName::Coal,
            alpha: 0.7,
            beta: 0.01,
            ess_divisor: 10.0,
            timing: TimingName::InverseCdf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSpec {
    pub theta_range: [f64; 2],
    pub d_range: [f64; 2],
    pub theta_anc_range: [f64; 2],
    pub points_per_round: usize,
    pub duplicates_per_round: usize,
    pub rounds: u32,
    pub level: f64,
    pub profile_points: usize,
}

impl Default for InferenceSpec {
    fn default() -> Self {
        Self {
            theta_range: [1e-4, 10.0],
            d_range: [1e-2, 10.0],
            theta_anc_range: [1.0, 1000.0],
            points_per_round: 100,
            duplicates_per_round: 10,
            rounds: 2,
            level: 0.95,
            profile_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub loci: usize,
    pub sample_size: u32,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { loci: 10, sample_size: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MseRatio,
    Calibration,
    Trajectory,
}

/// Values swept by the MSE-ratio experiment; every combination becomes one
/// SISR configuration compared against plain SIS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub k: Vec<u32>,
    pub checkpoint: Vec<CheckpointName>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { alpha: vec![0.7], beta: vec![0.01], k: vec![1], checkpoint: vec![CheckpointName::Coal] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    pub mode: ModeName,
    pub n_h: usize,
    pub runs: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self { mode: ModeName::Sisr, n_h: 10_000, runs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpecConfig {
    pub kind: ExperimentKind,
    pub datasets: usize,
    pub replicates: usize,
    pub grid: GridSpec,
    pub reference: ReferenceSpec,
}

impl Default for ExperimentSpecConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::MseRatio,
            datasets: 20,
            replicates: 100,
            grid: GridSpec::default(),
            reference: ReferenceSpec::default(),
        }
    }
}

/// Everything a run needs apart from the input dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub demography: DemographySpec,
    pub mutation: MutationSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub inference: InferenceSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub experiment: ExperimentSpecConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_seed() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

const MAX_K: u32 = 100_000;
const MAX_N_H: usize = 100_000_000;

fn check(ok: bool, field: &str, rule: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: {rule}")))
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn check_range(r: [f64; 2], field: &str) -> Result<(), CliError> {
    check(positive(r[0]) && positive(r[1]) && r[0] < r[1], field, "must be [lo, hi] with 0 < lo < hi")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Pretty JSON; parsing it back gives the same configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.demography {
            DemographySpec::Constant { theta } => check(positive(theta), "demography.theta", "must be positive")?,
            DemographySpec::Contraction { theta, d, theta_anc } => {
                check(positive(theta), "demography.theta", "must be positive")?;
                check(d.is_finite() && d >= 0.0, "demography.d", "must be finite and non-negative")?;
                check(positive(theta_anc), "demography.theta_anc", "must be positive")?;
            }
        }
        match &self.mutation {
            MutationSpec::Smm { k } => check((1..=MAX_K).contains(k), "mutation.k", "must lie in 1..=100000")?,
            MutationSpec::Pim { weights } => check(
                !weights.is_empty() && weights.len() <= MAX_K as usize && weights.iter().all(|w| positive(*w)),
                "mutation.weights",
                "must be a non-empty list of positive numbers",
            )?,
        }
        let a = &self.algorithm;
        check((1..=MAX_N_H).contains(&a.n_h), "algorithm.n_h", "must lie in 1..=1e8")?;
        check(a.beta_q.is_finite(), "algorithm.beta_q", "must be finite")?;
        check(a.k >= 1, "algorithm.k", "must be at least 1")?;
        check((0.0..=1.0).contains(&a.alpha), "algorithm.alpha", "must lie in [0, 1]")?;
        check((0.0..=1.0).contains(&a.beta), "algorithm.beta", "must lie in [0, 1]")?;
        check(a.ess_divisor > 0.0 && !a.ess_divisor.is_nan(), "algorithm.ess_divisor", "must be positive")?;
        check(
            a.proposal != ProposalName::PimOptimal || matches!(self.mutation, MutationSpec::Pim { .. }),
            "algorithm.proposal",
            "pim-optimal requires a pim mutation model",
        )?;
        let i = &self.inference;
        check_range(i.theta_range, "inference.theta_range")?;
        check_range(i.d_range, "inference.d_range")?;
        check_range(i.theta_anc_range, "inference.theta_anc_range")?;
        check(i.points_per_round >= 10, "inference.points_per_round", "must be at least 10")?;
        check(i.duplicates_per_round <= i.points_per_round, "inference.duplicates_per_round", "cannot exceed points_per_round")?;
        check(i.rounds >= 1, "inference.rounds", "must be at least 1")?;
        check(i.level > 0.0 && i.level < 1.0, "inference.level", "must lie in (0, 1)")?;
        check(i.profile_points >= 2, "inference.profile_points", "must be at least 2")?;
        check(self.simulation.loci >= 1, "simulation.loci", "must be at least 1")?;
        check(self.simulation.sample_size >= 2, "simulation.sample_size", "must be at least 2")?;
        let e = &self.experiment;
        check(e.datasets >= 1, "experiment.datasets", "must be at least 1")?;
        check(e.replicates >= 1, "experiment.replicates", "must be at least 1")?;
        check((1..=MAX_N_H).contains(&e.reference.n_h), "experiment.reference.n_h", "must lie in 1..=1e8")?;
        check(e.reference.runs >= 2, "experiment.reference.runs", "must be at least 2")?;
        let g = &e.grid;
        check(
            !g.alpha.is_empty() && !g.beta.is_empty() && !g.k.is_empty() && !g.checkpoint.is_empty(),
            "experiment.grid",
            "every axis needs at least one value",
        )?;
        check(g.alpha.iter().all(|x| (0.0..=1.0).contains(x)), "experiment.grid.alpha", "values must lie in [0, 1]")?;
        check(g.beta.iter().all(|x| (0.0..=1.0).contains(x)), "experiment.grid.beta", "values must lie in [0, 1]")?;
        check(g.k.iter().all(|k| *k >= 1), "experiment.grid.k", "values must be at least 1")?;
        Ok(())
    }

    pub fn mutation_model(&self) -> Result<MutationModel, CliError> {
        Ok(match &self.mutation {
            MutationSpec::Smm { k } => MutationModel::smm(*k)?,
            MutationSpec::Pim { weights } => MutationModel::pim(weights.clone())?,
        })
    }

    pub fn demography_model(&self) -> Result<DemographyModel, CliError> {
        Ok(match self.demography {
            DemographySpec::Constant { theta } => DemographyModel::constant(theta)?,
            DemographySpec::Contraction { .. } => DemographyModel::contraction(self.params()?)?,
        })
    }

    /// The demography as scaled parameters; constant size maps to
    /// `θ_anc = θ`.
    pub fn params(&self) -> Result<ScaledParams, CliError> {
        Ok(match self.demography {
            DemographySpec::Constant { theta } => ScaledParams::new(theta, 0.0, theta)?,
            DemographySpec::Contraction { theta, d, theta_anc } => ScaledParams::new(theta, d, theta_anc)?,
        })
    }

    pub fn model(&self) -> Result<Model, CliError> {
        Ok(Model::new(self.demography_model()?, self.mutation_model()?))
    }

    pub fn estimator(&self) -> Result<EstimatorConfig, CliError> {
        let a = &self.algorithm;
        Ok(estimator_config(a.mode, a.n_h, self.proposal(), self.timing(), a.alpha, a.beta, a.k, a.checkpoint, a.ess_divisor)?)
    }

    pub fn proposal(&self) -> ProposalKind {
        match self.algorithm.proposal {
            ProposalName::Gt => ProposalKind::GriffithsTavare,
            ProposalName::Pcl => ProposalKind::PclGuided { beta_q: self.algorithm.beta_q },
            ProposalName::PimOptimal => ProposalKind::PimOptimal,
            ProposalName::Csd => ProposalKind::ConditionalSampling,
        }
    }

    pub fn timing(&self) -> TimingStrategy {
        match self.algorithm.timing {
            TimingName::InverseCdf => TimingStrategy::InverseCdf,
            TimingName::Thinning => TimingStrategy::Thinning,
        }
    }

    pub fn inference_config(&self) -> Result<InferenceConfig, CliError> {
        let i = &self.inference;
        let ranges = SearchRanges::new(
            (i.theta_range[0], i.theta_range[1]),
            (i.d_range[0], i.d_range[1]),
            (i.theta_anc_range[0], i.theta_anc_range[1]),
        )?;
        Ok(InferenceConfig {
            points_per_round: i.points_per_round,
            duplicates_per_round: i.duplicates_per_round,
            rounds: i.rounds,
            level: i.level,
            profile_points: i.profile_points,
            ..InferenceConfig::new(ranges)
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn estimator_config(
    mode: ModeName,
    n_h: usize,
    proposal: ProposalKind,
    timing: TimingStrategy,
    alpha: f64,
    beta: f64,
    k: u32,
    checkpoint: CheckpointName,
    ess_divisor: f64,
) -> Result<EstimatorConfig, CliError> {
    let mut cfg = EstimatorConfig::sis(n_h, proposal);
    cfg.sampler.timing = timing;
    if mode == ModeName::Sisr {
        let policy = CheckpointPolicy::new(checkpoint.into(), k)?;
        let params = ResamplingParams::new(alpha, beta, ess_divisor)?;
        cfg.mode = Mode::Sisr { policy, params };
    }
    Ok(cfg)
}

impl From<CheckpointName> for CheckpointMode {
    fn from(c: CheckpointName) -> Self {
        match c {
            CheckpointName::Coal => CheckpointMode::ByCoalescences,
            CheckpointName::Event => CheckpointMode::ByEvents,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_h: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<u32>,
    pub checkpoint: Option<CheckpointName>,
    pub proposal: Option<ProposalName>,
    pub mode: Option<ModeName>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        let a = &mut cfg.algorithm;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.output = v.clone();
        }
        if let Some(v) = self.n_h {
            a.n_h = v;
        }
        if let Some(v) = self.alpha {
            a.alpha = v;
        }
        if let Some(v) = self.beta {
            a.beta = v;
        }
        if let Some(v) = self.k {
            a.k = v;
        }
        if let Some(v) = self.checkpoint {
            a.checkpoint = v;
        }
        if let Some(v) = self.proposal {
            a.proposal = v;
        }
        if let Some(v) = self.mode {
            a.mode = v;
        }
        cfg.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "demography": {"type": "contraction", "theta": 0.4, "d": 1.25, "theta_anc": 40},
        "mutation": {"type": "smm", "k": 200}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.algorithm, AlgorithmSpec::default());
        assert_eq!(c.seed, 1);
        assert_eq!(c.params().unwrap().as_array(), [0.4, 1.25, 40.0]);
        assert!(matches!(c.estimator().unwrap().mode, Mode::Sisr { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replacen("\"mutation\"", "\"mutaton\"", 1);
        assert!(RunConfig::from_json(&bad).is_err());
        let nested = MINIMAL.replace("\"k\": 200", "\"k\": 200, \"kk\": 1");
        assert!(RunConfig::from_json(&nested).is_err());
        let algo = MINIMAL.replacen('{', "{\"algorithm\": {\"nh\": 5},", 1);
        assert!(RunConfig::from_json(&algo).is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for (from, to) in [("\"theta\": 0.4", "\"theta\": -0.4"), ("\"k\": 200", "\"k\": 0"), ("\"d\": 1.25", "\"d\": -1")] {
            assert!(RunConfig::from_json(&MINIMAL.replace(from, to)).is_err(), "{to}");
        }
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.algorithm.alpha = 1.5;
        assert!(c.validate().is_err());
        c.algorithm.alpha = 0.5;
        c.algorithm.proposal = ProposalName::PimOptimal;
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_are_validated() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        let o = Overrides { n_h: Some(7), checkpoint: Some(CheckpointName::Event), seed: Some(9), ..Default::default() };
        o.apply(&mut c).unwrap();
        assert_eq!((c.algorithm.n_h, c.algorithm.checkpoint, c.seed), (7, CheckpointName::Event, 9));
        assert!(Overrides { beta: Some(2.0), ..Default::default() }.apply(&mut c).is_err());
    }
}
