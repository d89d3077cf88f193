//! The four subcommands. Each writes its artifacts plus `manifest.json` to
//! the configured output directory and returns a printable report.

use std::fmt;
use std::path::Path;

use coalsisr_core::datasim::{simulate_dataset, Dataset};
use coalsisr_core::exec::Executor;
use coalsisr_core::harness::{
    calibration_summary, check_references, mse_ratio_experiment, CalibrationConfig, CalibrationSummary,
    ExperimentSpec, MseRatioConfig, MseRatioRow, NamedEstimator, ReferenceConfig,
};
use coalsisr_core::inference::{infer, Axis, InferenceResult, Interval};
use coalsisr_core::model::ScaledParams;
use coalsisr_core::rng::{derive, tag};
use coalsisr_core::sis::{weight_trajectory, EstimateResult};
use coalsisr_core::sisr::{estimate, EstimatorConfig, Mode};
use coalsisr_core::stats::ecdf;

use crate::config::{estimator_config, CheckpointName, ExperimentKind, ModeName, RunConfig};
use crate::dataset::{parse_dataset, write_dataset, LabelledDataset};
use crate::error::CliError;
use crate::output::{Cell, ColumnType as T, Manifest, OutputDir, Table};

/// A reference is accepted when its relative SE is below this fraction of
/// the best compared relative RMSE.
pub const REFERENCE_FACTOR: f64 = 0.1;

fn dataset_bytes(d: &LabelledDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, &d.dataset, Some(&d.labels)).expect("in-memory write");
    buf
}

fn simulated(cfg: &RunConfig) -> Result<LabelledDataset, CliError> {
    let s = &cfg.simulation;
    let dataset = simulate_dataset(s.loci, s.sample_size, &cfg.model()?, cfg.seed)?;
    let labels = (1..=dataset.loci.len()).map(|i| i.to_string()).collect();
    Ok(LabelledDataset { labels, dataset })
}

/// Read `data`, or simulate from the configuration when no file is given.
/// The dataset actually used is copied to `dataset.csv`.
fn load_dataset(cfg: &RunConfig, data: Option<&Path>, out: &mut OutputDir) -> Result<LabelledDataset, CliError> {
    let d = match data {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|e| CliError::io(p, e))?;
            parse_dataset(std::io::BufReader::new(f), cfg.mutation_model()?.k())?
        }
        None => simulated(cfg)?,
    };
    out.write_bytes("dataset.csv", &dataset_bytes(&d))?;
    Ok(d)
}

pub struct SimulateReport {
    pub loci: usize,
    pub sample_size: u32,
    pub manifest: Manifest,
}

impl fmt::Display for SimulateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "simulated {} loci x {} genes", self.loci, self.sample_size)
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulateReport, CliError> {
    let mut out = OutputDir::new(&cfg.output)?;
    let d = simulated(cfg)?;
    out.write_bytes("dataset.csv", &dataset_bytes(&d))?;
    let manifest = out.finish("simulate", cfg)?;
    Ok(SimulateReport { loci: d.dataset.loci.len(), sample_size: d.dataset.sample_size(), manifest })
}

pub struct EstimateReport {
    pub params: ScaledParams,
    pub log_lik: f64,
    pub se_log: Option<f64>,
    pub log_lik_dup: f64,
    /// From the two independent estimates: `|ℓ₁ − ℓ₂| / √2`.
    pub lik_rmse: f64,
    pub manifest: Manifest,
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [t, d, a] = self.params.as_array();
        writeln!(f, "params   theta={t} D={d} theta_anc={a}")?;
        match self.se_log {
            Some(se) => writeln!(f, "logLik   {:.4} ± {:.4}", self.log_lik, se)?,
            None => writeln!(f, "logLik   {:.4} ± n/a", self.log_lik)?,
        }
        write!(f, "lik-RMSE {:.4}", self.lik_rmse)
    }
}

fn per_locus<E: Executor + ?Sized>(
    d: &Dataset,
    cfg: &RunConfig,
    est: &EstimatorConfig,
    label: u64,
    exec: &E,
) -> Result<Vec<EstimateResult>, CliError> {
    let model = cfg.model()?;
    let mut res = Vec::with_capacity(d.loci.len());
    for (l, h) in d.loci.iter().enumerate() {
        res.push(estimate(h, &model, est, derive(cfg.seed, &[label, l as u64]), exec)?);
    }
    Ok(res)
}

/// Log-likelihood of the dataset at the configured demography, estimated
/// twice with independent streams.
pub fn estimate_cmd<E: Executor + ?Sized>(cfg: &RunConfig, data: Option<&Path>, exec: &E) -> Result<EstimateReport, CliError> {
    let mut out = OutputDir::new(&cfg.output)?;
    let d = load_dataset(cfg, data, &mut out)?;
    let est = cfg.estimator()?;
    let main = per_locus(&d.dataset, cfg, &est, tag::LOCUS, exec)?;
    let dup = per_locus(&d.dataset, cfg, &est, tag::DUPLICATE, exec)?;
    let total = coalsisr_core::inference::combine_loci(&main);
    let total_dup: f64 = dup.iter().map(|r| r.log_lik).sum();
    let lik_rmse = (total.log_lik - total_dup).abs() / std::f64::consts::SQRT_2;

    let mut t = Table::new(&[
        ("locus", T::String),
        ("log_lik", T::Float),
        ("se_log", T::Float),
        ("log_lik_dup", T::Float),
        ("ess_final", T::Float),
        ("n_h", T::Int),
    ])
    .nullable("se_log");
    for ((label, a), b) in d.labels.iter().zip(&main).zip(&dup) {
        t.push(vec![label.as_str().into(), a.log_lik.into(), a.se_log().into(), b.log_lik.into(), a.ess_final.into(), a.n_h.into()]);
    }
    out.write_table("estimate.csv", &t)?;

    let params = cfg.params()?;
    let mut s = Table::new(&[
        ("mode", T::String),
        ("proposal", T::String),
        ("n_h", T::Int),
        ("theta", T::Float),
        ("D", T::Float),
        ("theta_anc", T::Float),
        ("log_lik", T::Float),
        ("se_log", T::Float),
        ("lik_rmse", T::Float),
    ])
    .nullable("se_log");
    s.push(vec![
        est.mode.name().into(),
        est.sampler.proposal.name().into(),
        est.n_h.into(),
        params.theta.into(),
        params.d.into(),
        params.theta_anc.into(),
        total.log_lik.into(),
        total.se_log().into(),
        lik_rmse.into(),
    ]);
    out.write_table("summary.csv", &s)?;

    if matches!(est.mode, Mode::Sisr { .. }) {
        let mut t = Table::new(&[
            ("locus", T::String),
            ("checkpoint_index", T::Int),
            ("ess_plus", T::Float),
            ("ess_minus", T::Float),
            ("resampled", T::Bool),
            ("active", T::Int),
            ("lineages_min", T::Int),
            ("lineages_max", T::Int),
        ]);
        for (label, r) in d.labels.iter().zip(&main) {
            for c in r.diagnostics.iter().flat_map(|d| &d.checkpoints) {
                t.push(vec![
                    label.as_str().into(),
                    c.index.into(),
                    c.ess_plus.into(),
                    c.ess_minus.into(),
                    c.resampled.into(),
                    c.active.into(),
                    c.lineages.0.into(),
                    c.lineages.1.into(),
                ]);
            }
        }
        out.write_table("diagnostics.csv", &t)?;
    }
    let manifest = out.finish("estimate", cfg)?;
    Ok(EstimateReport { params, log_lik: total.log_lik, se_log: total.se_log(), log_lik_dup: total_dup, lik_rmse, manifest })
}

pub struct InferReport {
    pub result: InferenceResult,
    pub manifest: Manifest,
}

fn fmt_interval(iv: &Interval) -> String {
    let lo = if iv.open_lower { format!("<{:.4e}", iv.lower) } else { format!("{:.4e}", iv.lower) };
    let hi = if iv.open_upper { format!(">{:.4e}", iv.upper) } else { format!("{:.4e}", iv.upper) };
    let flag = if iv.uninformative() { "  (not bounded by the data)" } else { "" };
    format!("[{lo}, {hi}]{flag}")
}

impl fmt::Display for InferReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.result;
        for a in Axis::ALL {
            let iv = r.interval(a);
            writeln!(f, "{:<10} {:.4e}  {:.0}% CI {}", a.name(), r.mle.get(a.index()), iv.level * 100.0, fmt_interval(iv))?;
        }
        writeln!(f, "{:<10} {:.4e}", "N_ratio", r.mle.theta / r.mle.theta_anc)?;
        write!(f, "{:<10} {:.4}", "logLik", r.max_log_lik)?;
        if let Some(v) = r.lik_rmse {
            write!(f, "\n{:<10} {:.4}", "lik-RMSE", v)?;
        }
        Ok(())
    }
}

pub fn infer_cmd<E: Executor + ?Sized>(cfg: &RunConfig, data: Option<&Path>, exec: &E) -> Result<InferReport, CliError> {
    let mut out = OutputDir::new(&cfg.output)?;
    let d = load_dataset(cfg, data, &mut out)?;
    let result = infer(&d.dataset, &cfg.mutation_model()?, &cfg.estimator()?, &cfg.inference_config()?, cfg.seed, exec)?;

    let mut s = Table::new(&[
        ("theta", T::Float),
        ("D", T::Float),
        ("theta_anc", T::Float),
        ("loglik", T::Float),
        ("loglik_dup", T::Float),
        ("round", T::Int),
    ])
    .nullable("loglik_dup");
    for p in &result.surface.points {
        let [t, dd, a] = p.params.as_array();
        s.push(vec![t.into(), dd.into(), a.into(), p.log_lik.into(), p.log_lik_dup.into(), p.round.into()]);
    }
    out.write_table("surface.csv", &s)?;

    let mut p = Table::new(&[("axis", T::String), ("value", T::Float), ("log_ratio", T::Float)]);
    for c in &result.profiles {
        for (v, r) in c.grid.iter().zip(&c.log_ratio) {
            p.push(vec![c.axis.name().into(), (*v).into(), (*r).into()]);
        }
    }
    out.write_table("profile.csv", &p)?;

    let mut ci = Table::new(&[
        ("axis", T::String),
        ("mle", T::Float),
        ("level", T::Float),
        ("lower", T::Float),
        ("upper", T::Float),
        ("open_lower", T::Bool),
        ("open_upper", T::Bool),
    ]);
    for iv in &result.intervals {
        ci.push(vec![
            iv.axis.name().into(),
            result.mle.get(iv.axis.index()).into(),
            iv.level.into(),
            iv.lower.into(),
            iv.upper.into(),
            iv.open_lower.into(),
            iv.open_upper.into(),
        ]);
    }
    out.write_table("intervals.csv", &ci)?;

    let m = &result.mle;
    let mut sum = Table::new(&[
        ("n_h", T::Int),
        ("theta", T::Float),
        ("D", T::Float),
        ("theta_anc", T::Float),
        ("n_ratio", T::Float),
        ("log_lik", T::Float),
        ("lik_rmse", T::Float),
    ])
    .nullable("lik_rmse");
    sum.push(vec![
        cfg.algorithm.n_h.into(),
        m.theta.into(),
        m.d.into(),
        m.theta_anc.into(),
        (m.theta / m.theta_anc).into(),
        result.max_log_lik.into(),
        result.lik_rmse.into(),
    ]);
    out.write_table("summary.csv", &sum)?;
    let manifest = out.finish("infer", cfg)?;
    Ok(InferReport { result, manifest })
}

pub enum ExperimentReport {
    MseRatio { rows: Vec<MseRatioRow>, manifest: Manifest },
    Calibration { summary: CalibrationSummary, datasets: usize, manifest: Manifest },
    Trajectory { replicates: usize, coalescences: usize, manifest: Manifest },
}

impl ExperimentReport {
    pub fn manifest(&self) -> &Manifest {
        match self {
            Self::MseRatio { manifest, .. } | Self::Calibration { manifest, .. } | Self::Trajectory { manifest, .. } => manifest,
        }
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MseRatio { rows, .. } => {
                writeln!(f, "{:<28} {:>12} {:>8}", "configuration", "rel. MSE", "ratio")?;
                for (i, r) in rows.iter().enumerate() {
                    let end = if i + 1 == rows.len() { "" } else { "\n" };
                    write!(f, "{:<28} {:>12.4e} {:>8.4}{end}", r.label, r.mean_rel_mse, r.ratio)?;
                }
                Ok(())
            }
            Self::Calibration { summary, datasets, .. } => {
                writeln!(f, "{datasets} datasets")?;
                writeln!(f, "{:<10} {:>9} {:>9} {:>9} {:>9} {:>9}", "axis", "rel.bias", "rel.RMSE", "KS D", "KS p", "coverage")?;
                for a in Axis::ALL {
                    let i = a.index();
                    let end = if i == 2 { "" } else { "\n" };
                    write!(
                        f,
                        "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.3}{end}",
                        a.name(),
                        summary.rel_bias[i],
                        summary.rel_rmse[i],
                        summary.ks[i].statistic,
                        summary.ks[i].p_value,
                        summary.coverage[i]
                    )?;
                }
                Ok(())
            }
            Self::Trajectory { replicates, coalescences, .. } => {
                write!(f, "{replicates} histories, {coalescences} coalescences each")
            }
        }
    }
}

fn spec(cfg: &RunConfig, loci: usize) -> Result<ExperimentSpec, CliError> {
    let e = &cfg.experiment;
    Ok(ExperimentSpec {
        scenario: cfg.params()?,
        mutation: cfg.mutation_model()?,
        sample_size: cfg.simulation.sample_size,
        loci,
        datasets: e.datasets,
        replicates: e.replicates,
        seed: cfg.seed,
    })
}

fn checkpoint_name(c: CheckpointName) -> &'static str {
    match c {
        CheckpointName::Coal => "coal",
        CheckpointName::Event => "event",
    }
}

/// SIS with the configured `n_h` against every SISR combination of the grid.
pub fn mse_ratio_config(cfg: &RunConfig) -> Result<MseRatioConfig, CliError> {
    let a = &cfg.algorithm;
    let (p, t) = (cfg.proposal(), cfg.timing());
    let g = &cfg.experiment.grid;
    let baseline = NamedEstimator::new("sis", estimator_config(ModeName::Sis, a.n_h, p, t, 0.0, 0.0, 1, CheckpointName::Coal, 1.0)?);
    let mut candidates = Vec::new();
    for &cp in &g.checkpoint {
        for &k in &g.k {
            for &alpha in &g.alpha {
                for &beta in &g.beta {
                    let label = format!("sisr_{}{k}_a{alpha}_b{beta}", checkpoint_name(cp));
                    let c = estimator_config(ModeName::Sisr, a.n_h, p, t, alpha, beta, k, cp, a.ess_divisor)?;
                    candidates.push(NamedEstimator::new(label, c));
                }
            }
        }
    }
    let r = &cfg.experiment.reference;
    let reference = ReferenceConfig {
        estimator: estimator_config(r.mode, r.n_h, p, t, a.alpha, a.beta, a.k, a.checkpoint, a.ess_divisor)?,
        runs: r.runs,
    };
    Ok(MseRatioConfig { spec: spec(cfg, 1)?, baseline, candidates, reference })
}

fn mse_ratio_cmd<E: Executor + ?Sized>(cfg: &RunConfig, out: &mut OutputDir, exec: &E) -> Result<Vec<MseRatioRow>, CliError> {
    let m = mse_ratio_config(cfg)?;
    let (runs, rows) = mse_ratio_experiment(&m, exec)?;

    let mut r = Table::new(&[("dataset", T::Int), ("log_lik", T::Float), ("rel_se", T::Float), ("precision", T::Float)]);
    for run in &runs {
        r.push(vec![run.dataset.into(), run.reference.log_lik.into(), run.reference.rel_se.into(), run.reference_precision().into()]);
    }
    out.write_table("reference.csv", &r)?;
    check_references(&runs, REFERENCE_FACTOR)?;

    let mut t = Table::new(&[
        ("cfg", T::String),
        ("mode", T::String),
        ("n_h", T::Int),
        ("alpha", T::Float),
        ("beta", T::Float),
        ("k", T::Int),
        ("checkpoint", T::String),
        ("mean_rel_mse", T::Float),
        ("ratio", T::Float),
    ])
    .nullable("alpha")
    .nullable("beta")
    .nullable("k");
    for row in &rows {
        let (alpha, beta, k, cp) = match row.config.mode {
            Mode::Sisr { policy, params } => (
                Cell::Float(params.alpha),
                Cell::Float(params.beta),
                Cell::from(policy.k),
                Cell::from(policy.mode.name()),
            ),
            Mode::Sis => (Cell::Null, Cell::Null, Cell::Null, Cell::from("")),
        };
        t.push(vec![
            row.label.as_str().into(),
            row.config.mode.name().into(),
            row.config.n_h.into(),
            alpha,
            beta,
            k,
            cp,
            row.mean_rel_mse.into(),
            row.ratio.into(),
        ]);
    }
    out.write_table("mse_ratio.csv", &t)?;

    let mut b = Table::new(&[("cfg", T::String), ("dataset", T::Int), ("replicate", T::Int), ("loglik", T::Float)]);
    for run in &runs {
        for (named, logs) in m.configs().zip(&run.log_estimates) {
            for (rep, l) in logs.iter().enumerate() {
                b.push(vec![named.label.as_str().into(), run.dataset.into(), rep.into(), (*l).into()]);
            }
        }
    }
    out.write_table("boxplot_samples.csv", &b)?;
    Ok(rows)
}

fn calibration_cmd<E: Executor + ?Sized>(cfg: &RunConfig, out: &mut OutputDir, exec: &E) -> Result<CalibrationSummary, CliError> {
    let c = CalibrationConfig {
        spec: spec(cfg, cfg.simulation.loci)?,
        estimator: cfg.estimator()?,
        inference: cfg.inference_config()?,
    };
    let rows = (0..cfg.experiment.datasets).map(|d| c.run_dataset(d, exec)).collect::<Result<Vec<_>, _>>()?;
    let summary = calibration_summary(&c.spec.scenario, &rows)?;

    let mut t = Table::new(&[
        ("dataset", T::Int),
        ("theta", T::Float),
        ("D", T::Float),
        ("theta_anc", T::Float),
        ("p_theta", T::Float),
        ("p_D", T::Float),
        ("p_theta_anc", T::Float),
    ]);
    for r in &rows {
        let [a, b, cc] = r.mle.as_array();
        t.push(vec![r.dataset.into(), a.into(), b.into(), cc.into(), r.pvalues[0].into(), r.pvalues[1].into(), r.pvalues[2].into()]);
    }
    out.write_table("calibration.csv", &t)?;

    let mut e = Table::new(&[("axis", T::String), ("p", T::Float), ("ecdf", T::Float)]);
    for a in Axis::ALL {
        let ps: Vec<f64> = rows.iter().map(|r| r.pvalues[a.index()]).collect();
        for (p, f) in ecdf(&ps) {
            e.push(vec![a.name().into(), p.into(), f.into()]);
        }
    }
    out.write_table("ecdf.csv", &e)?;

    let mut b = Table::new(&[
        ("param", T::String),
        ("bias", T::Float),
        ("rmse", T::Float),
        ("ks_statistic", T::Float),
        ("ks_p", T::Float),
        ("coverage", T::Float),
    ]);
    for a in Axis::ALL {
        let i = a.index();
        b.push(vec![
            a.name().into(),
            summary.rel_bias[i].into(),
            summary.rel_rmse[i].into(),
            summary.ks[i].statistic.into(),
            summary.ks[i].p_value.into(),
            summary.coverage[i].into(),
        ]);
    }
    out.write_table("bias_rmse.csv", &b)?;
    Ok(summary)
}

fn trajectory_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Result<(usize, usize), CliError> {
    let d = simulate_dataset(1, cfg.simulation.sample_size, &cfg.model()?, cfg.seed)?;
    let est = cfg.estimator()?;
    let rows = weight_trajectory(&d.loci[0], &cfg.model()?, &est.sampler, est.n_h, derive(cfg.seed, &[tag::REPLICATE]))?;
    let mut t = Table::new(&[("replicate", T::Int), ("coal_index", T::Int), ("u", T::Float), ("norm_log_weight", T::Float)]);
    for r in &rows {
        t.push(vec![r.replicate.into(), r.coal_index.into(), r.u.into(), r.norm_log_weight.into()]);
    }
    out.write_table("trajectory.csv", &t)?;
    Ok((est.n_h, rows.iter().map(|r| r.coal_index).max().unwrap_or(0)))
}

pub fn experiment_cmd<E: Executor + ?Sized>(cfg: &RunConfig, exec: &E) -> Result<ExperimentReport, CliError> {
    let mut out = OutputDir::new(&cfg.output)?;
    Ok(match cfg.experiment.kind {
        ExperimentKind::MseRatio => {
            let rows = mse_ratio_cmd(cfg, &mut out, exec)?;
            ExperimentReport::MseRatio { rows, manifest: out.finish("experiment", cfg)? }
        }
        ExperimentKind::Calibration => {
            let summary = calibration_cmd(cfg, &mut out, exec)?;
            ExperimentReport::Calibration { summary, datasets: cfg.experiment.datasets, manifest: out.finish("experiment", cfg)? }
        }
        ExperimentKind::Trajectory => {
            let (replicates, coalescences) = trajectory_cmd(cfg, &mut out)?;
            ExperimentReport::Trajectory { replicates, coalescences, manifest: out.finish("experiment", cfg)? }
        }
    })
}
