use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coalsisr::config::{
    AlgorithmSpec, CheckpointName, DemographySpec, ExperimentKind, ModeName, MutationSpec, ProposalName, TimingName,
};
use coalsisr::output::{validate_csv, Manifest};
use coalsisr::{parse_dataset, RunConfig};
use coalsisr_core::datasim::simulate_dataset;
use coalsisr_core::model::{Model, ScaledParams};
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coalsisr"))
}

const BASE: &str = r#"{
    "demography": {"type": "contraction", "theta": 0.4, "d": 1.25, "theta_anc": 40},
    "mutation": {"type": "smm", "k": 200},
    "algorithm": {"mode": "sisr", "n_h": 10},
    "inference": {"points_per_round": 24, "duplicates_per_round": 6, "profile_points": 9},
    "simulation": {"loci": 3, "sample_size": 30},
    "seed": 4
}"#;

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every CSV the manifest lists validates against its sidecar.
fn validate_all(dir: &Path) -> Vec<String> {
    let m = manifest(dir);
    let csvs: Vec<String> = m.files.iter().filter(|f| f.ends_with(".csv")).cloned().collect();
    for f in &csvs {
        if f != "dataset.csv" {
            validate_csv(&dir.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        }
    }
    csvs
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    let demography = prop_oneof![
        (0.01f64..10.0).prop_map(|theta| DemographySpec::Constant { theta }),
        (0.01f64..10.0, 0.0f64..5.0, 0.01f64..100.0).prop_map(|(theta, d, theta_anc)| DemographySpec::Contraction { theta, d, theta_anc }),
    ];
    let mutation = prop_oneof![
        (1u32..500).prop_map(|k| MutationSpec::Smm { k }),
        prop::collection::vec(0.01f64..1.0, 1..6).prop_map(|weights| MutationSpec::Pim { weights }),
    ];
    let algorithm = (
        prop::sample::select(vec![ModeName::Sis, ModeName::Sisr]),
        1usize..100_000,
        prop::sample::select(vec![ProposalName::Gt, ProposalName::Pcl, ProposalName::Csd]),
        1u32..10,
        prop::sample::select(vec![CheckpointName::Coal, CheckpointName::Event]),
        0.0f64..=1.0,
        0.0f64..=1.0,
        prop::sample::select(vec![TimingName::InverseCdf, TimingName::Thinning]),
    )
        .prop_map(|(mode, n_h, proposal, k, checkpoint, alpha, beta, timing)| AlgorithmSpec {
            mode,
            n_h,
            proposal,
            k,
            checkpoint,
            alpha,
            beta,
            timing,
            ..AlgorithmSpec::default()
        });
    (demography, mutation, algorithm, any::<u64>(), prop::sample::select(vec![ExperimentKind::MseRatio, ExperimentKind::Trajectory]))
        .prop_map(|(demography, mutation, algorithm, seed, kind)| {
            let mut c = RunConfig::from_json(BASE).unwrap();
            c.demography = demography;
            c.mutation = mutation;
            c.algorithm = algorithm;
            c.seed = seed;
            c.experiment.kind = kind;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trip_is_idempotent(c in arb_config()) {
        prop_assert!(c.validate().is_ok());
        let once = c.to_json();
        let parsed = RunConfig::from_json(&once).unwrap();
        prop_assert_eq!(&parsed, &c);
        prop_assert_eq!(parsed.to_json(), once);
    }
}

#[test]
fn simulated_dataset_round_trips_through_the_parser() {
    let dir = tempfile::tempdir().unwrap();
    let json = BASE.replace(r#""loci": 3, "sample_size": 30"#, r#""loci": 10, "sample_size": 100"#);
    let cfg = write_config(dir.path(), &json);
    let out = dir.path().join("sim");
    run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "21"]);
    let parsed = parse_dataset(std::fs::File::open(out.join("dataset.csv")).unwrap(), 200).unwrap();
    let model = Model::smm_contraction(ScaledParams::new(0.4, 1.25, 40.0).unwrap(), 200).unwrap();
    let direct = simulate_dataset(10, 100, &model, 21).unwrap();
    assert_eq!(parsed.dataset.loci, direct.loci);
    assert_eq!(parsed.labels, (1..=10).map(|i| i.to_string()).collect::<Vec<_>>());
    let m = manifest(&out);
    assert_eq!((m.command.as_str(), m.seed), ("simulate", 21));
    assert_eq!(m.config_sha256.len(), 64);
}

#[test]
fn estimate_reports_loglik_and_lik_rmse_on_a_bat_shaped_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let json = BASE.replace(r#""loci": 3, "sample_size": 30"#, r#""loci": 8, "sample_size": 492"#);
    let cfg = write_config(dir.path(), &json);
    let out = dir.path().join("est");
    let args = ["estimate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--mode", "sis", "--nH", "1000"];
    let stdout = run_ok(&args);
    assert!(stdout.contains("logLik") && stdout.contains('±') && stdout.contains("lik-RMSE"), "{stdout}");
    assert!(validate_all(&out).contains(&"summary.csv".to_string()));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), "mode,proposal,n_h,theta,D,theta_anc,log_lik,se_log,lik_rmse");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["sis", "csd", "1000"]);
    let (ll, rmse): (f64, f64) = (row[6].parse().unwrap(), row[8].parse().unwrap());
    assert!(ll.is_finite() && ll < 0.0 && rmse >= 0.0);
    assert!(!out.join("diagnostics.csv").exists());
    let per_locus = std::fs::read_to_string(out.join("estimate.csv")).unwrap();
    assert_eq!(per_locus.lines().count(), 9);
}

#[test]
fn sisr_estimate_writes_checkpoint_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("est");
    run_ok(&["estimate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--k", "2", "--checkpoint", "coal"]);
    validate_all(&out);
    let diag = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("locus,checkpoint_index,ess_plus,ess_minus,resampled,"));
    assert!(diag.lines().count() > 3);
}

#[test]
fn infer_is_byte_identical_for_a_seed_and_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    let mut printed = Vec::new();
    for (o, threads) in outs.iter().zip(["1", "1", "3"]) {
        printed.push(run_ok(&["infer", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "--threads", threads]));
    }
    assert!(printed[0].contains("theta") && printed[0].contains("CI"), "{}", printed[0]);
    assert!(printed.windows(2).all(|w| w[0] == w[1]));
    let files = validate_all(&outs[0]);
    for f in ["surface.csv", "profile.csv", "intervals.csv", "summary.csv", "dataset.csv"] {
        assert!(files.iter().any(|x| x == f), "{f} missing from {files:?}");
    }
    for f in &files {
        let a = std::fs::read(outs[0].join(f)).unwrap();
        for o in &outs[1..] {
            assert_eq!(a, std::fs::read(o.join(f)).unwrap(), "{f} differs");
        }
    }
    let surface = std::fs::read_to_string(outs[0].join("surface.csv")).unwrap();
    assert!(surface.starts_with("theta,D,theta_anc,loglik,loglik_dup,round\n"));

    let other = dir.path().join("d");
    run_ok(&["infer", "--config", cfg.to_str().unwrap(), "--out", other.to_str().unwrap(), "--seed", "5"]);
    assert_ne!(std::fs::read(outs[0].join("surface.csv")).unwrap(), std::fs::read(other.join("surface.csv")).unwrap());
}

#[test]
fn infer_reads_a_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", sim.to_str().unwrap()]);
    let from_file = dir.path().join("file");
    let simulated = dir.path().join("direct");
    let data = sim.join("dataset.csv");
    run_ok(&["infer", "--config", cfg.to_str().unwrap(), "--out", from_file.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    run_ok(&["infer", "--config", cfg.to_str().unwrap(), "--out", simulated.to_str().unwrap()]);
    assert_eq!(std::fs::read(from_file.join("summary.csv")).unwrap(), std::fs::read(simulated.join("summary.csv")).unwrap());
}

#[test]
fn experiments_write_schema_checked_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mse = BASE.replace(
        r#""seed": 4"#,
        r#""seed": 4, "experiment": {"kind": "mse-ratio", "datasets": 2, "replicates": 4,
            "grid": {"alpha": [0.5, 0.9], "beta": [0.01], "k": [1], "checkpoint": ["coal", "event"]},
            "reference": {"mode": "sis", "n_h": 20000, "runs": 4}}"#,
    )
    .replace(r#""sample_size": 30"#, r#""sample_size": 6"#);
    let cfg = write_config(dir.path(), &mse);
    let out = dir.path().join("mse");
    let stdout = run_ok(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("sisr_event1_a0.9_b0.01"), "{stdout}");
    let files = validate_all(&out);
    for f in ["mse_ratio.csv", "boxplot_samples.csv", "reference.csv"] {
        assert!(files.iter().any(|x| x == f), "{f}");
    }
    let ratio = std::fs::read_to_string(out.join("mse_ratio.csv")).unwrap();
    assert_eq!(ratio.lines().count(), 6);
    assert!(ratio.lines().nth(1).unwrap().starts_with("sis,sis,10,,,,,"));
    // 5 configurations × 2 datasets × 4 replicates
    assert_eq!(std::fs::read_to_string(out.join("boxplot_samples.csv")).unwrap().lines().count(), 41);

    let cal = BASE.replace(r#""seed": 4"#, r#""seed": 4, "experiment": {"kind": "calibration", "datasets": 3}"#);
    let cfg = write_config(dir.path(), &cal);
    let out = dir.path().join("cal");
    let stdout = run_ok(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("rel.bias"), "{stdout}");
    let files = validate_all(&out);
    for f in ["ecdf.csv", "bias_rmse.csv", "calibration.csv"] {
        assert!(files.iter().any(|x| x == f), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out.join("ecdf.csv")).unwrap().lines().count(), 10);

    let traj = BASE.replace(r#""seed": 4"#, r#""seed": 4, "experiment": {"kind": "trajectory"}"#);
    let cfg = write_config(dir.path(), &traj);
    let out = dir.path().join("traj");
    run_ok(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    validate_all(&out);
    let t = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(t.starts_with("replicate,coal_index,u,norm_log_weight\n"));
    // 10 histories × 29 coalescences
    assert_eq!(t.lines().count(), 1 + 10 * 29);
}

#[test]
fn an_imprecise_reference_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mse = BASE.replace(
        r#""seed": 4"#,
        r#""seed": 4, "experiment": {"kind": "mse-ratio", "datasets": 1, "replicates": 4,
            "reference": {"mode": "sis", "n_h": 10, "runs": 2}}"#,
    );
    let cfg = write_config(dir.path(), &mse);
    let out = run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reference"));
}

#[test]
fn bad_inputs_fail_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "locus,allele,count\n1,10,2\n1,11,0\n").unwrap();
    let out = run(&["estimate", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, BASE.replace(r#""seed": 4"#, r#""seed": 4, "sed": 5"#)).unwrap();
    let out = run(&["simulate", "--config", unknown.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));

    let out = run(&["estimate", "--config", cfg.to_str().unwrap(), "--alpha", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let out = run(&["estimate", "--config", cfg.to_str().unwrap(), "--checkpoint", "sometimes"]);
    assert!(!out.status.success());
}

#[test]
fn show_config_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let json = run_ok(&["show-config", "--config", cfg.to_str().unwrap(), "--nH", "77", "--proposal", "pcl", "--seed", "3"]);
    let c = RunConfig::from_json(&json).unwrap();
    assert_eq!((c.algorithm.n_h, c.algorithm.proposal, c.seed), (77, ProposalName::Pcl, 3));
}
