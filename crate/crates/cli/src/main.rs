use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coalsisr::config::{CheckpointName, ModeName, ProposalName};
use coalsisr::{commands, CliError, Overrides, RayonExecutor, RunConfig};

#[derive(Parser)]
#[command(name = "coalsisr", version, about = "Coalescent likelihood estimation and demographic inference for microsatellite data")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per CPU).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset under the configured model.
    Simulate,
    /// Estimate the dataset log-likelihood at the configured parameters.
    Estimate {
        /// Dataset CSV (`locus,allele,count`); simulated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        algo: AlgoFlags,
    },
    /// Maximum-likelihood inference of (theta, D, theta_anc).
    Infer {
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        algo: AlgoFlags,
    },
    /// Run the configured evaluation experiment.
    Experiment {
        #[command(flatten)]
        algo: AlgoFlags,
    },
    /// Print the effective configuration as JSON.
    ShowConfig {
        #[command(flatten)]
        algo: AlgoFlags,
    },
}

#[derive(Args, Default)]
struct AlgoFlags {
    /// Number of histories (particles).
    #[arg(long = "nH")]
    n_h: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Checkpoint spacing.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, value_enum)]
    checkpoint: Option<CheckpointArg>,
    #[arg(long, value_enum)]
    proposal: Option<ProposalArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckpointArg {
    Coal,
    Event,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProposalArg {
    Gt,
    Pcl,
    PimOptimal,
    Csd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sis,
    Sisr,
}

impl AlgoFlags {
    fn overrides(&self, cli: &Cli) -> Overrides {
        Overrides {
            seed: cli.seed,
            out: cli.out.clone(),
            n_h: self.n_h,
            alpha: self.alpha,
            beta: self.beta,
            k: self.k,
            checkpoint: self.checkpoint.map(|c| match c {
                CheckpointArg::Coal => CheckpointName::Coal,
                CheckpointArg::Event => CheckpointName::Event,
            }),
            proposal: self.proposal.map(|p| match p {
                ProposalArg::Gt => ProposalName::Gt,
                ProposalArg::Pcl => ProposalName::Pcl,
                ProposalArg::PimOptimal => ProposalName::PimOptimal,
                ProposalArg::Csd => ProposalName::Csd,
            }),
            mode: self.mode.map(|m| match m {
                ModeArg::Sis => ModeName::Sis,
                ModeArg::Sisr => ModeName::Sisr,
            }),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    let none = AlgoFlags::default();
    let algo = match &cli.command {
        Command::Simulate => &none,
        Command::Estimate { algo, .. } | Command::Infer { algo, .. } | Command::Experiment { algo } | Command::ShowConfig { algo } => algo,
    };
    algo.overrides(cli).apply(&mut cfg)?;
    let exec = RayonExecutor::new(cli.threads).map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    match &cli.command {
        Command::Simulate => println!("{}", commands::simulate(&cfg)?),
        Command::Estimate { data, .. } => println!("{}", commands::estimate_cmd(&cfg, data.as_deref(), &exec)?),
        Command::Infer { data, .. } => println!("{}", commands::infer_cmd(&cfg, data.as_deref(), &exec)?),
        Command::Experiment { .. } => println!("{}", commands::experiment_cmd(&cfg, &exec)?),
        Command::ShowConfig { .. } => println!("{}", cfg.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
