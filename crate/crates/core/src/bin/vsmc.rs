use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vsmc_policy::exec::ExecMode;
use vsmc_policy::experiment::{self, ExperimentConfig, Overrides};
use vsmc_policy::{Error, Result};

/// Posterior inference over deterministic policies with variational SMC.
#[derive(Parser)]
#[command(name = "vsmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    /// deterministic | predictive | argmax
    #[arg(long)]
    mode: Option<ExecMode>,
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every run of an experiment, resuming existing checkpoints.
    Train(Common),
    /// Evaluate the trained runs.
    Eval(Common),
    /// Solve the environment exactly and evaluate the optimal policy.
    Oracle(Common),
    /// Enumerate the evidence and policy posterior of a small model.
    Bruteforce {
        #[command(flatten)]
        common: Common,
        /// Compare this checkpoint's proposal with the posterior.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Occupancy and policy maps of grid-world runs.
    Map(Common),
    /// Complementary CDFs of return distributions.
    Ccdf {
        /// Output path prefix; `.svg` and `.csv` are written.
        #[arg(long)]
        out: PathBuf,
        /// `label=returns.csv[,returns.csv...]`, one per series.
        #[arg(required = true)]
        series: Vec<String>,
    },
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, Overrides)> {
        let cfg = ExperimentConfig::load(&self.config)?;
        let o = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            runs: self.runs,
            mode: self.mode,
            episodes: self.episodes,
        };
        Ok((cfg, o))
    }
}

fn parse_series(s: &str) -> Result<(String, Vec<PathBuf>)> {
    let (label, files) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("series `{s}`: expected label=file[,file...]")))?;
    Ok((label.to_string(), files.split(',').map(PathBuf::from).collect()))
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(c) => {
            let (cfg, o) = c.load()?;
            experiment::cmd_train(cfg, &o)
        }
        Command::Eval(c) => {
            let (cfg, o) = c.load()?;
            experiment::cmd_eval(cfg, &o)
        }
        Command::Oracle(c) => {
            let (cfg, o) = c.load()?;
            experiment::cmd_oracle(cfg, &o)
        }
        Command::Bruteforce { common, checkpoint } => {
            let (cfg, o) = common.load()?;
            experiment::cmd_bruteforce(cfg, &o, checkpoint.as_deref())
        }
        Command::Map(c) => {
            let (cfg, o) = c.load()?;
            experiment::cmd_map(cfg, &o)
        }
        Command::Ccdf { out, series } => {
            let series = series.iter().map(|s| parse_series(s)).collect::<Result<Vec<_>>>()?;
            experiment::cmd_ccdf(&series, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 3 })
        }
    }
}
