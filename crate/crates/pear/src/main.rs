use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pear::config::Overrides;
use pear::experiments::Experiment;
use pear::io::read_json;
use pear::{Result, TrainConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "pear",
    version,
    about = "Consensus-regularized training and explainer agreement experiments"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON config file; unset fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `synthetic` or a dataset name under the data directory.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Analyse this trained model instead of training new ones.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Train models and write checkpoints and histories.
    Train,
    /// Write every explainer's attributions for the evaluation points.
    Explain,
    /// Explainer-by-explainer agreement matrix.
    Matrix,
    /// Accuracy and agreement across the lambda grid.
    SweepLambda,
    /// Accuracy, linear-fit error and agreement across weight decays.
    SweepWd,
    /// The lambda sweep repeated for each mu.
    AblateMu,
    /// How often junk features reach the top k.
    Junk,
    /// Logit surfaces on planes through test points.
    Planes,
    /// Linear-fit error of the logit surface.
    Linfit,
}

#[derive(Serialize)]
struct Done<'a> {
    verb: &'a str,
    config_hash: &'a str,
    out: String,
    reports: &'a [String],
}

fn run(cli: Cli) -> Result<()> {
    let c = cli.common;
    let mut config: TrainConfig = match &c.config {
        Some(path) => read_json(path)?,
        None => TrainConfig::default(),
    };
    config.apply(&Overrides {
        lambda: c.lambda,
        mu: c.mu,
        seed: c.seed,
        dataset: c.dataset,
    });
    if c.checkpoint.is_some() {
        config.checkpoint = c.checkpoint;
    }
    let mut exp = Experiment::new(config, &c.out)?;
    let verb = match cli.verb {
        Verb::Train => exp.run_train().map(|_| "train"),
        Verb::Explain => exp.run_explain().map(|_| "explain"),
        Verb::Matrix => exp.run_matrix().map(|_| "matrix"),
        Verb::SweepLambda => exp.lambda_sweep().map(|_| "sweep-lambda"),
        Verb::SweepWd => exp.weight_decay_sweep().map(|_| "sweep-wd"),
        Verb::AblateMu => exp.mu_ablation().map(|_| "ablate-mu"),
        Verb::Junk => exp.junk().map(|_| "junk"),
        Verb::Planes => exp.planes().map(|_| "planes"),
        Verb::Linfit => exp.linfit().map(|_| "linfit"),
    }?;
    let done = Done {
        verb,
        config_hash: &exp.hash,
        out: c.out.display().to_string(),
        reports: exp.reports(),
    };
    println!("{}", serde_json::to_string(&done).expect("summary serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = serde_json::json!({ "error": "usage", "message": e.to_string() });
            println!("{report}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
