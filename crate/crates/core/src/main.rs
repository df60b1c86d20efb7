use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dermgraph::checkpoint::Model;
use dermgraph::pipeline::{self, EvalSplit, RunConfig};
use dermgraph::{service, Error, Result};

#[derive(Parser)]
#[command(name = "dermgraph", version, about = "Graph-weighted 7-point checklist: train, evaluate, score, serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the training and split seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint to load instead of the configured one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint.json, history.csv and graph.json.
    Train(Common),
    /// Evaluate a checkpoint and write metrics, ROC curves and weights.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Split to evaluate.
        #[arg(long, value_parser = parse_split)]
        split: Option<EvalSplit>,
    },
    /// Write the co-occurrence graphs and proximity matrices as JSON.
    Graph(Common),
    /// Score one attribute vector, e.g. `0000010` or `0,0.5,0,0,0,1,0`.
    Score {
        #[command(flatten)]
        common: Common,
        attrs: String,
        /// Use the traditional weights even when a checkpoint is configured.
        #[arg(long)]
        traditional: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::value_parser!(u16).range(1024..=65535))]
        port: Option<u16>,
    },
}

fn parse_split(s: &str) -> std::result::Result<EvalSplit, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown split `{s}`; expected train, val, test or all"))
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(ck) = &common.checkpoint {
        cfg.checkpoint = Some(ck.clone());
    }
    Ok(cfg)
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let outcome = pipeline::cmd_train(&load_config(&common)?)?;
            print_json(&serde_json::json!({
                "out": outcome.out_dir,
                "checkpoint_digest": outcome.checkpoint_digest,
                "best_epoch": outcome.checkpoint.best_epoch,
                "epochs_run": outcome.history.len(),
                "val_mean_auc": outcome.checkpoint.metrics.val_mean_auc,
                "val_mel_auc": outcome.checkpoint.metrics.val_mel_auc,
                "threshold": outcome.checkpoint.threshold,
            }));
        }
        Command::Eval { common, split } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = split {
                cfg.eval_split = s;
            }
            let report = pipeline::cmd_eval(&cfg)?;
            print_json(&serde_json::json!({
                "out": cfg.out_dir(),
                "split": cfg.eval_split,
                "learned_melanoma_auc": report.metrics.learned_melanoma_auc,
                "traditional_melanoma_auc": report.metrics.traditional.auc,
                "mean_auc": report.metrics.averages.auc,
            }));
        }
        Command::Graph(common) => {
            print_json(&pipeline::cmd_graph(&load_config(&common)?)?);
        }
        Command::Score {
            common,
            attrs,
            traditional,
        } => {
            print_json(&pipeline::cmd_score(&load_config(&common)?, &attrs, traditional)?);
        }
        Command::Serve { common, port } => {
            let cfg = load_config(&common)?;
            let port = service::validate_port(port.or(cfg.port).unwrap_or(8080))?;
            let model = Model::load(&cfg.checkpoint_path())?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("<tokio runtime>", e))?;
            rt.block_on(service::serve(&model, port))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
