use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emofuse::dataset::{Split, Target};
use emofuse::pipeline::{self, PipelineConfig};
use emofuse::Error;

#[derive(Parser)]
#[command(name = "emofuse", version, about = "Acoustic emotion regression and late fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Restrict to one target
    #[arg(long, global = true)]
    target: Option<Target>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the 76 utterance features for every manifest entry
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Output feature CSV
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the scaler, rank features and select SVR models
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Model directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Predict with trained SVR models
    Predict {
        /// Model directory written by `train`
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Prediction directory
        #[arg(long)]
        out: PathBuf,
        /// With --split, only predict utterances of the given splits
        #[arg(long, requires = "split")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        split: Vec<Split>,
        #[command(flatten)]
        common: Common,
    },
    /// Fuse base-model predictions with SMLR
    Fuse {
        /// Directory holding `<target>/<model>.csv` files
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model to leave out, as `model` or `target:model`
        #[arg(long)]
        exclude: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Score prediction files against manifest labels
    Eval {
        /// Prediction directory; may be repeated
        #[arg(long, required = true)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        /// Report CSV
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        split: Option<Split>,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn targets(&self) -> Vec<Target> {
        self.target.map_or_else(|| Target::ALL.to_vec(), |t| vec![t])
    }

    fn config(&self) -> emofuse::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.relieff.seed = seed;
        }
        Ok(cfg)
    }
}

fn add_exclusions(cfg: &mut PipelineConfig, targets: &[Target], exclude: &[String]) -> emofuse::Result<()> {
    for item in exclude {
        match item.split_once(':') {
            Some((t, model)) => {
                let t: Target = t.parse()?;
                cfg.exclusions_mut(t).push(model.to_string());
            }
            None => {
                for &t in targets {
                    cfg.exclusions_mut(t).push(item.clone());
                }
            }
        }
    }
    Ok(())
}

/// Ok(true) when some input was skipped.
fn run(command: Command) -> emofuse::Result<bool> {
    match command {
        Command::Extract { manifest, out, common } => {
            let report = pipeline::extract(&manifest, &out, &common.config()?)?;
            log::info!("{} rows written to {}", report.table.ids.len(), out.display());
            Ok(!report.skipped.is_empty())
        }
        Command::Train {
            features,
            manifest,
            out,
            common,
        } => {
            pipeline::train(&features, &manifest, &out, &common.config()?, &common.targets())?;
            Ok(false)
        }
        Command::Predict {
            models,
            features,
            out,
            manifest,
            split,
            common,
        } => {
            let only = match manifest {
                Some(m) => Some(pipeline::split_ids(&m, &split)?),
                None => None,
            };
            pipeline::predict(&models, &features, &out, &common.targets(), only.as_ref())?;
            Ok(false)
        }
        Command::Fuse {
            predictions,
            out,
            exclude,
            common,
        } => {
            let targets = common.targets();
            let mut cfg = common.config()?;
            add_exclusions(&mut cfg, &targets, &exclude)?;
            for (target, result) in pipeline::fuse(&predictions, &out, &cfg, &targets)? {
                for (name, w) in result.model_names.iter().zip(&result.weights) {
                    log::info!("{target}: {name} weight {w:.4}");
                }
            }
            Ok(false)
        }
        Command::Eval {
            predictions,
            manifest,
            out,
            split,
            common,
        } => {
            let rows = pipeline::evaluate(&predictions, &manifest, &out, &common.targets(), split)?;
            for r in rows {
                println!("{:<14} {:<8} ccc {:.4} mse {:.4}", r.model, r.target, r.eval.ccc, r.eval.mse);
            }
            Ok(false)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    if err.is_contract_violation() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

