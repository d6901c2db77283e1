use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use union_core::corpus::Dataset;
use union_core::metrics::{MetricsReport, SystemRow};

use union_cli::checkpoint;
use union_cli::config::{ExperimentConfig, GenScorer};
use union_cli::formats::{read_jsonl, read_report_csv};
use union_cli::pipeline::{self, Evaluator, Prepared};

#[derive(Parser)]
#[command(name = "union", version, about = "Multi-task commonsense explanation generation")]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, copied into every component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset to leave out (cose, openbook or omcs); repeatable.
    #[arg(long, global = true, value_parser = parse_dataset)]
    exclude: Vec<Dataset>,
    /// Config override such as `train.max_steps=500`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest raw corpora into the unified stream, references and vocabulary.
    Prepare,
    /// Language-model pretraining on OMCS facts.
    Pretrain,
    /// Multi-task training, from the pretrained model unless OMCS is excluded.
    Train,
    /// Explain the held-out ComVE statements.
    Generate,
    /// Score generations and write a one-row report.
    Evaluate {
        /// Row label in the report.
        #[arg(long, default_value = "UNION")]
        name: String,
    },
    /// Run all six ablation conditions and write the combined report.
    Ablate,
    /// Print report CSVs as one aligned table.
    Report {
        /// Report files; defaults to the one in the output directory.
        files: Vec<PathBuf>,
    },
}

fn parse_dataset(s: &str) -> Result<Dataset, String> {
    Dataset::parse(s).ok_or_else(|| format!("unknown dataset {s:?}; expected comve, cose, openbook or omcs"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns `Ok(false)` when the command finished but some part of it failed.
fn run(cli: Cli) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    cfg.ablation.extend(cli.exclude);
    let cfg = cfg.resolve()?;
    let out = cfg.out.clone();
    let pretrained_path = out.join(pipeline::PRETRAINED_FILE);

    match cli.command {
        Command::Prepare => {
            let exclude: BTreeSet<Dataset> = cfg.ablation.clone();
            pipeline::prepare(&cfg, &exclude)?;
        }
        Command::Pretrain => {
            let data = Prepared::load(&cfg)?;
            pipeline::pretrain(&cfg, &data, &out)?;
        }
        Command::Train => {
            let data = Prepared::load(&cfg)?;
            let init = if cfg.ablation.contains(&Dataset::Omcs) {
                None
            } else {
                Some(checkpoint::load(&pretrained_path, Some(&data.vocab)).context("run `pretrain` or exclude omcs")?)
            };
            pipeline::train(&cfg, &data, init, &out)?;
        }
        Command::Generate => {
            let data = Prepared::load(&cfg)?;
            let state = checkpoint::load(&out.join(pipeline::MODEL_FILE), Some(&data.vocab))?;
            pipeline::generate(&cfg, &data, &state, &out)?;
        }
        Command::Evaluate { name } => {
            let data = Prepared::load(&cfg)?;
            let pretrained = match cfg.metrics.ppl_gen {
                GenScorer::Model => Some(checkpoint::load(&pretrained_path, Some(&data.vocab))?),
                GenScorer::KnOmcs => None,
            };
            let evaluator = Evaluator::fit(&cfg, &data, pretrained.as_ref())?;
            let gens = read_jsonl(&out.join(pipeline::GENERATIONS_FILE))?;
            let row = evaluator.evaluate(&data, &gens)?;
            let report = MetricsReport {
                rows: vec![SystemRow { system: name, metrics: Ok(row) }],
            };
            pipeline::write_report(&report, &out)?;
            print!("{}", report.to_table());
        }
        Command::Ablate => {
            let report = pipeline::ablate(&cfg)?;
            print!("{}", report.to_table());
            return Ok(report.rows.iter().all(|r| r.metrics.is_ok()));
        }
        Command::Report { files } => {
            let files = if files.is_empty() { vec![out.join(pipeline::REPORT_CSV)] } else { files };
            let mut report = MetricsReport::default();
            for f in &files {
                report.rows.extend(read_report_csv(f)?.rows);
            }
            print!("{}", report.to_table());
        }
    }
    Ok(true)
}
