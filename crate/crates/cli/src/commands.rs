use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use nlicurate::ingest::save_jsonl;
use nlicurate::select::{SelectionConfig, SelectionMethod};
use nlicurate::transform::{build_copa_nli, read_copa_jsonl, NonEntailmentLabel};
use nlicurate::{Error, ErrorClass};

use crate::config::Config;
use crate::pipeline::{Pipeline, RunOptions, System};

#[derive(Debug, Parser)]
#[command(
    name = "nlicurate",
    version,
    about = "Fixed-budget training data curation for NLI fine-tuning"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured run id.
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    /// Restricts per-seed stages to the seed at this position of the seeds list.
    #[arg(long, global = true)]
    pub seed_index: Option<usize>,
    /// Uses the deterministic mock provider regardless of configuration.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Directory for the response cache; defaults to `<run>/cache`.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Baseline,
    Curated,
}

impl From<SystemArg> for System {
    fn from(s: SystemArg) -> Self {
        match s {
            SystemArg::Baseline => System::Baseline,
            SystemArg::Curated => System::Curated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NonEntailmentArg {
    Contradiction,
    Neutral,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check every configured dataset and write the registry.
    Ingest,
    /// Draw the initial set and candidate pool for each seed.
    Partition,
    /// Classify the pool (and initial set when needed) with the baseline model.
    Predict,
    /// Score the pool (and initial set when needed) with the base model.
    Score,
    /// Build the swap plan.
    Select {
        /// Overrides the configured selection method.
        #[arg(long)]
        method: Option<SelectionMethod>,
    },
    /// Generate synthetic instances, or label the unlabelled corpus.
    Generate,
    /// Keep generated instances with unanimous votes.
    Validate,
    /// Apply the swap plan to the initial set.
    Assemble,
    /// Write chat-format training files.
    ExportFinetune {
        #[arg(long, value_enum)]
        system: Option<SystemArg>,
    },
    /// Submit fine-tune jobs and wait for them.
    Finetune {
        #[arg(long, value_enum)]
        system: Option<SystemArg>,
    },
    /// Predict and score every evaluation dataset.
    Evaluate {
        #[arg(long, value_enum)]
        system: Option<SystemArg>,
    },
    /// Aggregate results into report.json and report.txt.
    Report,
    /// Convert choice-format records into paired NLI instances.
    CopaBuild {
        /// Choice-format JSONL records.
        #[arg(long)]
        input: PathBuf,
        /// Destination JSONL file of NLI instances.
        #[arg(long)]
        output: PathBuf,
        /// Label for the rejected alternative of each pair.
        #[arg(long, value_enum, default_value = "neutral")]
        non_entailment: NonEntailmentArg,
        /// Dataset name used for ids and provenance.
        #[arg(long, default_value = "copa")]
        name: String,
    },
    /// Every stage for every selected seed, then the report.
    Run,
}

/// Exit code for an error: 1 config, 2 data, 3 provider, 4 invariant.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let class = err
        .chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map(Error::class);
    match class {
        Some(ErrorClass::Config) => 1,
        Some(ErrorClass::Data) | None => 2,
        Some(ErrorClass::Provider) => 3,
        Some(ErrorClass::Invariant) => 4,
    }
}

fn systems(p: &Pipeline, only: Option<SystemArg>) -> Vec<System> {
    match only {
        Some(s) => vec![s.into()],
        None => p.systems(),
    }
}

fn copa_build(
    input: &PathBuf,
    output: &PathBuf,
    label: NonEntailmentArg,
    name: &str,
) -> anyhow::Result<()> {
    let read = read_copa_jsonl(input).with_context(|| format!("reading {}", input.display()))?;
    let label = match label {
        NonEntailmentArg::Contradiction => NonEntailmentLabel::Contradiction,
        NonEntailmentArg::Neutral => NonEntailmentLabel::Neutral,
    };
    let built = build_copa_nli(name, &read.records, label);
    for e in read.errors.iter().chain(&built.errors) {
        log::warn!("record {}: {}", e.index, e.message);
    }
    save_jsonl(&built.dataset, output)?;
    println!(
        "{} records -> {} instances ({} skipped)",
        read.records.len(),
        built.dataset.len(),
        read.errors.len() + built.errors.len()
    );
    Ok(())
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Command::CopaBuild {
        input,
        output,
        non_entailment,
        name,
    } = &cli.command
    {
        return copa_build(input, output, *non_entailment, name);
    }
    let path = cli
        .config
        .clone()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = Config::load(&path)?;
    if let Command::Select {
        method: Some(method),
    } = &cli.command
    {
        let mut sel = cfg
            .selection
            .take()
            .unwrap_or_else(|| SelectionConfig::new(*method, 0));
        sel.method = *method;
        cfg.selection = Some(sel);
        cfg.generation = None;
        cfg.check()?;
    }
    let opts = RunOptions {
        run_id: cli.run_id.clone(),
        seed_index: cli.seed_index,
        offline: cli.offline,
        cache_dir: cli.cache_dir.clone(),
    };
    let mut p = Pipeline::open(cfg, opts)?;
    let seeds = p.seeds();
    match &cli.command {
        Command::Ingest => drop(p.ingest()?),
        Command::Partition => {
            for s in seeds {
                p.partition_stage(s)?;
            }
        }
        Command::Predict => {
            for s in seeds {
                if p.predict_stage(s)?.is_none() {
                    log::info!("seed {s}: the configured selection needs no predictions");
                }
            }
        }
        Command::Score => {
            for s in seeds {
                if p.score_stage(s)?.is_none() {
                    log::info!("seed {s}: the configured selection needs no scores");
                }
            }
        }
        Command::Select { .. } => {
            for s in seeds {
                p.select_stage(s)?;
            }
        }
        Command::Generate => {
            for s in seeds {
                p.generate_stage(s)?;
            }
        }
        Command::Validate => {
            for s in seeds {
                p.validate_stage(s)?;
            }
        }
        Command::Assemble => {
            for s in seeds {
                p.assemble_stage(s)?;
            }
        }
        Command::ExportFinetune { system } => {
            for sys in systems(&p, *system) {
                for &s in &seeds {
                    p.export_stage(sys, s)?;
                }
            }
        }
        Command::Finetune { system } => {
            for sys in systems(&p, *system) {
                for &s in &seeds {
                    p.finetune_stage(sys, s)?;
                }
            }
        }
        Command::Evaluate { system } => {
            for sys in systems(&p, *system) {
                for &s in &seeds {
                    p.evaluate_stage(sys, s)?;
                }
            }
        }
        Command::Report => {
            p.report_stage()?;
            print!(
                "{}",
                std::fs::read_to_string(p.run_dir().join("reports/report.txt"))?
            );
        }
        Command::Run => {
            p.run_all()?;
            print!(
                "{}",
                std::fs::read_to_string(p.run_dir().join("reports/report.txt"))?
            );
        }
        Command::CopaBuild { .. } => unreachable!("handled above"),
    }
    for (stage, status) in p.manifest().statuses() {
        log::debug!("{stage}: {status:?}");
    }
    Ok(())
}
