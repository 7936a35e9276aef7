use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dehum::corpus::{ingest, InputFormat};
use dehum::pipeline::{
    export_stored_scores, run, stage_summary, validate, PipelineConfig, RunOptions, Stage,
};

#[derive(Parser)]
#[command(name = "dehum", version, about = "Compare how corpora frame a target concept")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, else `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Re-execute the selected stages even when cached.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest corpora and print their statistics. With FILE, describe a single corpus file.
    Stats {
        #[arg(long, required_unless_present = "file")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
        /// Corpus file to describe without a config.
        #[arg(long, conflicts_with = "config")]
        file: Option<PathBuf>,
        #[arg(long, default_value = "plain-with-lemmas", requires = "file")]
        format: String,
    },
    /// Train one embedding model per corpus.
    Train(Common),
    /// Build concept vectors and their similarities.
    Concepts(Common),
    /// Nearest neighbours of every concept.
    Nn(Common),
    /// Anchored KS comparisons.
    Ks(Common),
    /// Paragraph and neighbour-list sentiment scores.
    Score(Common),
    /// Bayesian group comparisons.
    Bayes(Common),
    /// Run the pipeline through `--stage` (default: the full report).
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "report")]
        stage: Stage,
    },
    /// Write score histograms and density tables.
    Export {
        #[command(flatten)]
        common: Common,
        /// Histogram bins; defaults to the config's `export.bins`.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Check a configuration without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the synthetic toy dataset and its config.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<(PipelineConfig, PathBuf)> {
    let cfg = PipelineConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn run_stage(common: &Common, stage: Stage) -> Result<(PipelineConfig, PathBuf)> {
    let (cfg, out) = load(common)?;
    let opts = RunOptions {
        out_dir: out.clone(),
        seed: common.seed,
        stage,
        force: common.force,
    };
    let outcome = run(&cfg, &opts)?;
    for s in &outcome.executed {
        eprintln!("ran {s}");
    }
    for s in &outcome.skipped {
        eprintln!("cached {s}");
    }
    print!("{}", stage_summary(&outcome.config, &out, stage)?);
    Ok((outcome.config, out))
}

fn stats_of_file(path: &Path, format: &str) -> Result<()> {
    let format: InputFormat = format.parse().map_err(anyhow::Error::msg)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    let corpus = ingest(path, format, &label)?;
    println!("{label}\n{}", corpus.stats());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats {
            config,
            out,
            seed,
            force,
            file,
            format,
        } => match (config, file) {
            (_, Some(file)) => stats_of_file(&file, &format)?,
            (Some(config), None) => {
                run_stage(&Common { config, out, seed, force }, Stage::Ingest)?;
            }
            (None, None) => bail!("give --config or --file"),
        },
        Command::Train(c) => {
            run_stage(&c, Stage::Train)?;
        }
        Command::Concepts(c) => {
            run_stage(&c, Stage::Concepts)?;
        }
        Command::Nn(c) => {
            run_stage(&c, Stage::Nn)?;
        }
        Command::Ks(c) => {
            run_stage(&c, Stage::Ks)?;
        }
        Command::Score(c) => {
            run_stage(&c, Stage::Score)?;
        }
        Command::Bayes(c) => {
            run_stage(&c, Stage::Bayes)?;
        }
        Command::Run { common, stage } => {
            run_stage(&common, stage)?;
        }
        Command::Export { common, bins } => {
            let (cfg, out) = run_stage(&common, Stage::Score)?;
            let bins = bins.unwrap_or(cfg.export.bins);
            for d in export_stored_scores(&out, bins)? {
                println!("{}\t{}", d.histogram, d.density);
            }
        }
        Command::Validate { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let problems = validate(&cfg);
            if problems.is_empty() {
                println!("{}: ok", config.display());
            } else {
                for p in &problems {
                    println!("{p}");
                }
                bail!("{} problem(s) in {}", problems.len(), config.display());
            }
        }
        Command::Synth { out } => {
            let path = dehum::synth::write_toy_dataset(&out)
                .with_context(|| format!("writing toy dataset to {}", out.display()))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
