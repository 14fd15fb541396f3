use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use tsembed::bench::report::{embedding_dump_name, write_embedding_dump, AccuracyTable};
use tsembed::bench::{embed_dataset, emit_reports, run_grid, BenchConfig, TieRule};
use tsembed::data_io::write_wide_csv;
use tsembed::embed::Method;
use tsembed::synthgen::{generate, SynthKind, SynthSpec};

#[derive(Parser)]
#[command(name = "tsembed", version, about = "Time-series embedding benchmark harness")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dataset x embedding x classifier grid and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one embedding on one dataset and dump the vectors of every split.
    Embed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        dataset: String,
        /// Output CSV; defaults to `embeddings_<method>_<dataset>.csv` in the
        /// config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average ranks of a datasets x methods accuracy table.
    Rank {
        /// CSV with header `dataset,<method>,...` and one row per dataset.
        #[arg(long)]
        accuracies: PathBuf,
        #[arg(long, default_value_t = TieRule::Competition)]
        ties: TieRule,
    },
    /// Write a synthetic dataset as wide CSV.
    Synth {
        #[arg(long)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        n_per_class: usize,
        #[arg(long, default_value_t = 64)]
        tau: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    print!("{}", execute(cli.command)?);
    Ok(())
}

/// Runs one subcommand and returns what it prints on stdout.
fn execute(command: Command) -> Result<String> {
    let out = match command {
        Command::Run { config, out } => {
            let mut cfg = BenchConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let report = run_grid(&cfg)?;
            let written = emit_reports(&report, &cfg.output_dir)?;
            let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
            for path in &written {
                info!("wrote {}", path.display());
            }
            format!(
                "{} cells ({} failed), reports in {}\n",
                report.cells.len(),
                failed,
                cfg.output_dir.display()
            )
        }
        Command::Embed {
            config,
            method,
            dataset,
            out,
        } => {
            let cfg = BenchConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            let dump = embed_dataset(&cfg, &dataset, method)?;
            let path = match out {
                Some(p) => p,
                None => {
                    std::fs::create_dir_all(&cfg.output_dir)
                        .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
                    cfg.output_dir.join(embedding_dump_name(method, &dataset))
                }
            };
            write_embedding_dump(&dump, &path)?;
            format!(
                "{} vectors of dimension {} written to {}\n",
                dump.ids.len(),
                dump.vectors.ncols(),
                path.display()
            )
        }
        Command::Rank { accuracies, ties } => {
            let table = AccuracyTable::load(&accuracies)?;
            table.rank_csv(ties)?
        }
        Command::Synth {
            kind,
            out,
            classes,
            n_per_class,
            tau,
            channels,
            noise,
            seed,
        } => {
            let spec = SynthSpec {
                kind,
                classes,
                n_per_class,
                tau,
                channels,
                noise_sigma: noise,
                seed,
            };
            let ds = generate(&spec)?;
            write_wide_csv(&ds, &out)?;
            format!("{} series written to {}\n", ds.len(), out.display())
        }
    };
    Ok(out)
}
