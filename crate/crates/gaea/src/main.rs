use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gaea::aggregate::{aggregate, load_records, write_summaries, Summary};
use gaea::experiment::ExperimentSpec;
use gaea::plot::{render, PlotKind};
use gaea::runner::{run_experiment, write_records};
use gaea::{acceptance, golden, io};
use gaea_core::supernet::{enumerate_oracle, planted_task, DiscreteArchitecture, TrainConfig};

#[derive(Parser)]
#[command(name = "gaea", version, about = "Block mirror descent and GAEA architecture search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant and seed of an experiment spec and write one record per run.
    Run {
        spec: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Summarize all records below a directory.
    Aggregate {
        dir: PathBuf,
        /// Where summaries go; defaults to `dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a summary as SVG.
    Plot {
        summary: PathBuf,
        /// entropy, loss or stationarity-vs-T
        #[arg(long)]
        kind: PlotKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every architecture of a small search space and rank them.
    Oracle(OracleArgs),
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    Verify {
        /// Criterion numbers to run, e.g. `--only 1,2`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Regenerate the golden records into a directory.
    Golden {
        #[arg(long, default_value = "crates/gaea/golden")]
        out: PathBuf,
    },
    /// Write a planted dataset as CSV.
    Dataset {
        space: PathBuf,
        #[command(flatten)]
        planted: PlantedArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PlantedArgs {
    /// Planted operation per edge, e.g. `2,0,1`.
    #[arg(long, value_delimiter = ',')]
    arch: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1.0)]
    weight_scale: f64,
    #[arg(long, default_value_t = 0)]
    task_seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    space: PathBuf,
    /// CSV dataset; otherwise a planted task is generated.
    #[arg(long, conflicts_with = "arch")]
    data: Option<PathBuf>,
    #[command(flatten)]
    planted: PlantedArgs,
    /// JSON training config (epochs, batch_size, lr, weight_decay, init_scale, seed).
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Write the full ranking as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn planted(space_path: &Path, args: &PlantedArgs) -> anyhow::Result<gaea_core::supernet::Dataset> {
    let space = io::read_space(space_path)?;
    if args.arch.is_empty() {
        bail!("--arch is required to plant a task");
    }
    let arch = DiscreteArchitecture::new(args.arch.clone());
    Ok(planted_task(&space, &arch, args.samples, args.noise, args.weight_scale, args.task_seed)?.data)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { spec, out } => {
            let spec = ExperimentSpec::load(&spec)?;
            let outcomes = run_experiment(&spec)?;
            let paths = write_records(&out, &outcomes)?;
            let mut failed = 0;
            for o in &outcomes {
                if let Err(e) = &o.result {
                    failed += 1;
                    eprintln!("{} seed {}: {e}", o.variant, o.seed);
                }
            }
            println!("wrote {} records to {}", paths.len(), out.join(&spec.name).display());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Aggregate { dir, out } => {
            let records = load_records(&dir)?;
            if records.is_empty() {
                bail!("no records below {}", dir.display());
            }
            for path in write_summaries(out.as_ref().unwrap_or(&dir), &aggregate(&records))? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { summary, kind, out } => {
            let s: Summary = io::read_json(&summary)?;
            let svg = render(&s, kind)?;
            let out = out.unwrap_or_else(|| summary.with_extension(format!("{kind}.svg")));
            io::write_text(&out, &svg)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(args) => {
            let space = io::read_space(&args.space)?;
            let data = match &args.data {
                Some(path) => io::read_dataset(path)?,
                None => planted(&args.space, &args.planted)?,
            };
            let cfg: TrainConfig = match &args.train {
                Some(path) => io::read_json(path)?,
                None => TrainConfig::default(),
            };
            let ranking = enumerate_oracle(&space, &data, &cfg).context("oracle sweep failed")?;
            for (rank, entry) in ranking.iter().take(args.top).enumerate() {
                println!("{:>4}  {:?}  {:.6e}", rank + 1, entry.arch.ops, entry.loss);
            }
            if let Some(out) = &args.out {
                io::write_json(out, &ranking)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { only } => {
            let mut all = true;
            for c in acceptance::criteria().iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
                let result = acceptance::run_criterion(c);
                println!("{result}");
                all &= result.passed;
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Golden { out } => {
            for path in golden::write_goldens(&out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Dataset { space, planted: args, out } => {
            io::write_dataset(&out, &planted(&space, &args)?)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
