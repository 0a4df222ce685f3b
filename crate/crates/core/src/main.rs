use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use curate::cli::{self, RunConfig, TaxonomyBuild};

#[derive(Parser)]
#[command(name = "curate", version, about = "Dataset curation: taxonomy linking, dedup, active annotation simulation")]
struct Args {
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Taxonomy operations.
    Taxonomy {
        #[command(subcommand)]
        action: TaxonomyAction,
    },
    /// Drop crawled items whose hash matches a downstream hash.
    Dedup {
        /// Hash list of crawled items.
        crawled: PathBuf,
        /// Hash list of downstream evaluation items.
        downstream: PathBuf,
        /// File receiving the kept ids.
        #[arg(long, default_value = "kept.txt")]
        out: PathBuf,
    },
    /// Print a hash-list line for each PGM/PPM image.
    Hash {
        images: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        first_id: u64,
    },
    /// Run every configured strategy with and without rectification.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Pretty-print a comparison.json.
    Report { comparison: PathBuf },
}

#[derive(Subcommand)]
enum TaxonomyAction {
    /// Merge external concepts into a base taxonomy.
    Build {
        #[arg(long)]
        base: PathBuf,
        /// External concepts, JSON lines.
        #[arg(long)]
        external: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = curate::taxonomy::DEFAULT_MIN_SIM)]
        min_sim: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(args: Args) -> Result<()> {
    let say = |s: String| {
        if !args.quiet {
            print!("{s}");
        }
    };
    match args.command {
        Command::Taxonomy { action: TaxonomyAction::Build { base, external, embeddings, min_sim, out } } => {
            let build = TaxonomyBuild { base, external, embeddings, min_sim, out };
            let report = cli::cmd_taxonomy(&build)?;
            let c = &report.counts;
            say(format!(
                "linked {} (subclass_of {}, head {}, embedding {}), already present {}, unmatched {}\n",
                c.subclass_of + c.head_parse + c.embedding,
                c.subclass_of,
                c.head_parse,
                c.embedding,
                c.already_present,
                c.no_match
            ));
        }
        Command::Dedup { crawled, downstream, out } => {
            let r = cli::cmd_dedup(&crawled, &downstream, &out)?;
            // the discarded count is the command's result, printed even when quiet
            println!("{}", r.discarded);
        }
        Command::Hash { images, first_id } => print!("{}", cli::cmd_hash(&images, first_id)?),
        Command::Simulate { config, seed, out } => {
            let mut cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let cmp = cli::cmd_simulate(&cfg, &out)?;
            say(cmp.table());
        }
        Command::Report { comparison } => print!("{}", cli::cmd_report(&comparison)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
