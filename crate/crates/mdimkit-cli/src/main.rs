//! `mdimkit`: config-driven experiment runner.
//!
//! Every checker and estimator of the library is exposed as a subcommand
//! taking a JSON config, a seed, and an output directory; results are JSONL
//! or CSV plus a manifest. Exit code 0 means every asserted invariant
//! passed, 2 means some assertion failed (witnesses in the output), 1 is a
//! usage or gate error.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "mdimkit", version, about = "Lattice tilings and dimension estimators, batch-style")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for result files and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (outputs never depend on this). Falls back to
    /// MDIMKIT_THREADS, then to the machine default.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact flat Voronoi cell enumeration against the displayed bound.
    TileCheck,
    /// The four lifted-cell properties on synthetic marker fields.
    Lemma41,
    /// Monte Carlo fraction of a ball near tile boundaries.
    BoundaryFraction,
    /// Entropy-at-scale and widim profiles along two Folner sequences.
    Dims,
    /// Orbit-capacity estimate for a cell predicate.
    Ocap,
    /// Flat-tile painting with the block-identity check.
    Paint,
    /// First channel plus pseudo-tiling decoder round trip.
    EncodeDecode,
    /// Full two-channel pair verification.
    VerifyEmbed,
    /// Generic-position certificate battery.
    LemmasSimplicial,
    /// Cartesian parameter sweep (boundary-fraction surfaces).
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::TileCheck => "tile-check",
            Command::Lemma41 => "lemma41",
            Command::BoundaryFraction => "boundary-fraction",
            Command::Dims => "dims",
            Command::Ocap => "ocap",
            Command::Paint => "paint",
            Command::EncodeDecode => "encode-decode",
            Command::VerifyEmbed => "verify-embed",
            Command::LemmasSimplicial => "lemmas-simplicial",
            Command::Sweep => "sweep",
        }
    }

    fn needs_even_n(&self) -> bool {
        matches!(self, Command::EncodeDecode | Command::VerifyEmbed)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("MDIMKIT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized");
        }
    }

    let Some(config_path) = cli.config.as_ref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    let mut cfg = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.params.seed = seed;
    }
    if let Err(e) = cfg.check_gates(cli.command.needs_even_n()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }

    let start = Instant::now();
    let result = match &cli.command {
        Command::TileCheck => runner::tile_check(&cfg),
        Command::Lemma41 => runner::lemma41(&cfg),
        Command::BoundaryFraction => runner::boundary_fraction_cmd(&cfg),
        Command::Dims => runner::dims(&cfg),
        Command::Ocap => runner::ocap(&cfg),
        Command::Paint => runner::paint(&cfg),
        Command::EncodeDecode => runner::encode_decode(&cfg),
        Command::VerifyEmbed => runner::verify_embed(&cfg),
        Command::LemmasSimplicial => runner::lemmas_simplicial(&cfg),
        Command::Sweep => runner::sweep(&cfg),
    };

    match result {
        Ok(output) => {
            let wall = start.elapsed().as_millis();
            if let Err(e) =
                runner::write_outputs(&cli.out, &cfg, cli.command.name(), &output, wall)
            {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            if output.failures > 0 {
                eprintln!(
                    "{}: {} assertion failure(s); witnesses in {}",
                    cli.command.name(),
                    output.failures,
                    cli.out.join("result.jsonl").display()
                );
                ExitCode::from(2)
            } else {
                println!(
                    "{}: ok ({} rows, {} ms)",
                    cli.command.name(),
                    output.rows.len(),
                    wall
                );
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
