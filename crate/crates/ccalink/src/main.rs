//! Command-line front end: run sweeps, export repetition patterns, and
//! inspect coherence-block recommendations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ccalink::config::SimConfig;
use ccalink::grid::{self, GridDims};
use ccalink::{harness, Error};

#[derive(Parser)]
#[command(name = "ccalink", version, about = "Pilot-free MIMO-OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured Monte-Carlo sweep and emit CSV results.
    Simulate {
        /// Configuration file (flat `section.key = value` text).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path; stdout when omitted. A `.meta.json` sidecar with
        /// the config hash and seed list is written next to the file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Record wall-clock time in the CSV `seconds` column. Off by
        /// default so repeated runs are byte-identical.
        #[arg(long)]
        timing: bool,
    },
    /// Export the repetition pattern of a configuration as text.
    Pattern {
        #[arg(long)]
        config: PathBuf,
        /// Destination file for the pattern listing.
        #[arg(long)]
        export: PathBuf,
    },
    /// Print the time-bandwidth coherence block for a channel and the
    /// recommended repetition orientation.
    Coherence {
        /// Subcarrier spacing in Hz.
        #[arg(long)]
        scs: f64,
        /// rms delay spread in seconds.
        #[arg(long)]
        ds: f64,
        /// User speed in m/s.
        #[arg(long, default_value_t = 0.8)]
        speed: f64,
        /// Carrier frequency in Hz.
        #[arg(long, default_value_t = 4e9)]
        carrier: f64,
        /// OFDM symbols per slot.
        #[arg(long, default_value_t = 14)]
        n_symbols: usize,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            threads,
            timing,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = SimConfig::parse(&text)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let rows = match threads {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
                    pool.install(|| harness::sweep(&cfg))?
                }
                None => harness::sweep(&cfg)?,
            };
            match out {
                Some(path) => harness::write_outputs(&cfg, &rows, &path, timing)?,
                None => print!("{}", harness::csv_string(&rows, timing)),
            }
            Ok(())
        }
        Command::Pattern { config, export } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = SimConfig::parse(&text)?;
            let dims = cfg.dims()?;
            let layout = grid::partition_subgrids(&dims, cfg.n_bsg)?;
            let patterns =
                grid::layer_patterns(&dims, &layout, cfg.pattern_kind, cfg.n_per_rb)?;
            std::fs::write(&export, grid::export_patterns(&dims, &layout, &patterns))?;
            Ok(())
        }
        Command::Coherence {
            scs,
            ds,
            speed,
            carrier,
            n_symbols,
        } => {
            let block = grid::coherence_block(scs, ds, speed, carrier)?;
            let dims = GridDims::new(1, n_symbols, 1)?;
            let kind = grid::select_pattern_kind(&block, &dims);
            let fmt = |x: f64| {
                if x.is_infinite() {
                    "inf".to_string()
                } else {
                    format!("{x:.5e}")
                }
            };
            println!("coherence_bandwidth_hz {}", fmt(block.coherence_bw_hz));
            println!("coherence_time_s {}", fmt(block.coherence_time_s));
            println!("coherent_subcarriers {}", fmt(block.coherent_subcarriers));
            println!("coherent_symbols {}", fmt(block.coherent_symbols));
            println!("recommended {kind}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
