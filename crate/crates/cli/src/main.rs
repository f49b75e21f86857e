use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use laps_cli::commands::{self, DetectOptions, GenOptions, RunOptions};
use laps_cli::{exit, serve};
use laps_core::{BackgroundKind, SessionConfig};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "laps", version, about = "Laser pointer presentation controller")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic camera corpus plus a ground-truth sidecar.
    Gen {
        /// Background family: red, green, blue, multi or slides.
        #[arg(long, default_value = "multi")]
        kind: BackgroundKind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, env = "LAPS_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-pixel noise sigma.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Ramp the noise from 0 up to --noise over the corpus.
        #[arg(long)]
        noise_ramp: bool,
        /// Radial distortion coefficient.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        k1: f64,
        /// Render in screen space with no warp or colour filter.
        #[arg(long)]
        ideal: bool,
    },
    /// Detect the laser spot in every frame of a directory.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        threshold: u8,
        /// JSON-lines output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the spot-minimum intensity histogram here.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Play a scenario script and score it.
    Run {
        scenario: PathBuf,
        /// Metrics report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Event log (JSON lines).
        #[arg(long)]
        events: Option<PathBuf>,
        /// Skip the metrics table on stdout.
        #[arg(long)]
        quiet: bool,
    },
    /// Serve interactive sessions over a websocket at /session.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Gen {
            kind,
            count,
            seed,
            out,
            noise,
            noise_ramp,
            k1,
            ideal,
        } => {
            let truth = commands::gen(&GenOptions {
                kind,
                count,
                seed,
                out: out.clone(),
                noise,
                noise_ramp,
                k1,
                ideal,
            })?;
            eprintln!("wrote {} frames to {}", truth.len(), out.display());
            Ok(exit::OK)
        }
        Command::Detect {
            input,
            threshold,
            out,
            histogram,
        } => {
            let records = commands::detect_dir(&DetectOptions {
                input,
                threshold,
                out,
                histogram,
            })?;
            let hits = records.iter().filter(|r| r.detected).count();
            eprintln!("{hits}/{} frames with a spot", records.len());
            Ok(exit::OK)
        }
        Command::Run {
            scenario,
            report,
            events,
            quiet,
        } => {
            let outcome = commands::run(&RunOptions {
                scenario,
                report,
                events,
            })?;
            if !quiet {
                print!("{}", outcome.report.to_table());
            }
            if outcome.mismatches.is_empty() {
                Ok(exit::OK)
            } else {
                for line in &outcome.mismatches {
                    eprintln!("mismatch {line}");
                }
                Ok(exit::MISMATCH)
            }
        }
        Command::Serve { port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let (listener, addr) = serve::bind(port).await?;
                tracing::info!("listening on {addr}");
                eprintln!("listening on {addr}");
                serve::serve(listener, SessionConfig::default()).await
            })?;
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR)
        }
    }
}
