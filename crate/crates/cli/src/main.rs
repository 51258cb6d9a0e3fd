//! `rap`: simulate random Apollonian packings, probe them, solve the
//! mean-field exponents and fit simulated ones.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rap::meanfield::SurfaceModelKind;

use commands::{FitArgs, ProbeArgs, ReportArgs, SimulateOverrides};

#[derive(Parser)]
#[command(name = "rap", version, about = "Random Apollonian packings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow packings and record their moment series.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Rerun exactly the configuration recorded in a manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4))]
        dim: Option<u32>,
        #[arg(long)]
        side: Option<f64>,
        #[arg(long, value_parser = count)]
        n: Option<u64>,
        #[arg(long, value_parser = count)]
        seed: Option<u64>,
        #[arg(long, value_parser = count)]
        replicas: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test insertions into a stored packing, compared with the surface models.
    Probe {
        #[arg(long)]
        packing: Option<PathBuf>,
        #[arg(long, value_parser = count, default_value = "1000000")]
        count: u64,
        #[arg(long, default_value = "ud,it,affine")]
        models: String,
        #[arg(long, value_parser = count, default_value = "0")]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Solve the mean-field exponent equations.
    Solve {
        #[arg(long, value_parser = model)]
        model: Option<SurfaceModelKind>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4))]
        dim: Option<u32>,
        /// All six systems with the reference formulas.
        #[arg(long, conflicts_with_all = ["model", "dim"])]
        all: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit exponents to an ensemble of snapshot series.
    Fit {
        #[command(flatten)]
        fit: FitOpts,
    },
    /// Solved against fitted exponents, with fractal-dimension estimates.
    Report {
        #[command(flatten)]
        fit: FitOpts,
        /// Radius window of the CDF slope, as fractions of the box side.
        #[arg(long, value_parser = pair, default_value = "1e-4,1e-2")]
        slope_window: (f64, f64),
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        #[arg(long, value_parser = count, default_value = "0")]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct FitOpts {
    /// Directory holding `snapshots_seed*.jsonl` files.
    #[arg(long)]
    snapshots: PathBuf,
    /// Orders to fit; defaults to 1 and d.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4))]
    dim: Option<u32>,
    #[arg(long, default_value_t = rap::analysis::DEFAULT_WINDOW_START)]
    window_start: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    window_end: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl FitOpts {
    fn into_args(self) -> Result<FitArgs> {
        Ok(FitArgs {
            snapshots: self.snapshots,
            alphas: self.alphas.as_deref().map(rap::order::parse_orders).transpose()?,
            dim: self.dim.map(|d| d as usize),
            window: (self.window_start, self.window_end),
            out: self.out,
        })
    }
}

fn count(s: &str) -> Result<u64, String> {
    config::parse_count(s).map_err(|e| e.to_string())
}

fn model(s: &str) -> Result<SurfaceModelKind, String> {
    s.parse().map_err(|e: rap::RapError| e.to_string())
}

fn pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(a > 0.0 && b > a) {
        return Err("need 0 < lo < hi".into());
    }
    Ok((a, b))
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RAP_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("RAP_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate {
            config,
            manifest,
            dim,
            side,
            n,
            seed,
            replicas,
            out,
        } => commands::simulate(
            config.as_deref(),
            manifest.as_deref(),
            SimulateOverrides {
                dim: dim.map(|d| d as usize),
                side,
                n,
                seed,
                replicas,
                out,
            },
        ),
        Command::Probe {
            packing,
            count,
            models,
            seed,
            out,
            manifest,
        } => commands::probe(ProbeArgs {
            packing,
            count,
            models: commands::parse_models(&models)?,
            seed,
            out,
            manifest,
        }),
        Command::Solve { model, dim, all, out } => commands::solve(model, dim, all, out.as_deref()),
        Command::Fit { fit } => commands::fit(fit.into_args()?),
        Command::Report {
            fit,
            slope_window,
            bootstrap,
            seed,
        } => commands::report(ReportArgs {
            fit: fit.into_args()?,
            slope_window,
            bootstrap,
            seed,
        }),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
