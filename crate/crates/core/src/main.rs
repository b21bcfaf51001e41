use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use circumsense::harness::commands;

#[derive(Parser)]
#[command(name = "circumsense", version, about = "Proximity sensing ring toolkit: calibrate, simulate, replay, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-unit logistic curves to a calibration sweep.
    Calibrate {
        /// Sweep table: distance_mm,unit0_v,unit1_v,...
        csv_in: PathBuf,
        /// Fitted parameter file.
        params_out: PathBuf,
        /// Optional JSON fit report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a scenario and write the per-tick trace and the metrics report.
    Simulate {
        scenario: PathBuf,
        trace_out: PathBuf,
        report_out: PathBuf,
        /// Also write the synthesized raw frames.
        #[arg(long)]
        frames: Option<PathBuf>,
    },
    /// Run recorded frames through filtering and mapping.
    Replay {
        frames_in: PathBuf,
        scenario: PathBuf,
        map_out: PathBuf,
        /// Also write the filtered frames.
        #[arg(long)]
        filtered: Option<PathBuf>,
    },
    /// Summarize a trace file.
    Report {
        trace_in: PathBuf,
        /// Write the summary table here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-tick error columns for plotting.
        #[arg(long)]
        errors: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate { csv_in, params_out, report } => {
            let units = commands::calibrate(&csv_in, &params_out, report.as_deref()).context("calibrate failed")?;
            for u in units {
                println!(
                    "unit {}: {} samples, R^2 = {:.6}, residual rms = {:.3e} V, {} iterations",
                    u.unit_id, u.samples, u.r_squared, u.residual_rms_v, u.iterations
                );
            }
        }
        Command::Simulate { scenario, trace_out, report_out, frames } => {
            let m = commands::simulate(&scenario, &trace_out, &report_out, frames.as_deref()).context("simulate failed")?;
            print!("{}", circumsense::harness::trace::channel_table(&m));
            println!(
                "latency ms: median {:.4}, p95 {:.4}, max {:.4} over {} ticks",
                m.latency.median_ms, m.latency.p95_ms, m.latency.max_ms, m.latency.ticks
            );
        }
        Command::Replay { frames_in, scenario, map_out, filtered } => {
            let s = commands::replay(&frames_in, &scenario, &map_out, filtered.as_deref()).context("replay failed")?;
            println!("{} frames, {} ticks", s.frames, s.ticks);
            match s.final_map.worst_zone() {
                Some(z) => println!("final worst zone: {z}"),
                None => println!("final worst zone: none observed"),
            }
        }
        Command::Report { trace_in, out, errors } => {
            let text = commands::report(&trace_in, out.as_deref(), errors.as_deref()).context("report failed")?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
