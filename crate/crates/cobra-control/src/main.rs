use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cobra_control::cli::{cmd_analyze, cmd_ilc, cmd_simulate, parse_gains_from};

#[derive(Parser)]
#[command(
    name = "cobra-control",
    version,
    about = "Tail-sitter maneuver control toolkit: simulation, learning campaigns, loop analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one maneuver with learning off; writes trajectory.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a learning campaign; writes per-iteration CSVs and campaign_summary.json.
    Ilc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 6)]
        iterations: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Analyze the altitude loop; writes bode.csv and margins.json.
    Analyze {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Derive gains from "bandwidth_hz,phase_margin_deg" instead of the config.
        #[arg(long, value_name = "BW_HZ,PM_DEG")]
        gains_from: Option<String>,
    },
}

fn run() -> cobra_control::Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out, seed } => {
            let o = cmd_simulate(&config, &out, seed)?;
            println!(
                "flight done: rms altitude error {:.4} m, max |lateral| {:.4} m",
                o.summary.rms_alt_error_m, o.summary.max_abs_lateral_m
            );
            println!("wrote {} and {}", o.trajectory_csv.display(), o.summary_json.display());
        }
        Command::Ilc {
            config,
            iterations,
            out,
            seed,
        } => {
            let o = cmd_ilc(&config, &out, iterations, seed)?;
            for s in &o.summary.iterations {
                println!(
                    "iteration {:2}: rms {:.4} m, max |error| {:.4} m",
                    s.iteration, s.rms_m, s.max_abs_m
                );
            }
            println!("wrote {}", o.summary_json.display());
        }
        Command::Analyze {
            config,
            out,
            gains_from,
        } => {
            let pair = gains_from.as_deref().map(parse_gains_from).transpose()?;
            let o = cmd_analyze(config.as_deref(), &out, pair)?;
            println!(
                "gains: kp = {:.6}, kv = {:.6} ({})",
                o.report.gains.kp, o.report.gains.kv, o.report.gains.source
            );
            if let (Some(f), Some(pm), Some(dm)) = (
                o.report.outer_loop.gain_crossover_hz,
                o.report.outer_loop.phase_margin_deg,
                o.report.outer_loop.delay_margin_s,
            ) {
                println!(
                    "outer loop: crossover {f:.4} Hz, phase margin {pm:.2} deg, delay margin {dm:.3} s"
                );
            }
            for w in &o.report.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} and {}", o.bode_csv.display(), o.margins_json.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
