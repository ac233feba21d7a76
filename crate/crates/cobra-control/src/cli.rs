//! Command implementations behind the `cobra-control` binary: `simulate`,
//! `ilc`, and `analyze`. Each reads one TOML configuration, runs the
//! corresponding library pipeline, and writes CSV/JSON artifacts into the
//! output directory. Identical configuration and seed produce byte-identical
//! outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::campaign::run_campaign;
use crate::config::RunConfig;
use crate::loopshape::{
    bode_table, derive_gains, inner_loop_report, margins, InnerLoopReport, MarginReport,
    TransferFunction,
};
use crate::output::{write_bode_csv, write_iteration_csv, write_json, write_trajectory_csv};
use crate::plant::AccelLoopModel;
use crate::sim::run_flight;
use crate::{Error, Result};

/// Phase margins below this threshold are flagged in the analyze report.
pub const LOW_PHASE_MARGIN_DEG: f64 = 30.0;

fn ensure_out_dir(out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::OutputIo {
        path: out_dir.to_path_buf(),
        source,
    })
}

fn load_with_seed(config_path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// `summary.json` of a single flight.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub duration_s: f64,
    pub ticks: usize,
    pub rms_alt_error_m: f64,
    pub max_abs_alt_error_m: f64,
    pub final_alt_error_m: f64,
    pub max_abs_lateral_m: f64,
    pub final_lateral_m: f64,
    /// Peak commanded thrust, N (mass times peak commanded acceleration).
    pub max_thrust_n: f64,
    pub guard_events: u64,
    pub clamp_events: u64,
    pub config_digest: String,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct SimulateOutputs {
    pub trajectory_csv: PathBuf,
    pub summary_json: PathBuf,
    pub summary: SimulateSummary,
}

/// Fly one maneuver with learning off.
pub fn cmd_simulate(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<SimulateOutputs> {
    let cfg = load_with_seed(config_path, seed)?;
    let log = run_flight(&cfg, None, 0)?;
    ensure_out_dir(out_dir)?;

    let trajectory_csv = out_dir.join("trajectory.csv");
    write_trajectory_csv(&trajectory_csv, &log)?;

    let summary = SimulateSummary {
        duration_s: cfg.maneuver_profile().duration(),
        ticks: log.rows.len(),
        rms_alt_error_m: log.rms_xi_p(),
        max_abs_alt_error_m: log.max_abs_xi_p(),
        final_alt_error_m: log.final_xi_p(),
        max_abs_lateral_m: log.max_abs_xi_l(),
        final_lateral_m: log.final_xi_l(),
        max_thrust_n: cfg.plant.mass_kg * log.max_a_xd(),
        guard_events: log.guard_events,
        clamp_events: log.clamp_events,
        config_digest: cfg.digest(),
        config: cfg.echo(),
    };
    let summary_json = out_dir.join("summary.json");
    write_json(&summary_json, &summary)?;
    Ok(SimulateOutputs {
        trajectory_csv,
        summary_json,
        summary,
    })
}

#[derive(Debug, Clone)]
pub struct IlcOutputs {
    pub iteration_csvs: Vec<PathBuf>,
    pub trajectory_csvs: Vec<PathBuf>,
    pub summary_json: PathBuf,
    pub summary: crate::campaign::CampaignSummary,
}

/// Run a learning campaign and write per-iteration artifacts.
pub fn cmd_ilc(
    config_path: &Path,
    out_dir: &Path,
    iterations: usize,
    seed: Option<u64>,
) -> Result<IlcOutputs> {
    let cfg = load_with_seed(config_path, seed)?;
    let result = run_campaign(&cfg, iterations)?;
    ensure_out_dir(out_dir)?;

    let mut iteration_csvs = Vec::new();
    let mut trajectory_csvs = Vec::new();
    for record in &result.records {
        let lifted = out_dir.join(format!("iteration_{:02}.csv", record.index));
        write_iteration_csv(&lifted, record, result.lifted_dt)?;
        iteration_csvs.push(lifted);

        let traj = out_dir.join(format!("trajectory_{:02}.csv", record.index));
        write_trajectory_csv(&traj, &record.log)?;
        trajectory_csvs.push(traj);
    }
    let summary_json = out_dir.join("campaign_summary.json");
    write_json(&summary_json, &result.summary)?;
    Ok(IlcOutputs {
        iteration_csvs,
        trajectory_csvs,
        summary_json,
        summary: result.summary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GainsEcho {
    pub kp: f64,
    pub kv: f64,
    pub source: String,
}

/// `margins.json` of the analyze command.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub gains: GainsEcho,
    pub outer_loop: MarginReport,
    pub inner_loop: InnerLoopReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutputs {
    pub bode_csv: PathBuf,
    pub margins_json: PathBuf,
    pub report: AnalyzeReport,
}

/// Frequency-domain analysis of the altitude loop and the modeled inner
/// acceleration loop.
pub fn cmd_analyze(
    config_path: Option<&Path>,
    out_dir: &Path,
    gains_from: Option<(f64, f64)>,
) -> Result<AnalyzeOutputs> {
    let cfg = match config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let (gains, source) = match gains_from {
        Some((bw, pm)) => (
            derive_gains(bw, pm)?,
            format!("derived from {bw} Hz bandwidth, {pm} deg phase margin"),
        ),
        None => {
            let source = if cfg.gains.kp.is_some() {
                "explicit kp/kv from the configuration".to_string()
            } else {
                format!(
                    "derived from {} Hz bandwidth, {} deg phase margin",
                    cfg.gains.bandwidth_hz, cfg.gains.phase_margin_deg
                )
            };
            (cfg.altitude_gains()?, source)
        }
    };

    let h = TransferFunction::nominal_altitude_loop(&gains);
    let outer = margins(&h)?;
    let inner_model = match cfg.plant.accel_loop {
        AccelLoopModel::Ideal => TransferFunction::unity(),
        AccelLoopModel::Butterworth { bandwidth_hz } => TransferFunction::butterworth2(bandwidth_hz),
    };
    let inner = inner_loop_report(&inner_model)?;

    let mut warnings = Vec::new();
    match outer.phase_margin_deg {
        Some(pm) if pm < LOW_PHASE_MARGIN_DEG => {
            warnings.push(format!(
                "low phase margin: {pm:.2} deg (threshold {LOW_PHASE_MARGIN_DEG} deg)"
            ));
        }
        None => warnings.push("no gain crossover found in the searched band".to_string()),
        _ => {}
    }
    if !inner.within_lag_budget {
        warnings.push(format!(
            "inner-loop lag at the outer crossover exceeds the budget: {:.2} deg",
            inner.phase_lag_deg_at_outer_crossover
        ));
    }

    ensure_out_dir(out_dir)?;
    let bode_csv = out_dir.join("bode.csv");
    write_bode_csv(&bode_csv, &bode_table(&h, 1e-3, 1e2, 60)?)?;
    let report = AnalyzeReport {
        gains: GainsEcho {
            kp: gains.kp,
            kv: gains.kv,
            source,
        },
        outer_loop: outer,
        inner_loop: inner,
        warnings,
    };
    let margins_json = out_dir.join("margins.json");
    write_json(&margins_json, &report)?;
    Ok(AnalyzeOutputs {
        bode_csv,
        margins_json,
        report,
    })
}

/// Parse the `--gains-from "bw_hz,pm_deg"` flag.
pub fn parse_gains_from(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected \"bandwidth_hz,phase_margin_deg\", got {s:?}"
        )));
    }
    let bw = parts[0]
        .parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("bad bandwidth {:?}", parts[0])))?;
    let pm = parts[1]
        .parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("bad phase margin {:?}", parts[1])))?;
    Ok((bw, pm))
}
