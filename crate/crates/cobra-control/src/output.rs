//! CSV and JSON artifact writers.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::campaign::IterationRecord;
use crate::loopshape::BodePoint;
use crate::sim::TrajectoryLog;
use crate::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::OutputIo {
        path: path.to_path_buf(),
        source,
    }
}

/// One row per control tick.
pub fn write_trajectory_csv(path: &Path, log: &TrajectoryLog) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    (|| -> std::io::Result<()> {
        writeln!(
            w,
            "t,px,py,pz,vx,vy,vz,theta,eta,ax_cmd,ax_act,xi_p,xi_l,u_ilc"
        )?;
        for r in &log.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.px,
                r.py,
                r.pz,
                r.vx,
                r.vy,
                r.vz,
                r.theta,
                r.eta,
                r.ax_cmd,
                r.ax_act,
                r.xi_p,
                r.xi_l,
                r.u_ilc
            )?;
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

/// Lifted-domain artifacts of one learning iteration.
pub fn write_iteration_csv(path: &Path, record: &IterationRecord, dt: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    (|| -> std::io::Result<()> {
        writeln!(w, "k,t,y_m,u_mps2,d_hat_m")?;
        for k in 0..record.y.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                k,
                k as f64 * dt,
                record.y[k],
                record.u[k],
                record.d_hat[k]
            )?;
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

pub fn write_bode_csv(path: &Path, rows: &[BodePoint]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    (|| -> std::io::Result<()> {
        writeln!(w, "freq_hz,mag_db,phase_deg")?;
        for r in rows {
            writeln!(w, "{},{},{}", r.freq_hz, r.mag_db, r.phase_deg)?;
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}
