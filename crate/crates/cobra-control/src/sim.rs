//! Closed-loop flight runner.
//!
//! Wires the truth plant to the position controller at the configured
//! control rate, holds commands zero-order between ticks, applies the
//! lifted learning input as a zero-order-hold signal, and records one log
//! row per control tick. Noise and disturbance streams are derived from the
//! run seed and the iteration index, so a run is bit-reproducible and each
//! campaign iteration sees the same repetitive disturbance but fresh noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::RunConfig;
use crate::controllers::PositionController;
use crate::ilc::LiftedInput;
use crate::plant::{ActuatorCommands, Plant};
use crate::{Error, Result};

/// One control-tick record: truth state, commands, and the controller's
/// measured tracking errors.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogRow {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub theta: f64,
    pub eta: f64,
    pub ax_cmd: f64,
    pub ax_act: f64,
    pub xi_p: f64,
    pub xi_l: f64,
    pub u_ilc: f64,
}

/// Full flight log plus controller event counters.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    pub guard_events: u64,
    pub clamp_events: u64,
}

impl TrajectoryLog {
    pub fn rms_xi_p(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        (self.rows.iter().map(|r| r.xi_p * r.xi_p).sum::<f64>() / self.rows.len() as f64).sqrt()
    }

    pub fn max_abs_xi_p(&self) -> f64 {
        self.rows.iter().map(|r| r.xi_p.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_xi_l(&self) -> f64 {
        self.rows.iter().map(|r| r.xi_l.abs()).fold(0.0, f64::max)
    }

    pub fn final_xi_p(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.xi_p)
    }

    pub fn final_xi_l(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.xi_l)
    }

    pub fn max_a_xd(&self) -> f64 {
        self.rows.iter().map(|r| r.ax_cmd).fold(0.0, f64::max)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Independent stream seed for (base seed, purpose tag, iteration).
pub fn stream_seed(base: u64, tag: u64, iteration: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(tag)) ^ iteration)
}

const STREAM_MEASUREMENT: u64 = 0x4d45_4153;
const STREAM_DISTURBANCE: u64 = 0x4449_5354;

/// Fly one maneuver. `u_ilc` is the learned feedforward input (zero when
/// absent); `iteration` selects the per-iteration noise streams.
pub fn run_flight(
    cfg: &RunConfig,
    u_ilc: Option<&LiftedInput>,
    iteration: u64,
) -> Result<TrajectoryLog> {
    let profile = cfg.maneuver_profile();
    let duration = profile.duration();
    if duration <= 0.0 {
        return Err(Error::EmptyTrajectory);
    }
    let ctl_cfg = cfg.controller_config()?;
    let plant = Plant::new(cfg.plant.clone())?;
    let mut controller = PositionController::new(ctl_cfg, profile);

    let dt = cfg.plant.dt_sim;
    let steps = (duration / dt).round().max(1.0) as usize;
    let tick_every = tick_interval(ctl_cfg.rate_hz, dt)?;

    let mut meas_rng =
        ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_MEASUREMENT, iteration));
    let mut dist_rng = ChaCha8Rng::seed_from_u64(stream_seed(
        cfg.disturbance.seed,
        STREAM_DISTURBANCE,
        iteration,
    ));
    let stochastic = if cfg.disturbance.stochastic_std > 0.0 {
        Some(Normal::new(0.0, cfg.disturbance.stochastic_std).expect("valid std"))
    } else {
        None
    };

    let mut state = plant.initial_state(
        cfg.initial_down_m(),
        cfg.initial_velocity(),
        cfg.initial_angles(),
    );
    state.kinematics.position.y = cfg.profile.initial_lateral_offset_m;

    let mut rows = Vec::with_capacity(steps / tick_every + 1);
    let mut cmd = ActuatorCommands {
        a_xd: 0.0,
        theta_d: profile.theta_level,
        eta_d: 0.0,
    };
    for i in 0..steps {
        let t = i as f64 * dt;
        let d_stoch = stochastic.map_or(0.0, |n| n.sample(&mut dist_rng));
        if i % tick_every == 0 {
            let d_now = cfg.disturbance.repetitive(t) + d_stoch;
            let m = plant.measure(&state, d_now, &mut meas_rng);
            let u = u_ilc.map_or(0.0, |z| z.at(t));
            let (c, diag) = controller.tick(t, &m, u);
            cmd = c;
            rows.push(LogRow {
                t,
                px: state.kinematics.position.x,
                py: state.kinematics.position.y,
                pz: state.kinematics.position.z,
                vx: state.kinematics.velocity.x,
                vy: state.kinematics.velocity.y,
                vz: state.kinematics.velocity.z,
                theta: state.angles.theta,
                eta: state.angles.eta,
                ax_cmd: cmd.a_xd,
                ax_act: plant.actual_ax(&state),
                xi_p: diag.errors.xi_p,
                xi_l: diag.errors.xi_l,
                u_ilc: u,
            });
        }
        state = plant.step(&state, &cmd, &cfg.disturbance, d_stoch)?;
    }
    Ok(TrajectoryLog {
        rows,
        guard_events: controller.guard_events,
        clamp_events: controller.clamp_events,
    })
}

fn tick_interval(rate_hz: f64, dt_sim: f64) -> Result<usize> {
    let per_tick = 1.0 / (rate_hz * dt_sim);
    let rounded = per_tick.round();
    if rounded < 1.0 || (per_tick - rounded).abs() > 1e-9 {
        return Err(Error::InvalidConfig {
            key: "gains.controller_rate_hz".into(),
            reason: format!(
                "control period must be an integer multiple of dt_sim (rate {rate_hz} Hz, dt {dt_sim} s)"
            ),
        });
    }
    Ok(rounded as usize)
}
