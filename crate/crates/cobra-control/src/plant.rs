//! Truth-model simulator of the tail-sitter's translational flight.
//!
//! The plant integrates the rigid-body acceleration model with a fixed-step
//! RK4 scheme and layers the non-idealities the position controllers do not
//! know about: the transient of the inner acceleration loop (a unity-DC-gain
//! second-order Butterworth low-pass), a first-order attitude-tracking lag,
//! flat-plate post-stall aerodynamics, wind, a repeatable disturbance
//! profile, and seeded sensor noise. Everything is deterministic for a given
//! configuration and seed.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{rotation_matrix, AttitudeAngles, InertialKinematics, SpecificAcceleration};
use crate::{Error, Result};

/// Flat-plate aerodynamic model parameters.
///
/// Lift and drag coefficients follow the post-stall flat-plate laws
/// `cl = 2 sin(a) cos(a)` and `cd = 2 sin^2(a) + cd0`, which stay
/// qualitatively correct across the whole 0-90 degree angle-of-attack sweep
/// of the maneuver. The controllers never see these numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeroConfig {
    /// Parasitic drag coefficient.
    pub cd0: f64,
    /// rho * S / (2 m) in 1/m; converts airspeed^2 into specific force.
    pub flat_plate_scale: f64,
    /// Body-Y damping rate in 1/s: `a_y = -k * (lateral airspeed)`.
    pub lateral_damping: f64,
}

impl Default for AeroConfig {
    fn default() -> Self {
        Self {
            cd0: 0.02,
            flat_plate_scale: 0.10,
            lateral_damping: 0.3,
        }
    }
}

/// Transient model of the inner body-X acceleration loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum AccelLoopModel {
    /// The commanded acceleration is realized exactly.
    Ideal,
    /// Unity-DC-gain second-order Butterworth low-pass.
    Butterworth { bandwidth_hz: f64 },
}

impl Default for AccelLoopModel {
    fn default() -> Self {
        AccelLoopModel::Butterworth { bandwidth_hz: 7.2 }
    }
}

/// Sensor noise standard deviations. Zero means an exact measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Altitude (Down position) noise, m.
    pub altitude_std_m: f64,
    /// Accelerometer noise per body axis, m/s^2.
    pub accel_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            altitude_std_m: 0.02,
            accel_std: 0.05,
        }
    }
}

/// Wind velocity over time: a constant base plus one gust window.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindProfile {
    /// Steady wind, inertial frame, m/s.
    pub base_mps: [f64; 3],
    /// Gust added on top of the base inside the window, m/s.
    pub gust_mps: [f64; 3],
    pub gust_start_s: f64,
    pub gust_end_s: f64,
}

impl Default for WindProfile {
    fn default() -> Self {
        Self {
            base_mps: [0.0; 3],
            gust_mps: [0.0; 3],
            gust_start_s: 0.0,
            gust_end_s: 0.0,
        }
    }
}

impl WindProfile {
    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let mut w = Vector3::from(self.base_mps);
        if t >= self.gust_start_s && t < self.gust_end_s {
            w += Vector3::from(self.gust_mps);
        }
        w
    }
}

/// Repeatable thrust-axis disturbance: a smooth deterministic profile that is
/// identical in every iteration plus a small seeded stochastic part that is
/// not, mirroring steady environmental disturbances versus gust noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceProfile {
    /// Seed of the stochastic component.
    pub seed: u64,
    /// Constant body-X acceleration bias, m/s^2.
    pub bias: f64,
    /// Sinusoidal components of the repetitive profile.
    pub harmonics: Vec<Harmonic>,
    /// Standard deviation of the per-step stochastic part, m/s^2.
    pub stochastic_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase_rad: f64,
}

impl Default for DisturbanceProfile {
    fn default() -> Self {
        Self {
            seed: 7,
            bias: 0.0,
            harmonics: Vec::new(),
            stochastic_std: 0.0,
        }
    }
}

impl DisturbanceProfile {
    /// The repetitive part d_rep(t); bit-identical across iterations.
    pub fn repetitive(&self, t: f64) -> f64 {
        let mut d = self.bias;
        for h in &self.harmonics {
            d += h.amplitude * (2.0 * std::f64::consts::PI * h.frequency_hz * t + h.phase_rad).sin();
        }
        d
    }
}

/// Full truth-model configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub mass_kg: f64,
    pub gravity: f64,
    /// Integrator step, s.
    pub dt_sim: f64,
    /// Attitude-tracking lag time constant, s. Zero means exact tracking.
    pub attitude_tau_s: f64,
    pub accel_loop: AccelLoopModel,
    pub aero: AeroConfig,
    pub noise: NoiseConfig,
    pub wind: WindProfile,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            mass_kg: 1.8,
            gravity: 9.81,
            dt_sim: 1e-3,
            attitude_tau_s: 0.15,
            accel_loop: AccelLoopModel::default(),
            aero: AeroConfig::default(),
            noise: NoiseConfig::default(),
            wind: WindProfile::default(),
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, reason: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    key: key.to_string(),
                    reason: reason.to_string(),
                })
            }
        };
        check(self.mass_kg > 0.0, "plant.mass_kg", "must be positive")?;
        check(self.gravity > 0.0, "plant.gravity", "must be positive")?;
        check(
            self.dt_sim > 0.0 && self.dt_sim.is_finite(),
            "plant.dt_sim",
            "must be a positive step",
        )?;
        check(
            self.attitude_tau_s >= 0.0,
            "plant.attitude_tau_s",
            "must be non-negative",
        )?;
        if let AccelLoopModel::Butterworth { bandwidth_hz } = self.accel_loop {
            check(
                bandwidth_hz > 0.0,
                "plant.accel_loop.bandwidth_hz",
                "must be positive",
            )?;
        }
        check(
            self.aero.lateral_damping > 0.0,
            "plant.aero.lateral_damping",
            "must be positive",
        )?;
        check(self.aero.cd0 >= 0.0, "plant.aero.cd0", "must be non-negative")?;
        check(
            self.aero.flat_plate_scale >= 0.0,
            "plant.aero.flat_plate_scale",
            "must be non-negative",
        )?;
        check(
            self.noise.altitude_std_m >= 0.0,
            "plant.noise.altitude_std_m",
            "must be non-negative",
        )?;
        check(
            self.noise.accel_std >= 0.0,
            "plant.noise.accel_std",
            "must be non-negative",
        )?;
        Ok(())
    }
}

/// Commands handed from the position controller to the plant, held
/// zero-order between control ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorCommands {
    /// Desired body-X specific acceleration, m/s^2.
    pub a_xd: f64,
    pub theta_d: f64,
    pub eta_d: f64,
}

/// Truth state of the simulated vehicle. Hidden from the controllers; they
/// only see [`Measurement`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightState {
    pub kinematics: InertialKinematics,
    pub angles: AttitudeAngles,
    /// Inner-loop filter output and rate (thrust-axis acceleration).
    pub filter_pos: f64,
    pub filter_vel: f64,
    /// Last commanded body-X acceleration (the ideal loop realizes this).
    pub last_a_xd: f64,
    pub t: f64,
}

impl FlightState {
    pub fn is_finite(&self) -> bool {
        self.kinematics.position.iter().all(|v| v.is_finite())
            && self.kinematics.velocity.iter().all(|v| v.is_finite())
            && self.angles.theta.is_finite()
            && self.angles.eta.is_finite()
            && self.filter_pos.is_finite()
            && self.filter_vel.is_finite()
    }
}

/// What the autopilot sensors deliver at one control tick.
#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    /// Measured Down position, m (altitude sensor).
    pub down_m: f64,
    /// Down velocity, m/s.
    pub v_down: f64,
    /// Lateral (inertial-Y) position, m; the maneuver path runs along
    /// inertial X, so this is the path deviation coordinate.
    pub lateral_m: f64,
    /// Attitude estimate.
    pub angles: AttitudeAngles,
    /// Accelerometer reading (specific acceleration, body frame).
    pub accel: SpecificAcceleration,
}

/// Aerodynamic specific acceleration for a body moving at `v_air` (inertial
/// velocity relative to the air mass) with the given attitude.
pub fn aero_specific_acceleration(
    v_air: &Vector3<f64>,
    angles: &AttitudeAngles,
    aero: &AeroConfig,
) -> SpecificAcceleration {
    let v_body = rotation_matrix(angles).transpose() * v_air;
    let v_plane_sq = v_body.x * v_body.x + v_body.z * v_body.z;
    let (ax, az) = if v_plane_sq > 0.0 {
        let alpha = v_body.z.atan2(v_body.x);
        let (sa, ca) = alpha.sin_cos();
        let cl = 2.0 * sa * ca;
        let cd = 2.0 * sa * sa + aero.cd0;
        let q = aero.flat_plate_scale * v_plane_sq;
        (-q * (cd * ca - cl * sa), -q * (cd * sa + cl * ca))
    } else {
        (0.0, 0.0)
    };
    let ay = -aero.lateral_damping * v_body.y;
    SpecificAcceleration::new(ax, ay, az)
}

/// Inner acceleration loop dynamics: second-order Butterworth low-pass with
/// natural frequency `w0` (its -3 dB bandwidth) and unity DC gain.
pub fn accel_filter_derivative(pos: f64, vel: f64, input: f64, w0: f64) -> (f64, f64) {
    (vel, w0 * w0 * (input - pos) - std::f64::consts::SQRT_2 * w0 * vel)
}

/// Standalone discrete realization of the inner acceleration loop, stepped
/// with the same RK4 scheme the plant uses.
#[derive(Debug, Clone)]
pub struct AccelLoopFilter {
    w0: f64,
    pos: f64,
    vel: f64,
}

impl AccelLoopFilter {
    pub fn new(bandwidth_hz: f64) -> Self {
        Self {
            w0: 2.0 * std::f64::consts::PI * bandwidth_hz,
            pos: 0.0,
            vel: 0.0,
        }
    }

    pub fn output(&self) -> f64 {
        self.pos
    }

    /// Advance one step with the input held constant; returns the new output.
    pub fn step(&mut self, input: f64, dt: f64) -> f64 {
        let f = |p: f64, v: f64| accel_filter_derivative(p, v, input, self.w0);
        let (k1p, k1v) = f(self.pos, self.vel);
        let (k2p, k2v) = f(self.pos + 0.5 * dt * k1p, self.vel + 0.5 * dt * k1v);
        let (k3p, k3v) = f(self.pos + 0.5 * dt * k2p, self.vel + 0.5 * dt * k2v);
        let (k4p, k4v) = f(self.pos + dt * k3p, self.vel + dt * k3v);
        self.pos += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        self.vel += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        self.pos
    }
}

/// Exact discrete update of the first-order attitude lag. `tau = 0` tracks
/// the command exactly.
pub fn attitude_lag_step(current: f64, commanded: f64, tau: f64, dt: f64) -> f64 {
    if tau <= 0.0 {
        commanded
    } else {
        commanded + (current - commanded) * (-dt / tau).exp()
    }
}

/// First-order lag applied per attitude angle.
pub fn attitude_lag(
    current: &AttitudeAngles,
    commanded: &AttitudeAngles,
    tau: f64,
    dt: f64,
) -> AttitudeAngles {
    AttitudeAngles::new(
        attitude_lag_step(current.theta, commanded.theta, tau, dt),
        attitude_lag_step(current.eta, commanded.eta, tau, dt),
    )
}

/// The truth plant. Pure over its state; independent runs may execute
/// concurrently.
#[derive(Debug, Clone)]
pub struct Plant {
    cfg: PlantConfig,
}

/// Internal integration state vector layout.
#[derive(Debug, Clone, Copy)]
struct RawState {
    p: Vector3<f64>,
    v: Vector3<f64>,
    fpos: f64,
    fvel: f64,
    theta: f64,
    eta: f64,
}

impl RawState {
    fn add_scaled(&self, k: &RawState, s: f64) -> RawState {
        RawState {
            p: self.p + k.p * s,
            v: self.v + k.v * s,
            fpos: self.fpos + k.fpos * s,
            fvel: self.fvel + k.fvel * s,
            theta: self.theta + k.theta * s,
            eta: self.eta + k.eta * s,
        }
    }
}

impl Plant {
    pub fn new(cfg: PlantConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    /// State at the start of a run: on the path at the given Down position,
    /// attitude already at the commanded angles, inner loop at rest.
    pub fn initial_state(
        &self,
        down_m: f64,
        velocity: Vector3<f64>,
        angles: AttitudeAngles,
    ) -> FlightState {
        FlightState {
            kinematics: InertialKinematics {
                position: Vector3::new(0.0, 0.0, down_m),
                velocity,
            },
            angles,
            filter_pos: 0.0,
            filter_vel: 0.0,
            last_a_xd: 0.0,
            t: 0.0,
        }
    }

    /// Thrust-axis acceleration currently realized by the inner loop.
    pub fn actual_ax(&self, state: &FlightState) -> f64 {
        match self.cfg.accel_loop {
            AccelLoopModel::Ideal => state.last_a_xd,
            AccelLoopModel::Butterworth { .. } => state.filter_pos,
        }
    }

    /// Total body-frame specific acceleration: thrust + aero + disturbance.
    fn body_acceleration(
        &self,
        velocity: &Vector3<f64>,
        angles: &AttitudeAngles,
        ax_act: f64,
        d_x: f64,
        t: f64,
    ) -> SpecificAcceleration {
        let v_air = velocity - self.cfg.wind.velocity(t);
        let aero = aero_specific_acceleration(&v_air, angles, &self.cfg.aero);
        SpecificAcceleration::new(ax_act + aero.ax + d_x, aero.ay, aero.az)
    }

    fn derivative(
        &self,
        s: &RawState,
        cmd: &ActuatorCommands,
        disturbance: &DisturbanceProfile,
        d_stoch: f64,
        t: f64,
    ) -> RawState {
        let lagged = self.cfg.attitude_tau_s > 0.0;
        let angles = if lagged {
            AttitudeAngles::new(s.theta, s.eta)
        } else {
            AttitudeAngles::new(cmd.theta_d, cmd.eta_d)
        };
        let ax_act = match self.cfg.accel_loop {
            AccelLoopModel::Ideal => cmd.a_xd,
            AccelLoopModel::Butterworth { .. } => s.fpos,
        };
        let d_x = disturbance.repetitive(t) + d_stoch;
        let a_body = self.body_acceleration(&s.v, &angles, ax_act, d_x, t);
        let accel = Vector3::new(0.0, 0.0, self.cfg.gravity)
            + rotation_matrix(&angles) * a_body.as_vector();

        let (fpos_dot, fvel_dot) = match self.cfg.accel_loop {
            AccelLoopModel::Ideal => (0.0, 0.0),
            AccelLoopModel::Butterworth { bandwidth_hz } => {
                let w0 = 2.0 * std::f64::consts::PI * bandwidth_hz;
                accel_filter_derivative(s.fpos, s.fvel, cmd.a_xd, w0)
            }
        };
        let (theta_dot, eta_dot) = if lagged {
            let tau = self.cfg.attitude_tau_s;
            ((cmd.theta_d - s.theta) / tau, (cmd.eta_d - s.eta) / tau)
        } else {
            (0.0, 0.0)
        };
        RawState {
            p: s.v,
            v: accel,
            fpos: fpos_dot,
            fvel: fvel_dot,
            theta: theta_dot,
            eta: eta_dot,
        }
    }

    /// Advance one integrator step with commands and the stochastic
    /// disturbance sample held constant. The smooth disturbance and wind are
    /// evaluated at the RK4 stage times.
    pub fn step(
        &self,
        state: &FlightState,
        cmd: &ActuatorCommands,
        disturbance: &DisturbanceProfile,
        d_stoch: f64,
    ) -> Result<FlightState> {
        let dt = self.cfg.dt_sim;
        let t = state.t;
        let y0 = RawState {
            p: state.kinematics.position,
            v: state.kinematics.velocity,
            fpos: state.filter_pos,
            fvel: state.filter_vel,
            theta: state.angles.theta,
            eta: state.angles.eta,
        };
        let k1 = self.derivative(&y0, cmd, disturbance, d_stoch, t);
        let k2 = self.derivative(
            &y0.add_scaled(&k1, 0.5 * dt),
            cmd,
            disturbance,
            d_stoch,
            t + 0.5 * dt,
        );
        let k3 = self.derivative(
            &y0.add_scaled(&k2, 0.5 * dt),
            cmd,
            disturbance,
            d_stoch,
            t + 0.5 * dt,
        );
        let k4 = self.derivative(&y0.add_scaled(&k3, dt), cmd, disturbance, d_stoch, t + dt);

        let sixth = dt / 6.0;
        let mut next = y0
            .add_scaled(&k1, sixth)
            .add_scaled(&k2, 2.0 * sixth)
            .add_scaled(&k3, 2.0 * sixth)
            .add_scaled(&k4, sixth);

        if self.cfg.attitude_tau_s <= 0.0 {
            next.theta = cmd.theta_d;
            next.eta = cmd.eta_d;
        }

        let new_state = FlightState {
            kinematics: InertialKinematics {
                position: next.p,
                velocity: next.v,
            },
            angles: AttitudeAngles::new(next.theta, next.eta),
            filter_pos: next.fpos,
            filter_vel: next.fvel,
            last_a_xd: cmd.a_xd,
            t: t + dt,
        };
        if !new_state.is_finite() || !cmd.a_xd.is_finite() {
            return Err(Error::SimulationFault { t });
        }
        Ok(new_state)
    }

    /// Sensor model: truth plus seeded Gaussian noise. With all standard
    /// deviations zero the measurement equals the truth and no random draws
    /// are consumed.
    pub fn measure(
        &self,
        state: &FlightState,
        d_x_now: f64,
        rng: &mut impl Rng,
    ) -> Measurement {
        let accel_truth = self.body_acceleration(
            &state.kinematics.velocity,
            &state.angles,
            self.actual_ax(state),
            d_x_now,
            state.t,
        );
        let mut down = state.kinematics.position.z;
        let mut accel = accel_truth;
        if self.cfg.noise.altitude_std_m > 0.0 {
            let n = Normal::new(0.0, self.cfg.noise.altitude_std_m).expect("valid std");
            down += n.sample(rng);
        }
        if self.cfg.noise.accel_std > 0.0 {
            let n = Normal::new(0.0, self.cfg.noise.accel_std).expect("valid std");
            accel.ax += n.sample(rng);
            accel.ay += n.sample(rng);
            accel.az += n.sample(rng);
        }
        Measurement {
            down_m: down,
            v_down: state.kinematics.velocity.z,
            lateral_m: state.kinematics.position.y,
            angles: state.angles,
            accel,
        }
    }
}
