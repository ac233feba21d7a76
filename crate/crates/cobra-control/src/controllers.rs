//! Position-control laws for the maneuver: feedforward plus feedback
//! altitude control on the vertical-plane thrust component, proportional
//! lateral control through the body-Z tilt, command composition, and the
//! desired-pitch profile generator.
//!
//! Sign conventions: tracking errors are desired minus actual. The Down axis
//! is positive, so `xi_p > 0` means the vehicle sits above the altitude
//! setpoint and the feedback must trim thrust; the feedback term therefore
//! enters the thrust command with negative sign while the learned
//! feedforward input `u_ilc` enters positively (it models an additive
//! acceleration on the error dynamics).

use serde::{Deserialize, Serialize};

use crate::dynamics::{compose_commands, AttitudeAngles};
use crate::plant::{ActuatorCommands, Measurement};
use crate::{Error, Result};

/// Altitude feedback gains: proportional on the altitude error (1/s^2) and
/// derivative on the vertical velocity error (1/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltitudeGains {
    pub kp: f64,
    pub kv: f64,
}

impl AltitudeGains {
    pub fn new(kp: f64, kv: f64) -> Result<Self> {
        if kp > 0.0 && kv > 0.0 && kp.is_finite() && kv.is_finite() {
            Ok(Self { kp, kv })
        } else {
            Err(Error::InvalidConfig {
                key: "gains".into(),
                reason: format!("kp and kv must be positive and finite, got ({kp}, {kv})"),
            })
        }
    }
}

/// Lateral proportional gain, 1/s^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralGain {
    pub kl: f64,
}

impl LateralGain {
    pub fn new(kl: f64) -> Result<Self> {
        if kl > 0.0 && kl.is_finite() {
            Ok(Self { kl })
        } else {
            Err(Error::InvalidConfig {
                key: "gains.lateral".into(),
                reason: format!("must be positive and finite, got {kl}"),
            })
        }
    }
}

/// Tracking errors, desired minus actual: altitude error (Down axis, m),
/// vertical velocity error (m/s), lateral path deviation (m, along the
/// inertial-Y coordinate of the path frame).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingErrors {
    pub xi_p: f64,
    pub xi_v: f64,
    pub xi_l: f64,
}

/// Time-parameterized desired pitch plus the constant altitude and straight
/// lateral path the maneuver holds.
///
/// The pitch trajectory is continuous piecewise-linear: hold the level-flight
/// pitch, ramp down by the head-up angle, hold, ramp back, hold to the end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManeuverProfile {
    /// Level-flight pitch, rad.
    pub theta_level: f64,
    /// Head-up angle subtracted from the level pitch mid-maneuver, rad.
    pub head_up: f64,
    pub pre_hold_s: f64,
    pub ramp_s: f64,
    pub hold_s: f64,
    pub post_hold_s: f64,
    /// Constant desired Down position, m (negative of the desired altitude).
    pub desired_down_m: f64,
    /// Desired lateral coordinate of the straight path, m.
    pub path_lateral_m: f64,
}

impl ManeuverProfile {
    /// Total maneuver duration.
    pub fn duration(&self) -> f64 {
        self.pre_hold_s + 2.0 * self.ramp_s + self.hold_s + self.post_hold_s
    }
}

/// Desired pitch at time `t`.
pub fn pitch_profile(t: f64, profile: &ManeuverProfile) -> f64 {
    let t0 = profile.pre_hold_s;
    let t1 = t0 + profile.ramp_s;
    let t2 = t1 + profile.hold_s;
    let t3 = t2 + profile.ramp_s;
    let level = profile.theta_level;
    let dip = profile.head_up;
    if t < t0 {
        level
    } else if t < t1 {
        level - dip * (t - t0) / profile.ramp_s
    } else if t < t2 {
        level - dip
    } else if t < t3 {
        level - dip * (1.0 - (t - t2) / profile.ramp_s)
    } else {
        level
    }
}

/// Feedforward thrust-plane acceleration that cancels gravity and the
/// measured body-Y/Z specific-acceleration feedthrough, plus any commanded
/// vertical acceleration.
pub fn altitude_feedforward(
    pzdd_des: f64,
    angles: &AttitudeAngles,
    ay_meas: f64,
    az_meas: f64,
    g: f64,
) -> f64 {
    let (st, ct) = angles.theta.sin_cos();
    -pzdd_des + g - az_meas * st + ay_meas * ct * angles.eta.sin()
}

/// Proportional-derivative altitude feedback.
pub fn altitude_feedback(errors: &TrackingErrors, gains: &AltitudeGains) -> f64 {
    gains.kp * errors.xi_p + gains.kv * errors.xi_v
}

/// Vertical-plane thrust command: the summed acceleration terms divided by
/// cos(theta), guarded against the 90-degree pitch singularity.
pub fn altitude_command(
    a_ff: f64,
    a_fb: f64,
    u_ilc: f64,
    theta: f64,
    theta_guard: f64,
) -> Result<f64> {
    if theta.abs() >= theta_guard {
        return Err(Error::AttitudeSingularity {
            theta_deg: theta.to_degrees(),
            limit_deg: theta_guard.to_degrees(),
        });
    }
    Ok((a_ff + a_fb + u_ilc) / theta.cos())
}

/// Proportional lateral acceleration command, saturated so the commanded
/// tilt stays well away from +/- 90 degrees.
pub fn lateral_command(xi_l: f64, gain: &LateralGain, max_abs: f64) -> f64 {
    (gain.kl * xi_l).clamp(-max_abs, max_abs)
}

/// Static controller parameters.
#[derive(Debug, Clone, Copy)]
pub struct ControllerConfig {
    pub gains: AltitudeGains,
    pub lateral: LateralGain,
    /// Saturation of the lateral acceleration command, m/s^2.
    pub lateral_saturation: f64,
    /// Pitch magnitude beyond which the thrust command is held, rad.
    pub theta_guard: f64,
    /// Clamp floor for the vertical-plane thrust component, m/s^2.
    pub min_a_xp: f64,
    pub gravity: f64,
    pub rate_hz: f64,
}

/// Per-tick byproducts, logged alongside the commands.
#[derive(Debug, Clone, Copy)]
pub struct TickDiagnostics {
    pub errors: TrackingErrors,
    pub a_ff: f64,
    pub a_fb: f64,
    pub a_xpd: f64,
    pub u_ilc: f64,
    pub guard_active: bool,
    pub clamped: bool,
}

/// The position controller run once per control tick. Owns the profile
/// clock and the held command used while the singularity guard is active.
#[derive(Debug, Clone)]
pub struct PositionController {
    cfg: ControllerConfig,
    profile: ManeuverProfile,
    held_a_xpd: f64,
    pub guard_events: u64,
    pub clamp_events: u64,
}

impl PositionController {
    pub fn new(cfg: ControllerConfig, profile: ManeuverProfile) -> Self {
        Self {
            cfg,
            profile,
            // A hover-scale hold keeps the first guarded tick sane.
            held_a_xpd: cfg.gravity,
            guard_events: 0,
            clamp_events: 0,
        }
    }

    pub fn profile(&self) -> &ManeuverProfile {
        &self.profile
    }

    /// One pass of the control chain: profile lookup, tracking errors,
    /// lateral and altitude laws, and virtual-control composition.
    pub fn tick(&mut self, t: f64, m: &Measurement, u_ilc: f64) -> (ActuatorCommands, TickDiagnostics) {
        let theta_d = pitch_profile(t, &self.profile);
        let errors = TrackingErrors {
            xi_p: self.profile.desired_down_m - m.down_m,
            xi_v: -m.v_down,
            xi_l: self.profile.path_lateral_m - m.lateral_m,
        };
        let a_ld = lateral_command(errors.xi_l, &self.cfg.lateral, self.cfg.lateral_saturation);
        let a_ff = altitude_feedforward(0.0, &m.angles, m.accel.ay, m.accel.az, self.cfg.gravity);
        let a_fb = altitude_feedback(&errors, &self.cfg.gains);
        // xi_p > 0 means the vehicle is above the setpoint: trim thrust.
        let (a_xpd, guard_active) =
            match altitude_command(a_ff, -a_fb, u_ilc, m.angles.theta, self.cfg.theta_guard) {
                Ok(v) => {
                    self.held_a_xpd = v;
                    (v, false)
                }
                Err(_) => {
                    self.guard_events += 1;
                    (self.held_a_xpd, true)
                }
            };
        let composed = compose_commands(a_xpd, a_ld, self.cfg.min_a_xp);
        if composed.clamped {
            self.clamp_events += 1;
        }
        (
            ActuatorCommands {
                a_xd: composed.a_xd,
                theta_d,
                eta_d: composed.eta_d,
            },
            TickDiagnostics {
                errors,
                a_ff,
                a_fb,
                a_xpd,
                u_ilc,
                guard_active,
                clamped: composed.clamped,
            },
        )
    }
}
