//! Run configuration.
//!
//! One TOML file drives everything: plant truth model, disturbance,
//! maneuver profile, controller gains, and learning settings. Unknown keys
//! are rejected, every field has a documented default (see
//! `configs/default.toml`), and angles cross the file boundary in degrees
//! while the library works in radians.

use std::path::Path;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controllers::{AltitudeGains, ControllerConfig, LateralGain, ManeuverProfile};
use crate::dynamics::AttitudeAngles;
use crate::ilc::IlcConfig;
use crate::loopshape::{derive_gains, DESIGN_BANDWIDTH_HZ, DESIGN_PHASE_MARGIN_DEG};
use crate::plant::{DisturbanceProfile, PlantConfig};
use crate::{Error, Result};

/// Maneuver geometry and timing, file-facing (degrees, altitude up).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    /// Level-flight pitch, degrees.
    pub theta_level_deg: f64,
    /// Head-up angle subtracted mid-maneuver, degrees.
    pub head_up_deg: f64,
    pub pre_hold_s: f64,
    pub ramp_s: f64,
    pub hold_s: f64,
    pub post_hold_s: f64,
    /// Desired altitude above the origin, m (Down position is its negative).
    pub altitude_m: f64,
    /// Desired lateral coordinate of the straight path, m.
    pub path_lateral_m: f64,
    /// Airspeed entering the maneuver, m/s.
    pub initial_speed_mps: f64,
    /// Start offsets against the references, for disturbance-rejection runs.
    pub initial_down_offset_m: f64,
    pub initial_lateral_offset_m: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            theta_level_deg: 82.0,
            head_up_deg: 80.0,
            pre_hold_s: 2.0,
            ramp_s: 2.0,
            hold_s: 3.0,
            post_hold_s: 3.0,
            altitude_m: 50.0,
            path_lateral_m: 0.0,
            initial_speed_mps: 17.0,
            initial_down_offset_m: 0.0,
            initial_lateral_offset_m: 0.0,
        }
    }
}

/// Controller gains and guards.
///
/// When `kp`/`kv` are absent the altitude gains are derived from the
/// bandwidth / phase-margin design targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    pub bandwidth_hz: f64,
    pub phase_margin_deg: f64,
    pub kp: Option<f64>,
    pub kv: Option<f64>,
    /// Lateral proportional gain, 1/s^2.
    pub lateral: f64,
    /// Lateral acceleration command saturation, m/s^2.
    pub lateral_saturation_mps2: f64,
    pub controller_rate_hz: f64,
    /// Pitch magnitude beyond which the thrust command is held, degrees.
    pub theta_guard_deg: f64,
    /// Clamp floor for the vertical-plane thrust component, m/s^2.
    pub min_a_xp: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: DESIGN_BANDWIDTH_HZ,
            phase_margin_deg: DESIGN_PHASE_MARGIN_DEG,
            kp: None,
            kv: None,
            lateral: 1.5,
            lateral_saturation_mps2: 4.905,
            controller_rate_hz: 250.0,
            theta_guard_deg: 87.0,
            min_a_xp: 0.1,
        }
    }
}

/// Learning settings; `n` defaults to the maneuver duration divided by `dt`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IlcSettings {
    /// Lifted sampling interval, s.
    pub dt: f64,
    pub n: Option<usize>,
    pub alpha: f64,
    /// Upper bound applied to every lifted input sample, m/s^2.
    pub c_max: f64,
    pub process_noise: f64,
    pub measurement_noise: f64,
    pub initial_covariance: f64,
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IlcSettings {
    fn default() -> Self {
        Self {
            dt: 0.1,
            n: None,
            alpha: 1e-4,
            c_max: 5.0,
            process_noise: 1e-4,
            measurement_noise: 1e-2,
            initial_covariance: 1.0,
            kkt_tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub plant: PlantConfig,
    pub disturbance: DisturbanceProfile,
    pub profile: ProfileConfig,
    pub gains: GainsConfig,
    pub ilc: IlcSettings,
}

impl RunConfig {
    /// Read and validate a TOML configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

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
        self.plant.validate()?;

        let p = &self.profile;
        check(
            p.theta_level_deg > 0.0 && p.theta_level_deg < 90.0,
            "profile.theta_level_deg",
            "must lie in (0, 90)",
        )?;
        check(
            p.head_up_deg > 0.0 && p.head_up_deg <= p.theta_level_deg,
            "profile.head_up_deg",
            "must lie in (0, theta_level_deg]",
        )?;
        for (v, key) in [
            (p.pre_hold_s, "profile.pre_hold_s"),
            (p.ramp_s, "profile.ramp_s"),
            (p.hold_s, "profile.hold_s"),
            (p.post_hold_s, "profile.post_hold_s"),
        ] {
            check(v >= 0.0 && v.is_finite(), key, "must be non-negative")?;
        }
        check(
            p.initial_speed_mps >= 0.0,
            "profile.initial_speed_mps",
            "must be non-negative",
        )?;

        let g = &self.gains;
        check(
            g.kp.is_some() == g.kv.is_some(),
            "gains.kp",
            "kp and kv must be given together",
        )?;
        self.altitude_gains()?;
        LateralGain::new(g.lateral)?;
        check(
            g.lateral_saturation_mps2 > 0.0,
            "gains.lateral_saturation_mps2",
            "must be positive",
        )?;
        check(
            g.controller_rate_hz > 0.0,
            "gains.controller_rate_hz",
            "must be positive",
        )?;
        let per_tick = 1.0 / (g.controller_rate_hz * self.plant.dt_sim);
        check(
            (per_tick - per_tick.round()).abs() <= 1e-9 && per_tick.round() >= 1.0,
            "gains.controller_rate_hz",
            "control period must be an integer multiple of plant.dt_sim",
        )?;
        check(
            g.theta_guard_deg > 0.0 && g.theta_guard_deg < 90.0,
            "gains.theta_guard_deg",
            "must lie in (0, 90)",
        )?;
        check(g.min_a_xp > 0.0, "gains.min_a_xp", "must be positive")?;

        let i = &self.ilc;
        check(i.dt > 0.0, "ilc.dt", "must be positive")?;
        check(
            g.controller_rate_hz * i.dt >= 1.0,
            "ilc.dt",
            "must be no finer than the control period",
        )?;
        check(i.alpha >= 0.0, "ilc.alpha", "must be non-negative")?;
        check(
            i.measurement_noise > 0.0,
            "ilc.measurement_noise",
            "must be positive",
        )?;
        check(
            i.process_noise >= 0.0,
            "ilc.process_noise",
            "must be non-negative",
        )?;
        check(
            i.initial_covariance >= 0.0,
            "ilc.initial_covariance",
            "must be non-negative",
        )?;
        check(i.c_max.is_finite(), "ilc.c_max", "must be finite")?;
        check(i.kkt_tolerance > 0.0, "ilc.kkt_tolerance", "must be positive")?;
        check(
            i.max_iterations >= 1,
            "ilc.max_iterations",
            "must be at least 1",
        )?;
        if let Some(n) = i.n {
            check(n >= 2, "ilc.n", "needs at least two lifted samples")?;
            let window = (n - 1) as f64 * i.dt;
            check(
                window <= self.maneuver_profile().duration() + 1e-9,
                "ilc.n",
                "lifted window must fit inside the maneuver",
            )?;
        }
        Ok(())
    }

    /// Profile in library units (radians, NED Down).
    pub fn maneuver_profile(&self) -> ManeuverProfile {
        let p = &self.profile;
        ManeuverProfile {
            theta_level: p.theta_level_deg.to_radians(),
            head_up: p.head_up_deg.to_radians(),
            pre_hold_s: p.pre_hold_s,
            ramp_s: p.ramp_s,
            hold_s: p.hold_s,
            post_hold_s: p.post_hold_s,
            desired_down_m: -p.altitude_m,
            path_lateral_m: p.path_lateral_m,
        }
    }

    /// Altitude gains: explicit when given, otherwise derived from the
    /// bandwidth / phase-margin targets.
    pub fn altitude_gains(&self) -> Result<AltitudeGains> {
        match (self.gains.kp, self.gains.kv) {
            (Some(kp), Some(kv)) => AltitudeGains::new(kp, kv),
            _ => derive_gains(self.gains.bandwidth_hz, self.gains.phase_margin_deg),
        }
    }

    pub fn controller_config(&self) -> Result<ControllerConfig> {
        Ok(ControllerConfig {
            gains: self.altitude_gains()?,
            lateral: LateralGain::new(self.gains.lateral)?,
            lateral_saturation: self.gains.lateral_saturation_mps2,
            theta_guard: self.gains.theta_guard_deg.to_radians(),
            min_a_xp: self.gains.min_a_xp,
            gravity: self.plant.gravity,
            rate_hz: self.gains.controller_rate_hz,
        })
    }

    /// Learning configuration with the lifted horizon resolved.
    pub fn ilc_config(&self) -> Result<(IlcConfig, usize, f64)> {
        let dt = self.ilc.dt;
        let n = match self.ilc.n {
            Some(n) => n,
            None => {
                let n = (self.maneuver_profile().duration() / dt + 1e-9).floor() as usize;
                n.max(2)
            }
        };
        let cfg = IlcConfig {
            alpha: self.ilc.alpha,
            c_max: DVector::from_element(n, self.ilc.c_max),
            process_noise: self.ilc.process_noise,
            measurement_noise: self.ilc.measurement_noise,
            initial_covariance: self.ilc.initial_covariance,
            kkt_tolerance: self.ilc.kkt_tolerance,
            max_iterations: self.ilc.max_iterations,
        };
        cfg.validate()?;
        Ok((cfg, n, dt))
    }

    /// The maneuver is flown toward -X so a positive level pitch is
    /// nose-first; the path is the inertial X axis.
    pub fn initial_velocity(&self) -> Vector3<f64> {
        Vector3::new(-self.profile.initial_speed_mps, 0.0, 0.0)
    }

    pub fn initial_angles(&self) -> AttitudeAngles {
        AttitudeAngles::new(self.profile.theta_level_deg.to_radians(), 0.0)
    }

    pub fn initial_down_m(&self) -> f64 {
        -self.profile.altitude_m + self.profile.initial_down_offset_m
    }

    /// Canonical JSON echo of the parsed configuration.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults_validate_and_derive_the_design_gains() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let g = cfg.altitude_gains().unwrap();
        assert!((g.kp - 0.3557252).abs() < 1e-4);
        assert!((g.kv - 1.4893985).abs() < 1e-4);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let f = write_temp("seed = 1\n[plant]\nmass_kg = 1.8\nbogus_key = 3\n");
        let err = RunConfig::load(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key"), "diagnostic was: {msg}");
    }

    #[test]
    fn missing_file_reports_the_path() {
        let err = RunConfig::load(Path::new("/nonexistent/cobra.toml")).unwrap_err();
        assert!(matches!(err, Error::ConfigIo { .. }));
        assert!(err.to_string().contains("/nonexistent/cobra.toml"));
    }

    #[test]
    fn invalid_values_name_the_offending_key() {
        let f = write_temp("[plant]\nmass_kg = -1.0\n");
        let err = RunConfig::load(f.path()).unwrap_err();
        assert!(err.to_string().contains("plant.mass_kg"));

        let f = write_temp("[profile]\nhead_up_deg = 95.0\n");
        let err = RunConfig::load(f.path()).unwrap_err();
        assert!(err.to_string().contains("profile.head_up_deg"));
    }

    #[test]
    fn explicit_gains_override_the_derivation() {
        let f = write_temp("[gains]\nkp = 1.0\nkv = 2.0\n");
        let cfg = RunConfig::load(f.path()).unwrap();
        let g = cfg.altitude_gains().unwrap();
        assert_eq!((g.kp, g.kv), (1.0, 2.0));
    }

    #[test]
    fn half_specified_explicit_gains_are_rejected() {
        let f = write_temp("[gains]\nkp = 1.0\n");
        let err = RunConfig::load(f.path()).unwrap_err();
        assert!(err.to_string().contains("gains.kp"));
    }

    #[test]
    fn lifted_horizon_defaults_to_the_maneuver_duration() {
        let cfg = RunConfig::default();
        let (_, n, dt) = cfg.ilc_config().unwrap();
        let expected = (cfg.maneuver_profile().duration() / dt).round() as usize;
        assert_eq!(n, expected);
    }

    #[test]
    fn digest_is_stable_across_reserialization() {
        let cfg = RunConfig::default();
        let digest = cfg.digest();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(digest, back.digest());
    }

    #[test]
    fn toml_round_trip_preserves_the_digest() {
        let cfg = RunConfig::default();
        let toml_text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(cfg.digest(), back.digest());
    }
}
