//! Coordinate frames, the two-angle attitude parameterization, and the
//! translational acceleration model shared by the simulator and controllers.
//!
//! Frames follow the NED convention: inertial x/y/z point North/East/Down.
//! Body-X points out the nose, body-Y to the right, body-Z through the belly.
//! The attitude is parameterized by two consecutive rotations applied after
//! the nose-up hover pose: pitch `theta` about body-Y, then `eta` about
//! body-Z. `eta` tilts the thrust axis sideways so the propellers can push
//! the vehicle back onto its lateral path.

use nalgebra::{Matrix3, Vector3};

/// Standard gravity, m/s². Used as the default wherever g is configurable.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Attitude as the two consecutive rotation angles (radians).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttitudeAngles {
    /// Pitch rotation about body-Y, measured from the nose-up hover pose.
    pub theta: f64,
    /// Lateral tilt about body-Z.
    pub eta: f64,
}

impl AttitudeAngles {
    pub fn new(theta: f64, eta: f64) -> Self {
        Self { theta, eta }
    }
}

/// Specific (non-gravitational) acceleration in body axes, m/s².
///
/// This is the quantity an ideal accelerometer reads: motor thrust plus all
/// aerodynamic forces per unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpecificAcceleration {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl SpecificAcceleration {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Self { ax, ay, az }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.ax, self.ay, self.az)
    }
}

/// Inertial position and velocity (NED, Down positive).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InertialKinematics {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// The two orthogonal components of the body-X acceleration used as virtual
/// controls: `a_xp` acts in the vertical plane of the path and moves the
/// altitude, `a_l` is horizontal and perpendicular to the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualControls {
    pub a_xp: f64,
    pub a_l: f64,
}

/// Body-X acceleration magnitude and lateral tilt that realize a virtual
/// control pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposedCommand {
    pub a_xd: f64,
    pub eta_d: f64,
    /// Set when the requested vertical-plane component was not positive and
    /// had to be clamped to keep the tilt parameterization single-valued.
    pub clamped: bool,
}

/// Hover pose: nose up, belly along the flight path.
pub fn hover_rotation() -> Matrix3<f64> {
    Matrix3::new(
        0.0, 0.0, 1.0, //
        0.0, 1.0, 0.0, //
        -1.0, 0.0, 0.0,
    )
}

/// Body-to-inertial rotation for the two-angle parameterization,
/// `R = R_hover * R_y(theta) * R_z(eta)`.
pub fn rotation_matrix(angles: &AttitudeAngles) -> Matrix3<f64> {
    let (st, ct) = angles.theta.sin_cos();
    let (se, ce) = angles.eta.sin_cos();
    let r_y = Matrix3::new(
        ct, 0.0, st, //
        0.0, 1.0, 0.0, //
        -st, 0.0, ct,
    );
    let r_z = Matrix3::new(
        ce, -se, 0.0, //
        se, ce, 0.0, //
        0.0, 0.0, 1.0,
    );
    hover_rotation() * r_y * r_z
}

/// Lateral and vertical inertial accelerations produced by a body-frame
/// specific acceleration at the given attitude.
///
/// These are the y and z rows of `p_ddot = g_vec + R a_body`; the inertial-x
/// row is not used by the position controllers (range is uncontrolled).
pub fn inertial_acceleration(
    a: &SpecificAcceleration,
    angles: &AttitudeAngles,
    g: f64,
) -> (f64, f64) {
    let (st, ct) = angles.theta.sin_cos();
    let (se, ce) = angles.eta.sin_cos();
    let py_ddot = a.ax * se + a.ay * ce;
    let pz_ddot = g - a.ax * ct * ce + a.ay * ct * se - a.az * st;
    (py_ddot, pz_ddot)
}

/// Split a body-X acceleration into its vertical-plane and lateral
/// components for a given lateral tilt.
pub fn decompose_body_x(ax: f64, eta: f64) -> VirtualControls {
    VirtualControls {
        a_xp: ax * eta.cos(),
        a_l: ax * eta.sin(),
    }
}

/// Combine desired vertical-plane and lateral acceleration components into a
/// body-X acceleration magnitude and the lateral tilt that realizes them.
///
/// `a_xpd` must be positive (the propellers pull along +body-X); requests at
/// or below zero are clamped to `min_a_xp` and flagged, which keeps
/// `eta_d = atan(a_ld / a_xpd)` single-valued in (-pi/2, pi/2).
pub fn compose_commands(a_xpd: f64, a_ld: f64, min_a_xp: f64) -> ComposedCommand {
    let clamped = a_xpd <= 0.0;
    let a_xp = if clamped { min_a_xp } else { a_xpd };
    ComposedCommand {
        a_xd: a_xp.hypot(a_ld),
        eta_d: (a_ld / a_xp).atan(),
        clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn hover_pose_is_the_identity_composition() {
        let r = rotation_matrix(&AttitudeAngles::new(0.0, 0.0));
        assert_eq!(r, hover_rotation());
    }

    #[test]
    fn quarter_pitch_flips_x_and_z() {
        let r = rotation_matrix(&AttitudeAngles::new(std::f64::consts::FRAC_PI_2, 0.0));
        let expected = Matrix3::new(
            -1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, 0.0, -1.0,
        );
        assert_abs_diff_eq!(r, expected, epsilon = TOL);
    }

    #[test]
    fn hover_thrust_balances_gravity() {
        let a = SpecificAcceleration::new(STANDARD_GRAVITY, 0.0, 0.0);
        let (py, pz) = inertial_acceleration(&a, &AttitudeAngles::new(0.0, 0.0), STANDARD_GRAVITY);
        assert_abs_diff_eq!(py, 0.0, epsilon = TOL);
        assert_abs_diff_eq!(pz, 0.0, epsilon = TOL);
    }

    #[test]
    fn level_attitude_leaves_only_the_z_axis_term() {
        let a = SpecificAcceleration::new(3.7, 0.0, 2.0);
        let angles = AttitudeAngles::new(std::f64::consts::FRAC_PI_2, 0.0);
        let (py, pz) = inertial_acceleration(&a, &angles, STANDARD_GRAVITY);
        assert_abs_diff_eq!(py, 0.0, epsilon = TOL);
        assert_abs_diff_eq!(pz, STANDARD_GRAVITY - 2.0, epsilon = TOL);
    }

    #[test]
    fn decompose_pure_and_right_angle_cases() {
        let v = decompose_body_x(5.0, 0.0);
        assert_abs_diff_eq!(v.a_xp, 5.0, epsilon = TOL);
        assert_abs_diff_eq!(v.a_l, 0.0, epsilon = TOL);

        let v = decompose_body_x(5.0, std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(v.a_xp, 0.0, epsilon = TOL);
        assert_abs_diff_eq!(v.a_l, 5.0, epsilon = TOL);
    }

    #[test]
    fn decompose_three_four_five_triangle() {
        let eta = (3.0f64).atan2(4.0);
        let v = decompose_body_x(5.0, eta);
        assert_abs_diff_eq!(v.a_xp, 4.0, epsilon = TOL);
        assert_abs_diff_eq!(v.a_l, 3.0, epsilon = TOL);
    }

    #[test]
    fn compose_three_four_five_triangle() {
        let c = compose_commands(4.0, 3.0, 0.1);
        assert_abs_diff_eq!(c.a_xd, 5.0, epsilon = TOL);
        assert_abs_diff_eq!(c.eta_d, 0.6435011087932844, epsilon = 1e-12);
        assert!(!c.clamped);

        let c = compose_commands(4.0, 0.0, 0.1);
        assert_abs_diff_eq!(c.a_xd, 4.0, epsilon = TOL);
        assert_abs_diff_eq!(c.eta_d, 0.0, epsilon = TOL);

        let c = compose_commands(4.0, -3.0, 0.1);
        assert_abs_diff_eq!(c.a_xd, 5.0, epsilon = TOL);
        assert_abs_diff_eq!(c.eta_d, -0.6435011087932844, epsilon = 1e-12);
    }

    #[test]
    fn compose_clamps_non_positive_vertical_component() {
        let c = compose_commands(-2.0, 1.0, 0.1);
        assert!(c.clamped);
        assert_abs_diff_eq!(c.a_xd, (0.1f64).hypot(1.0), epsilon = TOL);
        assert!(c.eta_d.abs() < std::f64::consts::FRAC_PI_2);
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal_with_unit_determinant(
            theta in -1.55f64..1.55,
            eta in -1.55f64..1.55,
        ) {
            let r = rotation_matrix(&AttitudeAngles::new(theta, eta));
            let gram = r.transpose() * r;
            let err = (gram - Matrix3::identity()).abs().max();
            prop_assert!(err <= TOL, "orthonormality error {err}");
            prop_assert!((r.determinant() - 1.0).abs() <= TOL);
        }

        #[test]
        fn scalar_rows_match_the_matrix_form(
            theta in -1.55f64..1.55,
            eta in -1.55f64..1.55,
            ax in -20.0f64..20.0,
            ay in -20.0f64..20.0,
            az in -20.0f64..20.0,
        ) {
            let angles = AttitudeAngles::new(theta, eta);
            let a = SpecificAcceleration::new(ax, ay, az);
            let (py, pz) = inertial_acceleration(&a, &angles, STANDARD_GRAVITY);
            let full = Vector3::new(0.0, 0.0, STANDARD_GRAVITY)
                + rotation_matrix(&angles) * a.as_vector();
            prop_assert!((py - full.y).abs() <= TOL);
            prop_assert!((pz - full.z).abs() <= TOL);
        }

        #[test]
        fn compose_then_decompose_is_identity(
            a_xpd in 1e-3f64..40.0,
            a_ld in -40.0f64..40.0,
        ) {
            let c = compose_commands(a_xpd, a_ld, 0.1);
            prop_assert!(!c.clamped);
            let v = decompose_body_x(c.a_xd, c.eta_d);
            prop_assert!((v.a_xp - a_xpd).abs() <= 1e-12 * a_xpd.max(1.0));
            prop_assert!((v.a_l - a_ld).abs() <= 1e-12 * a_ld.abs().max(1.0));
        }
    }
}
