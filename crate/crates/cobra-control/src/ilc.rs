//! Lifted-domain iterative learning for the altitude loop.
//!
//! One maneuver iteration is stacked into vectors: the learned feedforward
//! input `U = [u(0), ..., u(N-1)]` maps to the sampled altitude error
//! `Y = [y(0), ..., y(N-1)]` through a strictly lower-triangular matrix `F`
//! built from the Euler-discretized closed-loop error model
//!
//! ```text
//! x = [xi_p, xi_v],  x' = A x + B u,  y = xi_p
//! A = [[0, 1], [-kp, -kv]],  B = [0, 1],  C = [1, 0]
//! A_d = I + A dt,  B_d = B dt,  C_d = C
//! ```
//!
//! which is exactly known: it contains the feedback gains and nothing else.
//! Whatever the true plant does differently (inner-loop transients,
//! aerodynamics, wind) lands in the repetitive disturbance `d` of
//! `Y = F U + d`, estimated across iterations by a Kalman filter whose time
//! index is the iteration count. The next input minimizes the predicted
//! error under an elementwise upper bound.

use nalgebra::{DMatrix, DVector, Matrix2, RowVector2, Vector2};

use crate::controllers::AltitudeGains;
use crate::qp;
use crate::sim::TrajectoryLog;
use crate::{Error, Result};

/// Euler discretization of the nominal error model and the lifted map `F`.
#[derive(Debug, Clone)]
pub struct LiftedModel {
    pub a_d: Matrix2<f64>,
    pub b_d: Vector2<f64>,
    pub c_d: RowVector2<f64>,
    /// Lifted sampling interval, s.
    pub dt: f64,
    /// Trajectory length in lifted samples.
    pub n: usize,
    /// N x N strictly lower-triangular input-to-output map.
    pub f: DMatrix<f64>,
}

/// Build the lifted model for the given feedback gains.
///
/// `F[i][j] = C_d A_d^(i-j) B_d` for `i > j` and zero otherwise; the first
/// row is all zeros (an input cannot act on the very first sample).
pub fn build_lifted(gains: &AltitudeGains, dt: f64, n: usize) -> LiftedModel {
    assert!(dt > 0.0, "lifted dt must be positive");
    assert!(n >= 2, "lifted horizon needs at least two samples");
    let a = Matrix2::new(0.0, 1.0, -gains.kp, -gains.kv);
    let a_d = Matrix2::identity() + a * dt;
    let b_d = Vector2::new(0.0, dt);
    let c_d = RowVector2::new(1.0, 0.0);

    // F is Toeplitz: it only depends on the sample distance i - j.
    let mut impulse = vec![0.0; n];
    let mut v = b_d;
    for entry in impulse.iter_mut().skip(1) {
        v = a_d * v;
        *entry = (c_d * v)[0];
    }
    let f = DMatrix::from_fn(n, n, |i, j| if i > j { impulse[i - j] } else { 0.0 });
    LiftedModel { a_d, b_d, c_d, dt, n, f }
}

impl LiftedModel {
    /// Model-predicted output for a lifted input.
    pub fn predict(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.f * u
    }
}

/// Learning configuration. The lifted horizon itself lives in
/// [`LiftedModel`].
#[derive(Debug, Clone)]
pub struct IlcConfig {
    /// Input-energy weight in the update objective.
    pub alpha: f64,
    /// Elementwise upper bound on the lifted input, m/s^2.
    pub c_max: DVector<f64>,
    /// Iteration-domain process noise scale q (covariance inflation).
    pub process_noise: f64,
    /// Measurement noise scale r.
    pub measurement_noise: f64,
    /// Initial covariance scale p0.
    pub initial_covariance: f64,
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
}

impl IlcConfig {
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
        check(self.alpha >= 0.0, "ilc.alpha", "must be non-negative")?;
        check(
            self.measurement_noise > 0.0,
            "ilc.measurement_noise",
            "must be positive",
        )?;
        check(
            self.process_noise >= 0.0,
            "ilc.process_noise",
            "must be non-negative",
        )?;
        check(
            self.initial_covariance >= 0.0,
            "ilc.initial_covariance",
            "must be non-negative",
        )?;
        check(
            self.c_max.iter().all(|c| c.is_finite()),
            "ilc.c_max",
            "must be finite",
        )?;
        Ok(())
    }
}

/// Estimator and input state carried across iterations.
#[derive(Debug, Clone)]
pub struct IlcState {
    /// Disturbance estimate, m.
    pub d_hat: DVector<f64>,
    /// Estimate covariance.
    pub covariance: DMatrix<f64>,
    /// Lifted input applied in the current iteration, m/s^2.
    pub u: DVector<f64>,
    /// Completed learning updates.
    pub iteration: usize,
}

impl IlcState {
    pub fn new(n: usize, initial_covariance: f64) -> Self {
        Self {
            d_hat: DVector::zeros(n),
            covariance: DMatrix::identity(n, n) * initial_covariance,
            u: DVector::zeros(n),
            iteration: 0,
        }
    }
}

/// Sample the measured altitude error at the lifted instants `k dt`
/// (nearest log row) to form the iteration output vector.
pub fn record_iteration(log: &TrajectoryLog, dt: f64, n: usize) -> Result<DVector<f64>> {
    let rows = &log.rows;
    let need = (n - 1) as f64 * dt;
    let have = rows.last().map_or(0.0, |r| r.t);
    if rows.is_empty() || have + 1e-9 < need {
        return Err(Error::IncompleteIteration {
            have_s: have,
            need_s: need,
        });
    }
    let mut y = DVector::zeros(n);
    let mut idx = 0;
    for k in 0..n {
        let target = k as f64 * dt;
        while idx + 1 < rows.len()
            && (rows[idx + 1].t - target).abs() <= (rows[idx].t - target).abs()
        {
            idx += 1;
        }
        y[k] = rows[idx].xi_p;
    }
    Ok(y)
}

/// One iteration-domain Kalman update of the disturbance estimate from the
/// measured output `y` and the input `state.u` flown in that iteration.
pub fn kalman_update(
    state: &IlcState,
    y: &DVector<f64>,
    model: &LiftedModel,
    cfg: &IlcConfig,
) -> Result<IlcState> {
    let n = model.n;
    for (len, what) in [
        (y.len(), "output"),
        (state.d_hat.len(), "estimate"),
        (state.u.len(), "input"),
    ] {
        if len != n {
            let _ = what;
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let innovation = y - model.predict(&state.u) - &state.d_hat;
    let p_minus = &state.covariance + DMatrix::identity(n, n) * cfg.process_noise;
    let s = &p_minus + DMatrix::identity(n, n) * cfg.measurement_noise;
    let s_inv = s
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnovation)?
        .inverse();
    let gain = &p_minus * s_inv;
    let d_hat = &state.d_hat + &gain * innovation;
    let p_new = (DMatrix::identity(n, n) - &gain) * &p_minus;
    // Re-symmetrize against rounding drift.
    let covariance = (&p_new + p_new.transpose()) * 0.5;
    Ok(IlcState {
        d_hat,
        covariance,
        u: state.u.clone(),
        iteration: state.iteration + 1,
    })
}

/// Input for the next iteration: minimize the model-predicted error plus the
/// input penalty subject to the upper bound (the desired output is zero for
/// a constant-altitude maneuver).
pub fn update_input(
    model: &LiftedModel,
    d_hat: &DVector<f64>,
    cfg: &IlcConfig,
) -> Result<DVector<f64>> {
    qp::solve_upper_bounded_ls(
        &model.f,
        d_hat,
        cfg.alpha,
        &cfg.c_max,
        cfg.kkt_tolerance,
        cfg.max_iterations,
    )
    .map(|s| s.u)
}

/// A lifted input as a zero-order-hold signal: constant between lifted
/// samples, zero outside the maneuver window.
#[derive(Debug, Clone)]
pub struct LiftedInput {
    values: Vec<f64>,
    dt: f64,
}

impl LiftedInput {
    pub fn new(u: &DVector<f64>, dt: f64) -> Self {
        Self {
            values: u.iter().copied().collect(),
            dt,
        }
    }

    pub fn zeros(n: usize, dt: f64) -> Self {
        Self {
            values: vec![0.0; n],
            dt,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let k = (t / self.dt).floor() as usize;
        self.values.get(k).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LogRow;
    use approx::assert_abs_diff_eq;

    fn gains() -> AltitudeGains {
        AltitudeGains::new(0.356, 1.49).unwrap()
    }

    fn test_config(n: usize) -> IlcConfig {
        IlcConfig {
            alpha: 1e-4,
            c_max: DVector::from_element(n, 1e9),
            process_noise: 1e-4,
            measurement_noise: 1e-2,
            initial_covariance: 1.0,
            kkt_tolerance: 1e-10,
            max_iterations: 200_000,
        }
    }

    /// Stepwise propagation of the one-step recursion with the input injected
    /// before the propagation, independent of the Toeplitz construction.
    fn stepped_outputs(model: &LiftedModel, u: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(model.n);
        let mut x = Vector2::zeros();
        for k in 1..model.n {
            x = model.a_d * (x + model.b_d * u[k - 1]);
            y[k] = (model.c_d * x)[0];
        }
        y
    }

    fn log_from_samples(samples: &[(f64, f64)]) -> TrajectoryLog {
        TrajectoryLog {
            rows: samples
                .iter()
                .map(|&(t, xi_p)| LogRow {
                    t,
                    xi_p,
                    ..LogRow::default()
                })
                .collect(),
            guard_events: 0,
            clamp_events: 0,
        }
    }

    #[test]
    fn lifted_map_is_strictly_lower_triangular() {
        let m = build_lifted(&gains(), 0.1, 6);
        for i in 0..6 {
            for j in i..6 {
                assert_eq!(m.f[(i, j)], 0.0, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn hand_multiplied_entries_for_a_three_sample_model() {
        // A_d B_d = [dt^2, dt (1 - kv dt)]; C picks the first component, so
        // the subdiagonal is dt^2 and the next band is dt^2 (2 - kv dt).
        let dt = 0.1;
        let m = build_lifted(&gains(), dt, 3);
        assert_abs_diff_eq!(m.f[(1, 0)], dt * dt, epsilon = 1e-15);
        assert_abs_diff_eq!(m.f[(2, 1)], dt * dt, epsilon = 1e-15);
        assert_abs_diff_eq!(
            m.f[(2, 0)],
            dt * dt * (2.0 - 1.49 * dt),
            epsilon = 1e-15
        );
    }

    #[test]
    fn lifted_map_matches_the_stepping_oracle() {
        for (n, seed) in [(5usize, 1u64), (20, 2), (50, 3)] {
            let m = build_lifted(&gains(), 0.1, n);
            let u = DVector::from_fn(n, |i, _| ((i as u64 + seed) as f64 * 0.37).sin());
            let err = (m.predict(&u) - stepped_outputs(&m, &u)).amax();
            assert!(err <= 1e-12, "n {n}: max error {err}");
        }
    }

    #[test]
    fn record_iteration_of_a_perfect_flight_is_zero() {
        let rows: Vec<(f64, f64)> = (0..300).map(|i| (i as f64 * 0.004, 0.0)).collect();
        let y = record_iteration(&log_from_samples(&rows), 0.1, 10).unwrap();
        assert_eq!(y.amax(), 0.0);
    }

    #[test]
    fn record_iteration_of_a_constant_error() {
        let rows: Vec<(f64, f64)> = (0..300).map(|i| (i as f64 * 0.004, 0.5)).collect();
        let y = record_iteration(&log_from_samples(&rows), 0.1, 10).unwrap();
        assert!(y.iter().all(|v| (*v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn record_iteration_resamples_a_ramp_at_the_lifted_instants() {
        let rows: Vec<(f64, f64)> = (0..3000)
            .map(|i| {
                let t = i as f64 * 0.004;
                (t, 0.2 * t)
            })
            .collect();
        let y = record_iteration(&log_from_samples(&rows), 0.1, 20).unwrap();
        for k in 0..20 {
            // Lifted instants sit on the 4 ms grid, so resampling is exact.
            assert_abs_diff_eq!(y[k], 0.2 * (k as f64 * 0.1), epsilon = 1e-12);
        }
    }

    #[test]
    fn record_iteration_rejects_short_logs() {
        let rows: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 * 0.004, 0.0)).collect();
        let err = record_iteration(&log_from_samples(&rows), 0.1, 20);
        assert!(matches!(err, Err(Error::IncompleteIteration { .. })));
    }

    #[test]
    fn full_trust_limit_recovers_the_residual() {
        let n = 12;
        let m = build_lifted(&gains(), 0.1, n);
        let mut cfg = test_config(n);
        cfg.measurement_noise = 1e-12;
        cfg.process_noise = 0.0;
        let mut state = IlcState::new(n, 1.0);
        state.u = DVector::from_fn(n, |i, _| (i as f64 * 0.3).cos());
        let y = DVector::from_fn(n, |i, _| 0.1 * i as f64);
        let next = kalman_update(&state, &y, &m, &cfg).unwrap();
        let residual = &y - m.predict(&state.u);
        assert!((next.d_hat - residual).amax() <= 1e-6);
    }

    #[test]
    fn covariance_follows_the_scalar_recursion_and_estimates_converge() {
        let n = 8;
        let m = build_lifted(&gains(), 0.1, n);
        let mut cfg = test_config(n);
        cfg.process_noise = 0.0;
        let d_true = DVector::from_fn(n, |i, _| 0.4 * (i as f64 * 0.9).sin());
        let mut state = IlcState::new(n, 1.0);
        let mut p_scalar = 1.0;
        let mut prev_err = f64::INFINITY;
        for _ in 0..6 {
            let y = m.predict(&state.u) + &d_true;
            state = kalman_update(&state, &y, &m, &cfg).unwrap();
            let r = cfg.measurement_noise;
            p_scalar = p_scalar * r / (p_scalar + r);
            let p_err = (&state.covariance
                - DMatrix::identity(n, n) * p_scalar)
                .amax();
            assert!(p_err <= 1e-12, "covariance drift {p_err}");
            let err = (&state.d_hat - &d_true).amax();
            assert!(err < prev_err, "estimate error must shrink: {err} vs {prev_err}");
            prev_err = err;
        }
        assert!(prev_err <= 1e-2);
    }

    #[test]
    fn zero_gain_keeps_the_estimate_frozen() {
        let n = 5;
        let m = build_lifted(&gains(), 0.1, n);
        let mut cfg = test_config(n);
        cfg.process_noise = 0.0;
        let mut state = IlcState::new(n, 0.0);
        state.d_hat = DVector::from_element(n, 0.7);
        let y = DVector::from_element(n, -3.0);
        let next = kalman_update(&state, &y, &m, &cfg).unwrap();
        assert!((next.d_hat - state.d_hat).amax() <= 1e-15);
    }

    #[test]
    fn covariance_stays_symmetric_psd_with_shrinking_trace() {
        let n = 10;
        let m = build_lifted(&gains(), 0.1, n);
        let mut cfg = test_config(n);
        cfg.process_noise = 0.0;
        let mut state = IlcState::new(n, 2.0);
        let mut prev_trace = state.covariance.trace();
        for k in 0..8 {
            let y = DVector::from_fn(n, |i, _| ((i + k) as f64 * 1.3).sin());
            state = kalman_update(&state, &y, &m, &cfg).unwrap();
            let sym_err = (&state.covariance - state.covariance.transpose()).amax();
            assert!(sym_err <= 1e-14);
            assert!(state.covariance.clone().cholesky().is_some() || state.covariance.amax() < 1e-12);
            let trace = state.covariance.trace();
            assert!(trace <= prev_trace + 1e-12);
            prev_trace = trace;
        }
    }

    #[test]
    fn zero_disturbance_estimate_requests_zero_input() {
        let n = 10;
        let m = build_lifted(&gains(), 0.1, n);
        let u = update_input(&m, &DVector::zeros(n), &test_config(n)).unwrap();
        assert!(u.amax() <= 1e-9);
    }

    #[test]
    fn unconstrained_update_matches_the_normal_equations() {
        // A sizeable ridge keeps the comparison well conditioned, so the
        // solver's KKT tolerance translates into solution accuracy.
        let n = 12;
        let m = build_lifted(&gains(), 0.25, n);
        let mut cfg = test_config(n);
        cfg.alpha = 0.05;
        let d_hat = DVector::from_fn(n, |i, _| 0.2 * (i as f64).cos());
        let u = update_input(&m, &d_hat, &cfg).unwrap();
        let gram = m.f.transpose() * &m.f + DMatrix::identity(n, n) * cfg.alpha;
        let closed = gram
            .cholesky()
            .unwrap()
            .solve(&(-(m.f.transpose() * &d_hat)));
        assert!((u - closed).amax() <= 1e-8);
    }

    #[test]
    fn unconstrained_inversion_cancels_the_reachable_error() {
        // The first sample is structurally untouchable; everything else must
        // be driven to (near) zero when alpha is tiny and bounds are loose.
        let n = 15;
        let m = build_lifted(&gains(), 0.1, n);
        let mut cfg = test_config(n);
        cfg.alpha = 0.0;
        let d_hat = DVector::from_fn(n, |i, _| 0.3 * (i as f64 * 0.5).sin());
        let u = update_input(&m, &d_hat, &cfg).unwrap();
        let residual = m.predict(&u) + &d_hat;
        for k in 1..n {
            assert!(residual[k].abs() <= 1e-6, "sample {k}: {}", residual[k]);
        }
    }

    #[test]
    fn model_predicted_error_never_worsens_across_updates() {
        let n = 12;
        let m = build_lifted(&gains(), 0.1, n);
        let mut cfg = test_config(n);
        cfg.alpha = 0.0;
        cfg.c_max = DVector::from_element(n, 0.05); // deliberately binding
        let d_hat = DVector::from_fn(n, |i, _| -0.2 * ((i as f64 * 0.4).cos() + 1.2));
        let u_prev = DVector::zeros(n);
        let u_next = update_input(&m, &d_hat, &cfg).unwrap();
        let before = (m.predict(&u_prev) + &d_hat).norm();
        let after = (m.predict(&u_next) + &d_hat).norm();
        assert!(after <= before + 1e-12);
        assert!(u_next.iter().all(|v| *v <= 0.05 + 1e-12));
    }

    #[test]
    fn lifted_input_is_zero_order_held() {
        let u = DVector::from_column_slice(&[1.0, -2.0, 3.0]);
        let z = LiftedInput::new(&u, 0.1);
        assert_eq!(z.at(-0.01), 0.0);
        assert_eq!(z.at(0.0), 1.0);
        assert_eq!(z.at(0.0999), 1.0);
        assert_eq!(z.at(0.1), -2.0);
        assert_eq!(z.at(0.25), 3.0);
        assert_eq!(z.at(0.31), 0.0);
    }
}
