//! Frequency-domain loop analysis: rational transfer functions with optional
//! pure delay, Bode tables, gain-crossover/phase/delay/gain margins, and the
//! inverse problem of deriving altitude gains from bandwidth and
//! phase-margin targets.
//!
//! The nominal altitude loop is `H_n(s) = (kp + kv s) / s^2`. Its design
//! targets, a 0.24 Hz gain crossover with an 81 degree phase margin, pin the
//! gains used everywhere else in the toolkit.

use num_complex::Complex64;
use serde::Serialize;

use crate::controllers::AltitudeGains;
use crate::{Error, Result};

/// Design gain-crossover frequency of the altitude loop, Hz.
pub const DESIGN_BANDWIDTH_HZ: f64 = 0.24;
/// Design phase margin of the altitude loop, degrees.
pub const DESIGN_PHASE_MARGIN_DEG: f64 = 81.0;
/// Bandwidth of the modeled inner acceleration loop, Hz.
pub const INNER_LOOP_BANDWIDTH_HZ: f64 = 7.2;
/// Budget for the inner-loop phase lag at the outer-loop crossover, degrees.
pub const INNER_LOOP_MAX_LAG_DEG: f64 = 3.0;

/// Crossover search band, rad/s.
const BAND_LO: f64 = 1e-3;
const BAND_HI: f64 = 1e3;
const GRID_PER_DECADE: usize = 100;
/// Relative bisection tolerance on frequency.
const BISECT_REL_TOL: f64 = 1e-9;

/// Rational polynomial in the Laplace variable (ascending coefficients) with
/// an optional pure output delay.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    delay_s: f64,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransferFunction(
                "coefficients must be finite".into(),
            ));
        }
        if den.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidTransferFunction(
                "denominator is identically zero".into(),
            ));
        }
        Ok(Self {
            num,
            den,
            delay_s: 0.0,
        })
    }

    /// Add a pure delay `e^(-s tau)` to the response.
    pub fn with_delay(mut self, delay_s: f64) -> Self {
        self.delay_s += delay_s;
        self
    }

    /// Nominal altitude loop `(kp + kv s) / s^2`.
    pub fn nominal_altitude_loop(gains: &AltitudeGains) -> Self {
        Self {
            num: vec![gains.kp, gains.kv],
            den: vec![0.0, 0.0, 1.0],
            delay_s: 0.0,
        }
    }

    /// Unity-DC-gain second-order Butterworth low-pass; this is the
    /// continuous model of the simulated inner acceleration loop.
    pub fn butterworth2(bandwidth_hz: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * bandwidth_hz;
        Self {
            num: vec![w0 * w0],
            den: vec![w0 * w0, std::f64::consts::SQRT_2 * w0, 1.0],
            delay_s: 0.0,
        }
    }

    /// First-order low-pass with the given corner frequency.
    pub fn first_order(bandwidth_hz: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * bandwidth_hz;
        Self {
            num: vec![1.0],
            den: vec![1.0, 1.0 / w0],
            delay_s: 0.0,
        }
    }

    /// Pure integrator `1/s`.
    pub fn integrator() -> Self {
        Self {
            num: vec![1.0],
            den: vec![0.0, 1.0],
            delay_s: 0.0,
        }
    }

    /// Unity pass-through.
    pub fn unity() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0],
            delay_s: 0.0,
        }
    }

    fn poly_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    /// Frequency response at `omega` rad/s.
    pub fn response(&self, omega: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, omega);
        let den = Self::poly_eval(&self.den, s);
        if den.norm() < 1e-300 {
            return Err(Error::PoleOnAxis { omega });
        }
        let mut h = Self::poly_eval(&self.num, s) / den;
        if self.delay_s != 0.0 {
            h *= Complex64::from_polar(1.0, -omega * self.delay_s);
        }
        Ok(h)
    }
}

/// Stability margins of an open loop. Absent fields mean the corresponding
/// crossing does not exist in the searched band (unbounded margin).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    pub gain_crossover_hz: Option<f64>,
    pub phase_margin_deg: Option<f64>,
    pub delay_margin_s: Option<f64>,
    pub gain_margin_db: Option<f64>,
}

fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(360.0);
    if a > 180.0 {
        a -= 360.0;
    }
    a
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

fn bisect(mut lo: f64, mut hi: f64, mut f_lo: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    while (hi - lo) / lo > BISECT_REL_TOL {
        let mid = (lo * hi).sqrt();
        let f_mid = f(mid)?;
        if (f_mid >= 0.0) == (f_lo >= 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Gain-crossover, phase, delay, and gain margins of `tf`, searched over
/// [1e-3, 1e3] rad/s with log-spaced bracketing and bisection.
pub fn margins(tf: &TransferFunction) -> Result<MarginReport> {
    let grid = log_grid(BAND_LO, BAND_HI, GRID_PER_DECADE);
    let mut mags = Vec::with_capacity(grid.len());
    let mut resps = Vec::with_capacity(grid.len());
    for &w in &grid {
        let h = tf.response(w)?;
        mags.push(h.norm() - 1.0);
        resps.push(h);
    }

    // Gain crossover: the highest-frequency downward crossing of |H| = 1
    // (falling through unity is the loop's bandwidth edge); if none falls,
    // take the highest crossing of any direction.
    let mut crossover: Option<(f64, bool)> = None;
    for i in 1..grid.len() {
        if mags[i - 1] == 0.0 && mags[i] == 0.0 {
            continue;
        }
        if (mags[i - 1] >= 0.0) != (mags[i] >= 0.0) {
            let w = bisect(grid[i - 1], grid[i], mags[i - 1], |w| {
                Ok(tf.response(w)?.norm() - 1.0)
            })?;
            let falling = mags[i - 1] >= 0.0;
            match crossover {
                Some((_, true)) if !falling => {}
                _ => crossover = Some((w, falling)),
            }
        }
    }

    // Gain margin: worst -180 degree phase crossing (H real and negative).
    let mut gain_margin_db: Option<f64> = None;
    for i in 1..grid.len() {
        let (a, b) = (resps[i - 1], resps[i]);
        if a.re < 0.0 && b.re < 0.0 && (a.im >= 0.0) != (b.im >= 0.0) {
            let w = bisect(grid[i - 1], grid[i], a.im, |w| Ok(tf.response(w)?.im))?;
            let h = tf.response(w)?;
            if h.re < 0.0 {
                let gm = -20.0 * h.norm().log10();
                gain_margin_db = Some(gain_margin_db.map_or(gm, |g: f64| g.min(gm)));
            }
        }
    }

    let Some((w_c, _)) = crossover else {
        return Ok(MarginReport {
            gain_crossover_hz: None,
            phase_margin_deg: None,
            delay_margin_s: None,
            gain_margin_db,
        });
    };

    let h_c = tf.response(w_c)?;
    let pm_deg = wrap_deg(180.0 + h_c.arg().to_degrees());
    Ok(MarginReport {
        gain_crossover_hz: Some(w_c / (2.0 * std::f64::consts::PI)),
        phase_margin_deg: Some(pm_deg),
        delay_margin_s: Some(pm_deg.to_radians() / w_c),
        gain_margin_db,
    })
}

/// Altitude gains that put the gain crossover of `(kp + kv s)/s^2` at the
/// target bandwidth with the target phase margin.
///
/// At the crossover `w_c`, unit magnitude and the phase condition reduce to
/// `kp = w_c^2 cos(pm)` and `kv = w_c sin(pm)`.
pub fn derive_gains(bandwidth_hz: f64, phase_margin_deg: f64) -> Result<AltitudeGains> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidConfig {
            key: "gains.bandwidth_hz".into(),
            reason: format!("must be positive, got {bandwidth_hz}"),
        });
    }
    if !(phase_margin_deg > 0.0 && phase_margin_deg < 90.0) {
        return Err(Error::InvalidConfig {
            key: "gains.phase_margin_deg".into(),
            reason: format!("must lie in (0, 90), got {phase_margin_deg}"),
        });
    }
    let w_c = 2.0 * std::f64::consts::PI * bandwidth_hz;
    let pm = phase_margin_deg.to_radians();
    AltitudeGains::new(w_c * w_c * pm.cos(), w_c * pm.sin())
}

/// Closed-loop characterization of the modeled inner acceleration loop.
#[derive(Debug, Clone, Serialize)]
pub struct InnerLoopReport {
    /// -3 dB bandwidth, Hz; absent if the magnitude never drops below -3 dB
    /// in the searched band.
    pub bandwidth_hz: Option<f64>,
    /// Phase lag at the outer-loop design crossover, degrees (positive lag).
    pub phase_lag_deg_at_outer_crossover: f64,
    /// Lag stays within [`INNER_LOOP_MAX_LAG_DEG`].
    pub within_lag_budget: bool,
    pub margins: MarginReport,
}

/// Bandwidth and outer-crossover phase lag of an inner-loop model `g`.
pub fn inner_loop_report(g: &TransferFunction) -> Result<InnerLoopReport> {
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let grid = log_grid(BAND_LO, BAND_HI, GRID_PER_DECADE);
    let mut bandwidth_hz = None;
    let mut prev = g.response(grid[0])?.norm() - target;
    for i in 1..grid.len() {
        let cur = g.response(grid[i])?.norm() - target;
        if prev >= 0.0 && cur < 0.0 {
            let w = bisect(grid[i - 1], grid[i], prev, |w| {
                Ok(g.response(w)?.norm() - target)
            })?;
            bandwidth_hz = Some(w / (2.0 * std::f64::consts::PI));
            break;
        }
        prev = cur;
    }
    let w_outer = 2.0 * std::f64::consts::PI * DESIGN_BANDWIDTH_HZ;
    let lag = -g.response(w_outer)?.arg().to_degrees();
    Ok(InnerLoopReport {
        bandwidth_hz,
        phase_lag_deg_at_outer_crossover: lag,
        within_lag_budget: lag <= INNER_LOOP_MAX_LAG_DEG,
        margins: margins(g)?,
    })
}

/// One row of a Bode table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BodePoint {
    pub freq_hz: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

/// Log-spaced Bode table with phase unwrapped by continuity.
pub fn bode_table(
    tf: &TransferFunction,
    f_lo_hz: f64,
    f_hi_hz: f64,
    points_per_decade: usize,
) -> Result<Vec<BodePoint>> {
    let grid = log_grid(
        2.0 * std::f64::consts::PI * f_lo_hz,
        2.0 * std::f64::consts::PI * f_hi_hz,
        points_per_decade,
    );
    let mut rows = Vec::with_capacity(grid.len());
    let mut prev_phase: Option<f64> = None;
    for &w in &grid {
        let h = tf.response(w)?;
        let mut phase = h.arg().to_degrees();
        if let Some(p) = prev_phase {
            while phase - p > 180.0 {
                phase -= 360.0;
            }
            while phase - p < -180.0 {
                phase += 360.0;
            }
        }
        prev_phase = Some(phase);
        rows.push(BodePoint {
            freq_hz: w / (2.0 * std::f64::consts::PI),
            mag_db: 20.0 * h.norm().log10(),
            phase_deg: phase,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn design_gains() -> AltitudeGains {
        derive_gains(DESIGN_BANDWIDTH_HZ, DESIGN_PHASE_MARGIN_DEG).unwrap()
    }

    #[test]
    fn integrator_response_at_one_radian_per_second() {
        let h = TransferFunction::integrator().response(1.0).unwrap();
        assert_abs_diff_eq!(h.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn integrator_margins_are_analytic() {
        let r = margins(&TransferFunction::integrator()).unwrap();
        let f_c = r.gain_crossover_hz.unwrap();
        assert_abs_diff_eq!(f_c * 2.0 * std::f64::consts::PI, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.phase_margin_deg.unwrap(), 90.0, epsilon = 1e-7);
        assert_abs_diff_eq!(
            r.delay_margin_s.unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-7
        );
        assert_eq!(r.gain_margin_db, None);
    }

    #[test]
    fn nominal_loop_rolls_off_toward_minus_ninety_degrees() {
        let h = TransferFunction::nominal_altitude_loop(&design_gains());
        let r = h.response(1e6).unwrap();
        assert!(r.norm() < 1e-5);
        assert_abs_diff_eq!(r.arg().to_degrees(), -90.0, epsilon = 0.1);
    }

    #[test]
    fn derived_gains_sit_on_the_unit_circle_at_the_crossover() {
        let h = TransferFunction::nominal_altitude_loop(&design_gains());
        let w_c = 2.0 * std::f64::consts::PI * DESIGN_BANDWIDTH_HZ;
        assert_abs_diff_eq!(h.response(w_c).unwrap().norm(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn derived_gains_match_the_closed_form() {
        let g = design_gains();
        assert_abs_diff_eq!(g.kp, 0.3557252, epsilon = 1e-4);
        assert_abs_diff_eq!(g.kv, 1.4893985, epsilon = 1e-4);
    }

    #[test]
    fn design_margins_are_reproduced() {
        let r = margins(&TransferFunction::nominal_altitude_loop(&design_gains())).unwrap();
        assert_abs_diff_eq!(r.gain_crossover_hz.unwrap(), 0.24, epsilon = 0.01);
        assert_abs_diff_eq!(r.phase_margin_deg.unwrap(), 81.0, epsilon = 0.5);
        let dm = r.delay_margin_s.unwrap();
        assert!((0.85..=0.95).contains(&dm), "delay margin {dm}");
    }

    #[test]
    fn pure_derivative_limit_sends_kp_to_zero() {
        let g = derive_gains(0.24, 89.999).unwrap();
        assert!(g.kp < 1e-4 * g.kv);
    }

    #[test]
    fn derive_then_measure_round_trips_over_the_grid() {
        for bw in [0.05, 0.1, 0.24, 0.5, 1.0, 2.0] {
            let mut pm = 30.0;
            while pm <= 85.0 {
                let gains = derive_gains(bw, pm).unwrap();
                let r =
                    margins(&TransferFunction::nominal_altitude_loop(&gains)).unwrap();
                let f_c = r.gain_crossover_hz.unwrap();
                assert!(
                    ((f_c - bw) / bw).abs() <= 1e-6,
                    "bw {bw} pm {pm}: crossover {f_c}"
                );
                assert_abs_diff_eq!(r.phase_margin_deg.unwrap(), pm, epsilon = 1e-6);
                pm += 5.0;
            }
        }
    }

    #[test]
    fn delay_shifts_phase_margin_without_moving_the_crossover() {
        let h = TransferFunction::nominal_altitude_loop(&design_gains());
        let base = margins(&h).unwrap();
        let tau = 0.3;
        let delayed = margins(&h.clone().with_delay(tau)).unwrap();
        let w_c = base.gain_crossover_hz.unwrap() * 2.0 * std::f64::consts::PI;
        assert_abs_diff_eq!(
            delayed.gain_crossover_hz.unwrap(),
            base.gain_crossover_hz.unwrap(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            delayed.phase_margin_deg.unwrap(),
            base.phase_margin_deg.unwrap() - (w_c * tau).to_degrees(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn adding_the_delay_margin_lands_on_the_stability_boundary() {
        let h = TransferFunction::nominal_altitude_loop(&design_gains());
        let base = margins(&h).unwrap();
        let delayed = margins(&h.clone().with_delay(base.delay_margin_s.unwrap())).unwrap();
        assert_abs_diff_eq!(delayed.phase_margin_deg.unwrap(), 0.0, epsilon = 0.1);
    }

    #[test]
    fn nominal_magnitude_slopes_break_at_the_zero() {
        let h = TransferFunction::nominal_altitude_loop(&design_gains());
        let mag_db = |w: f64| 20.0 * h.response(w).unwrap().norm().log10();
        let low_slope = mag_db(1e-2) - mag_db(1e-3);
        let high_slope = mag_db(1e3) - mag_db(1e2);
        assert_abs_diff_eq!(low_slope, -40.0, epsilon = 0.5);
        assert_abs_diff_eq!(high_slope, -20.0, epsilon = 0.5);
    }

    #[test]
    fn butterworth_bandwidth_and_outer_lag() {
        let g = TransferFunction::butterworth2(INNER_LOOP_BANDWIDTH_HZ);
        let r = inner_loop_report(&g).unwrap();
        assert_abs_diff_eq!(r.bandwidth_hz.unwrap(), 7.2, epsilon = 0.1);
        let lag = r.phase_lag_deg_at_outer_crossover;
        assert!((2.6..=2.8).contains(&lag), "lag {lag}");
        assert!(r.within_lag_budget);
    }

    #[test]
    fn unity_inner_loop_has_zero_lag() {
        let r = inner_loop_report(&TransferFunction::unity()).unwrap();
        assert_eq!(r.phase_lag_deg_at_outer_crossover, 0.0);
        assert_eq!(r.bandwidth_hz, None);
        assert_eq!(r.margins.gain_crossover_hz, None);
    }

    #[test]
    fn first_order_inner_loop_lag_is_analytic() {
        let g = TransferFunction::first_order(7.2);
        let r = inner_loop_report(&g).unwrap();
        let expected = (0.24f64 / 7.2).atan().to_degrees();
        assert_abs_diff_eq!(
            r.phase_lag_deg_at_outer_crossover,
            expected,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(r.phase_lag_deg_at_outer_crossover, 1.9, epsilon = 0.02);
    }

    #[test]
    fn pole_on_the_axis_is_reported() {
        let h = TransferFunction::new(vec![1.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(h.response(1.0), Err(Error::PoleOnAxis { .. })));
    }

    #[test]
    fn zero_denominator_is_rejected() {
        assert!(TransferFunction::new(vec![1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn bode_table_is_monotone_in_frequency_and_unwrapped() {
        let h = TransferFunction::nominal_altitude_loop(&design_gains()).with_delay(0.9);
        let rows = bode_table(&h, 1e-3, 1e2, 50).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].freq_hz > pair[0].freq_hz);
            assert!((pair[1].phase_deg - pair[0].phase_deg).abs() < 180.0);
        }
    }
}
