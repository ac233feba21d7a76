//! Temporary exploration harness (deleted before release).

use cobra_control::campaign::run_campaign;
use cobra_control::config::RunConfig;
use cobra_control::ilc::{build_lifted, kalman_update, record_iteration, update_input, IlcState, LiftedInput};
use cobra_control::plant::{AccelLoopModel, AeroConfig, Harmonic, NoiseConfig};
use cobra_control::sim::run_flight;

fn nominal_cfg() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.plant.attitude_tau_s = 0.0;
    cfg.plant.accel_loop = AccelLoopModel::Ideal;
    cfg.plant.aero = AeroConfig {
        cd0: 0.0,
        flat_plate_scale: 0.0,
        lateral_damping: 0.3,
    };
    cfg.plant.noise = NoiseConfig {
        altitude_std_m: 0.0,
        accel_std: 0.0,
    };
    cfg.disturbance.bias = 0.0;
    cfg.disturbance.harmonics.clear();
    cfg.disturbance.stochastic_std = 0.0;
    cfg
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "analytic" => analytic(),
        "cobra" => cobra(),
        "oneshot" => oneshot(),
        "campaign" => campaign(),
        "crosswind" => crosswind(),
        _ => println!("usage: scratch [analytic|cobra|oneshot|campaign|crosswind]"),
    }
}

/// Nominal closed loop vs the analytic second-order error solution.
fn analytic() {
    let mut cfg = nominal_cfg();
    cfg.profile.theta_level_deg = 60.0;
    cfg.profile.head_up_deg = 55.0; // still validated, but hold segments flat:
    cfg.profile.pre_hold_s = 20.0;
    cfg.profile.ramp_s = 0.0;
    cfg.profile.hold_s = 0.0;
    cfg.profile.post_hold_s = 0.0;
    cfg.profile.initial_speed_mps = 0.0;
    cfg.profile.initial_down_offset_m = 1.0; // xi_p(0) = -1... check sign
    let gains = cfg.altitude_gains().unwrap();
    let log = run_flight(&cfg, None, 0).unwrap();
    // xi'' + kv xi' + kp xi = 0, xi(0) = xi0, xi'(0) = 0; overdamped roots.
    let disc = (gains.kv * gains.kv - 4.0 * gains.kp).sqrt();
    let l1 = (-gains.kv + disc) / 2.0;
    let l2 = (-gains.kv - disc) / 2.0;
    let xi0 = log.rows[0].xi_p;
    let (mut err2, mut ref2) = (0.0, 0.0);
    for r in &log.rows {
        let analytic = xi0 * (l2 * (l1 * r.t).exp() - l1 * (l2 * r.t).exp()) / (l2 - l1);
        err2 += (r.xi_p - analytic).powi(2);
        ref2 += analytic * analytic;
    }
    println!(
        "xi0 {:.4}  rel rms error {:.3e}",
        xi0,
        (err2 / ref2).sqrt()
    );
}

/// Full default Cobra, learning off: error scale, thrust scale, events.
fn cobra() {
    for head in [80.0, 70.0, 50.0] {
        let mut cfg = RunConfig::default();
        cfg.profile.head_up_deg = head;
        let log = run_flight(&cfg, None, 0).unwrap();
        let vx_end = log.rows.last().unwrap().vx;
        println!(
            "head {head:2}: rms {:.3} m  max|xi_p| {:.3} m  max|xi_l| {:.3} m  max a_xd {:.1}  vx_end {:.1}  guard {} clamp {}",
            log.rms_xi_p(),
            log.max_abs_xi_p(),
            log.max_abs_xi_l(),
            log.max_a_xd(),
            vx_end,
            log.guard_events,
            log.clamp_events
        );
    }
}

/// One-shot inversion on the exact nominal plant.
fn oneshot() {
    for (lift_dt, amp) in [(0.1, 0.3), (0.05, 0.3), (0.05, 0.1), (0.02, 0.3), (0.02, 0.1)] {
        let mut cfg = nominal_cfg();
        cfg.profile.theta_level_deg = 60.0;
        cfg.profile.head_up_deg = 55.0;
        cfg.profile.pre_hold_s = 1.0;
        cfg.profile.ramp_s = 1.5;
        cfg.profile.hold_s = 2.0;
        cfg.profile.post_hold_s = 2.0;
        cfg.profile.initial_speed_mps = 0.0;
        cfg.disturbance.bias = 0.3 * amp;
        cfg.disturbance.harmonics = vec![
            Harmonic { amplitude: amp, frequency_hz: 0.11, phase_rad: 0.3 },
            Harmonic { amplitude: 0.5 * amp, frequency_hz: 0.31, phase_rad: 1.9 },
        ];
        cfg.ilc.dt = lift_dt;
        cfg.ilc.alpha = 0.0;
        cfg.ilc.c_max = 1e9;
        cfg.ilc.measurement_noise = 1e-12;
        cfg.ilc.process_noise = 0.0;
        cfg.ilc.kkt_tolerance = 1e-10;
        cfg.ilc.max_iterations = 400_000;

        let gains = cfg.altitude_gains().unwrap();
        let (ilc_cfg, n, dt) = cfg.ilc_config().unwrap();
        let model = build_lifted(&gains, dt, n);
        let mut state = IlcState::new(n, ilc_cfg.initial_covariance);

        let log0 = run_flight(&cfg, None, 0).unwrap();
        let y0 = record_iteration(&log0, dt, n).unwrap();
        state = kalman_update(&state, &y0, &model, &ilc_cfg).unwrap();
        state.u = update_input(&model, &state.d_hat, &ilc_cfg).unwrap();
        let lifted = LiftedInput::new(&state.u, dt);
        let log1 = run_flight(&cfg, Some(&lifted), 1).unwrap();
        let y1 = record_iteration(&log1, dt, n).unwrap();
        let rms0 = (y0.norm_squared() / n as f64).sqrt();
        let rms1 = (y1.norm_squared() / n as f64).sqrt();
        println!(
            "dt {lift_dt:5}  amp {amp:4}  n {n:4}  rms0 {rms0:.4e}  rms1 {rms1:.4e}  ratio {:.3e}  max|u| {:.3}",
            rms1 / rms0,
            state.u.amax()
        );
    }
}

/// Learning campaign on the mismatched plant for each preset.
fn campaign() {
    for head in [80.0, 70.0, 50.0] {
        let mut cfg = RunConfig::default();
        cfg.profile.head_up_deg = head;
        let res = run_campaign(&cfg, 6).unwrap();
        let rms: Vec<String> = res
            .summary
            .iterations
            .iter()
            .map(|s| format!("{:.3}", s.rms_m))
            .collect();
        println!(
            "head {head:2}: rms per iteration [{}]  ratio5 {:.3}  lateral {:.2}",
            rms.join(", "),
            res.summary.iterations[5].rms_m / res.summary.iterations[0].rms_m,
            res.summary.lateral_max_abs_m
        );
    }
}

/// Crosswind gust during the maneuver.
fn crosswind() {
    let mut cfg = RunConfig::default();
    cfg.disturbance.bias = 0.0;
    cfg.disturbance.harmonics.clear();
    cfg.disturbance.stochastic_std = 0.0;
    cfg.plant.wind.gust_mps = [0.0, 2.0, 0.0];
    cfg.plant.wind.gust_start_s = 2.0;
    cfg.plant.wind.gust_end_s = 9.0;
    let log = run_flight(&cfg, None, 0).unwrap();
    println!(
        "max|xi_l| {:.3} m  final xi_l {:.4} m  rms_alt {:.3}",
        log.max_abs_xi_l(),
        log.final_xi_l(),
        log.rms_xi_p()
    );
}
