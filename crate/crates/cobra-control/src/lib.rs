//! Simulation-backed control toolkit for the Pugachev's Cobra maneuver of a
//! quadrotor tail-sitter.
//!
//! The vehicle is modeled through its specific-acceleration dynamics: the
//! position controllers treat body-X acceleration and the two attitude angles
//! (pitch about body-Y, lateral tilt about body-Z) as virtual controls, so no
//! aerodynamic coefficients enter the control law. On top of the baseline
//! feedforward/feedback altitude controller and proportional lateral
//! controller, a lifted-domain iterative learning controller estimates the
//! repetitive disturbance along the maneuver with an iteration-domain Kalman
//! filter and replans the feedforward input by box-constrained least squares.
//!
//! Modules:
//!
//! - [`dynamics`]: frames, two-angle attitude parameterization, acceleration
//!   model, virtual-control composition.
//! - [`plant`]: truth-model simulator (inner-loop transients, flat-plate
//!   post-stall aerodynamics, wind, seeded sensor noise).
//! - [`controllers`]: altitude and lateral position control laws plus the
//!   desired-pitch profile generator.
//! - [`ilc`] / [`qp`]: lifted model, disturbance estimator, and the input
//!   update solver.
//! - [`loopshape`]: transfer functions, Bode data, crossover/phase/delay
//!   margins, and gain derivation from bandwidth/phase-margin targets.
//! - [`sim`] / [`campaign`]: closed-loop flight runner and multi-iteration
//!   learning campaigns.
//! - [`config`] / [`cli`]: TOML run configuration and the command entry
//!   points used by the `cobra-control` binary.

pub mod campaign;
pub mod cli;
pub mod config;
pub mod controllers;
pub mod dynamics;
pub mod ilc;
pub mod loopshape;
pub mod output;
pub mod plant;
pub mod qp;
pub mod sim;

use std::path::PathBuf;

/// Errors surfaced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The thrust-axis command would divide by cos(theta) too close to the
    /// 90-degree pitch singularity.
    #[error("attitude singularity guard: |theta| = {theta_deg:.2} deg >= {limit_deg:.2} deg")]
    AttitudeSingularity { theta_deg: f64, limit_deg: f64 },

    /// The simulated state stopped being finite.
    #[error("simulation fault at t = {t:.4} s: state is not finite")]
    SimulationFault { t: f64 },

    /// A maneuver with zero duration was requested.
    #[error("empty trajectory: maneuver profile has zero duration")]
    EmptyTrajectory,

    /// A trajectory log does not span the lifted-domain window.
    #[error("incomplete iteration: log spans {have_s:.3} s, lifted window needs {need_s:.3} s")]
    IncompleteIteration { have_s: f64, need_s: f64 },

    /// Dimension mismatch between lifted-domain quantities.
    #[error("lifted dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The innovation covariance could not be factored.
    #[error("Kalman update: innovation covariance is not positive definite")]
    SingularInnovation,

    /// The input-update solver ran out of iterations.
    #[error("input update did not converge: KKT residual {residual:.3e} after {iterations} iterations")]
    QpNoConvergence { residual: f64, iterations: usize },

    /// A transfer-function evaluation hit a pole on the imaginary axis.
    #[error("transfer function pole on the evaluation axis at omega = {omega:.6e} rad/s")]
    PoleOnAxis { omega: f64 },

    /// An invalid transfer function was constructed.
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    /// A configuration value failed validation.
    #[error("invalid config `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    /// The configuration file could not be read.
    #[error("cannot read config file {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The configuration file could not be parsed.
    #[error("cannot parse config file {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    /// An output artifact could not be written.
    #[error("cannot write {path}: {source}")]
    OutputIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Bad command-line argument combination.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
