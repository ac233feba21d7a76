//! Upper-bounded least squares via accelerated projected gradient.
//!
//! Solves
//!
//! ```text
//! min_u  0.5 ||F u + d||^2 + 0.5 alpha ||u||^2   s.t.  u <= c_max  (elementwise)
//! ```
//!
//! The 1/2 scaling leaves the minimizer of the unscaled squared-norm
//! objective unchanged. Only upper bounds are enforced. The step is the
//! fixed 1/L with L bounded by power iteration on `F^T F`, with Nesterov
//! acceleration and a function-value restart; termination is on the
//! projected-gradient (KKT) residual. Everything is deterministic.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Default KKT residual tolerance.
pub const DEFAULT_KKT_TOL: f64 = 1e-8;
/// Default iteration cap.
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
}

/// Objective value (with the internal 1/2 scaling).
pub fn objective(f: &DMatrix<f64>, d: &DVector<f64>, alpha: f64, u: &DVector<f64>) -> f64 {
    let r = f * u + d;
    0.5 * r.norm_squared() + 0.5 * alpha * u.norm_squared()
}

/// Projection onto the feasible set `u <= c_max`.
fn project(u: &DVector<f64>, c_max: &DVector<f64>) -> DVector<f64> {
    u.zip_map(c_max, f64::min)
}

/// Largest eigenvalue of a symmetric PSD matrix, bounded by power iteration
/// from a deterministic start and padded by 2 percent.
fn spectral_bound(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = v.dot(&w);
        v = w / norm;
    }
    1.02 * lambda.max(0.0)
}

/// Projected-gradient fixed-point residual `||u - P(u - grad)||_inf`; zero
/// exactly at a KKT point of the box-constrained problem.
pub fn kkt_residual(
    f: &DMatrix<f64>,
    d: &DVector<f64>,
    alpha: f64,
    c_max: &DVector<f64>,
    u: &DVector<f64>,
) -> f64 {
    let grad = f.transpose() * (f * u + d) + u * alpha;
    let stepped = project(&(u - &grad), c_max);
    (u - stepped).amax()
}

/// Lagrange multipliers of the upper bounds at `u`: the negative gradient on
/// the active set, zero elsewhere. All must be non-negative at a solution.
pub fn kkt_multipliers(
    f: &DMatrix<f64>,
    d: &DVector<f64>,
    alpha: f64,
    c_max: &DVector<f64>,
    u: &DVector<f64>,
    active_tol: f64,
) -> DVector<f64> {
    let grad = f.transpose() * (f * u + d) + u * alpha;
    DVector::from_fn(u.len(), |i, _| {
        if (c_max[i] - u[i]).abs() <= active_tol {
            -grad[i]
        } else {
            0.0
        }
    })
}

/// Solve the upper-bounded ridge least-squares problem.
pub fn solve_upper_bounded_ls(
    f: &DMatrix<f64>,
    d: &DVector<f64>,
    alpha: f64,
    c_max: &DVector<f64>,
    kkt_tol: f64,
    max_iterations: usize,
) -> Result<QpSolution> {
    let n = f.ncols();
    assert_eq!(f.nrows(), d.len(), "residual dimension mismatch");
    assert_eq!(c_max.len(), n, "bound dimension mismatch");
    assert!(alpha >= 0.0, "alpha must be non-negative");

    let gram = f.transpose() * f;
    let ftd = f.transpose() * d;
    let lipschitz = (spectral_bound(&gram) + alpha).max(f64::MIN_POSITIVE);
    let grad = |u: &DVector<f64>| &gram * u + &ftd + u * alpha;

    let mut x = project(&DVector::zeros(n), c_max);
    let mut y = x.clone();
    let mut fx = objective(f, d, alpha, &x);
    let mut theta: f64 = 1.0;

    for k in 0..max_iterations {
        let x_next = project(&(&y - grad(&y) / lipschitz), c_max);
        let fx_next = objective(f, d, alpha, &x_next);
        if fx_next > fx && theta > 1.0 {
            // Momentum overshot: restart from the best iterate.
            y = x.clone();
            theta = 1.0;
            continue;
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &x_next + (&x_next - &x) * ((theta - 1.0) / theta_next);
        x = x_next;
        fx = fx_next;
        theta = theta_next;

        let residual = {
            let g = grad(&x);
            let stepped = project(&(&x - &g), c_max);
            (&x - stepped).amax()
        };
        if residual <= kkt_tol {
            return Ok(QpSolution {
                u: x,
                iterations: k + 1,
                kkt_residual: residual,
                objective: fx,
            });
        }
    }
    Err(Error::QpNoConvergence {
        residual: kkt_residual(f, d, alpha, c_max, &x),
        iterations: max_iterations,
    })
}
