//! Minimal BFGS minimizer with Armijo backtracking, used by the likelihood fit.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { gradient_tol: 1e-8, max_iterations: 5000 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut value, mut grad) = f(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh_h = true;
    let mut trace = vec![value];
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if grad.norm() < opts.gradient_tol {
            break;
        }
        let mut dir = -(&h * &grad);
        let mut slope = grad.dot(&dir);
        if slope.is_nan() || slope >= 0.0 {
            h.fill_with_identity();
            fresh_h = true;
            dir = -grad.clone();
            slope = grad.dot(&dir);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &x + &dir * step;
            let (v, g) = f(&candidate);
            if v.is_finite() && v <= value + ARMIJO_C1 * step * slope {
                accepted = Some((candidate, v, g));
                break;
            }
            step *= 0.5;
        }

        let Some((x_new, v_new, g_new)) = accepted else {
            if fresh_h {
                break;
            }
            // Stale curvature model: retry once along steepest descent.
            h.fill_with_identity();
            fresh_h = true;
            continue;
        };

        let s = &x_new - &x;
        let y = &g_new - &grad;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if fresh_h {
                // Scale the initial inverse Hessian to the observed curvature.
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy)) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh_h = false;
        }

        x = x_new;
        value = v_new;
        grad = g_new;
        trace.push(value);
        iterations += 1;
    }

    let gradient_norm = grad.norm();
    BfgsOutcome { x, value, gradient_norm, iterations, converged: gradient_norm < opts.gradient_tol, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            (v, g)
        };
        let out = minimize(f, DVector::from_vec(vec![-1.2, 1.0]), &BfgsOptions::default());
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let f = |x: &DVector<f64>| (x.dot(x), x * 2.0);
        let out = minimize(f, DVector::from_vec(vec![3.0; 4]), &BfgsOptions { gradient_tol: 1e-12, max_iterations: 0 });
        assert!(!out.converged);
        assert_eq!(out.iterations, 0);
    }
}
