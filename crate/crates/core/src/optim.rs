//! Deterministic minimisation of smooth convex objectives.
//!
//! Two methods share one stopping rule (`‖∇f‖ ≤ grad_tol` or `max_iters`):
//! damped Newton with an Armijo line search, and plain gradient descent with
//! Armijo backtracking. Newton is the default because the surrogate losses
//! couple `θ` and `ϑ` through `λ²`, which makes first-order methods crawl for
//! knowledgeable raters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A twice-differentiable objective.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    /// Writes the gradient into `g` and returns the value.
    fn value_grad(&self, x: &DVector<f64>, g: &mut DVector<f64>) -> f64;
    /// Writes the Hessian into `h` (overwriting it).
    fn hessian(&self, x: &DVector<f64>, h: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Newton,
    GradientDescent,
}

/// Starting point policy for the MAP solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitPolicy {
    /// Start at the prior mean for every block.
    Prior,
    /// Start at the origin.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub method: Method,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init: InitPolicy,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self { method: Method::Newton, max_iters: 10_000, grad_tol: 1e-8, init: InitPolicy::Prior }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    GradTol,
    /// The Newton decrement fell below the floating-point resolution of the
    /// objective; no representable step makes progress.
    PrecisionLimit,
    MaxIters,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    pub stop: StopReason,
}

const ARMIJO_C1: f64 = 1e-4;

pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: DVector<f64>, spec: &OptimizerSpec) -> Outcome {
    match spec.method {
        Method::Newton => newton(obj, x0, spec),
        Method::GradientDescent => gradient_descent(obj, x0, spec),
    }
}

fn finish(x: DVector<f64>, value: f64, grad_norm: f64, iters: usize, stop: StopReason) -> Outcome {
    let converged = matches!(stop, StopReason::GradTol | StopReason::PrecisionLimit);
    Outcome { x, value, grad_norm, iters, converged, stop }
}

fn newton<O: Objective + ?Sized>(obj: &O, mut x: DVector<f64>, spec: &OptimizerSpec) -> Outcome {
    let n = obj.dim();
    let mut g = DVector::zeros(n);
    let mut g_trial = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    let mut f = obj.value_grad(&x, &mut g);
    for iter in 0..spec.max_iters {
        let gn = g.norm();
        if gn <= spec.grad_tol {
            return finish(x, f, gn, iter, StopReason::GradTol);
        }
        obj.hessian(&x, &mut h);
        let p = newton_direction(&h, &g);
        let slope = g.dot(&p);
        // Below this the predicted decrease is lost in the rounding of `f`.
        let decrement_floor = 64.0 * f64::EPSILON * f.abs().max(1.0);
        let mut accepted = false;
        if -slope > decrement_floor {
            let mut t = 1.0;
            while t > 1e-12 {
                let xt = &x + t * &p;
                let ft = obj.value_grad(&xt, &mut g_trial);
                if ft.is_finite() && ft <= f + ARMIJO_C1 * t * slope {
                    x = xt;
                    f = ft;
                    std::mem::swap(&mut g, &mut g_trial);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            // Values no longer discriminate; take the full step only if it
            // shrinks the gradient.
            let xt = &x + &p;
            let ft = obj.value_grad(&xt, &mut g_trial);
            if ft.is_finite() && g_trial.norm() < gn {
                x = xt;
                f = ft;
                std::mem::swap(&mut g, &mut g_trial);
            } else if -slope <= decrement_floor {
                return finish(x, f, gn, iter, StopReason::PrecisionLimit);
            } else {
                return finish(x, f, gn, iter, StopReason::LineSearchFailed);
            }
        }
    }
    let gn = g.norm();
    let stop = if gn <= spec.grad_tol { StopReason::GradTol } else { StopReason::MaxIters };
    finish(x, f, gn, spec.max_iters, stop)
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let scale = h.diagonal().iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..20 {
        let mut a = h.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += shift;
        }
        if let Some(c) = a.cholesky() {
            return -c.solve(g);
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
    }
    -g.clone()
}

fn gradient_descent<O: Objective + ?Sized>(obj: &O, mut x: DVector<f64>, spec: &OptimizerSpec) -> Outcome {
    let n = obj.dim();
    let mut g = DVector::zeros(n);
    let mut g_trial = DVector::zeros(n);
    let mut f = obj.value_grad(&x, &mut g);
    let mut step = 1.0;
    for iter in 0..spec.max_iters {
        let gn = g.norm();
        if gn <= spec.grad_tol {
            return finish(x, f, gn, iter, StopReason::GradTol);
        }
        let gg = gn * gn;
        let floor = 64.0 * f64::EPSILON * f.abs().max(1.0);
        let mut t = step;
        let mut accepted = false;
        while t > 1e-30 {
            let xt = &x - t * &g;
            let ft = obj.value_grad(&xt, &mut g_trial);
            // Once the predicted decrease is below the resolution of `f`,
            // search on the directional derivative: the longest step that
            // does not pass the line minimum.
            let ok = if t * gg > floor { ft <= f - ARMIJO_C1 * t * gg } else { g_trial.dot(&g) >= 0.0 };
            if ft.is_finite() && ok {
                x = xt;
                f = ft;
                std::mem::swap(&mut g, &mut g_trial);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return finish(x, f, gn, iter, StopReason::LineSearchFailed);
        }
        step = t * 2.0;
    }
    let gn = g.norm();
    let stop = if gn <= spec.grad_tol { StopReason::GradTol } else { StopReason::MaxIters };
    finish(x, f, gn, spec.max_iters, stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// `½ xᵀ A x − bᵀ x + Σ log(1 + e^{x_i})`.
    struct Toy {
        a: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl Objective for Toy {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.dot(&(&self.a * x)) - self.b.dot(x)
                + x.iter().map(|&v| crate::numeric::softplus(v)).sum::<f64>()
        }
        fn value_grad(&self, x: &DVector<f64>, g: &mut DVector<f64>) -> f64 {
            *g = &self.a * x - &self.b + x.map(crate::numeric::logistic);
            self.value(x)
        }
        fn hessian(&self, x: &DVector<f64>, h: &mut DMatrix<f64>) {
            *h = self.a.clone();
            for i in 0..x.len() {
                let s = crate::numeric::logistic(x[i]);
                h[(i, i)] += s * (1.0 - s);
            }
        }
    }

    fn toy() -> Toy {
        Toy {
            a: DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 100.0]),
            b: DVector::from_vec(vec![1.0, -2.0, 3.0]),
        }
    }

    #[test]
    fn both_methods_reach_the_same_minimiser() {
        let obj = toy();
        let newton = minimize(&obj, DVector::zeros(3), &OptimizerSpec::default());
        let gd = minimize(
            &obj,
            DVector::zeros(3),
            &OptimizerSpec { method: Method::GradientDescent, ..Default::default() },
        );
        assert!(newton.converged && gd.converged, "{:?} {:?} {} {}", newton.stop, gd.stop, gd.iters, gd.grad_norm);
        assert!(newton.iters < 20);
        for i in 0..3 {
            assert_abs_diff_eq!(newton.x[i], gd.x[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn max_iters_reports_non_convergence() {
        let spec = OptimizerSpec { method: Method::GradientDescent, max_iters: 2, ..Default::default() };
        let out = minimize(&toy(), DVector::zeros(3), &spec);
        assert!(!out.converged);
        assert_eq!(out.stop, StopReason::MaxIters);
    }
}
