//! Quasi-Newton (BFGS) ascent with Armijo backtracking.

use nalgebra::{DMatrix, DVector};

pub(crate) trait Objective: Sync {
    fn dim(&self) -> usize;
    /// Objective value; `-inf` outside the admissible region.
    fn value(&self, x: &[f64]) -> f64;
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct AscentSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_init: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-16;
/// Iterations without measurable progress before giving up.
const STALL_ITERS: usize = 50;

pub(crate) fn ascend(obj: &impl Objective, x0: Vec<f64>, s: &AscentSettings) -> AscentResult {
    let n = obj.dim();
    let mut x = DVector::from_vec(x0);
    let mut g = DVector::zeros(n);
    let mut f = obj.value_and_grad(x.as_slice(), g.as_mut_slice());
    if !f.is_finite() {
        return AscentResult { x: x.data.into(), value: f, converged: false };
    }
    let identity = DMatrix::<f64>::identity(n, n);
    let mut h = identity.clone();
    let mut fresh = true;
    let mut stall = 0;
    let mut converged = false;
    let mut g_new = DVector::zeros(n);
    for _ in 0..s.max_iters {
        if g.amax() < s.grad_tol {
            converged = true;
            break;
        }
        let mut d = &h * &g;
        let mut slope = g.dot(&d);
        if !(slope > 0.0) {
            h.copy_from(&identity);
            fresh = true;
            d.copy_from(&g);
            slope = g.dot(&g);
        }
        let mut t = if fresh { (s.step_init / d.amax()).min(1.0) } else { 1.0 };
        let mut accepted = None;
        while t >= MIN_STEP {
            let xn = &x + &d * t;
            let fnew = obj.value(xn.as_slice());
            if fnew >= f + ARMIJO_C * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= BACKTRACK;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh {
                break;
            }
            h.copy_from(&identity);
            fresh = true;
            continue;
        };
        let fnew = obj.value_and_grad(xn.as_slice(), g_new.as_mut_slice()).max(fnew);
        let sv = &xn - &x;
        // curvature pair for minimizing -f
        let yv = &g - &g_new;
        let sy = sv.dot(&yv);
        if sy > 1e-12 * sv.norm() * yv.norm() {
            if fresh {
                h = &identity * (sy / yv.dot(&yv));
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H <- H - rho (s y^T H + H y s^T) + (rho^2 y^T H y + rho) s s^T
            h -= (&sv * hy.transpose() + &hy * sv.transpose()) * rho;
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho);
        }
        if fnew - f <= 1e-15 * f.abs().max(1.0) {
            stall += 1;
        } else {
            stall = 0;
        }
        x = xn;
        f = fnew;
        std::mem::swap(&mut g, &mut g_new);
        fresh = false;
        if stall >= STALL_ITERS {
            break;
        }
    }
    if !converged && g.amax() < s.grad_tol {
        converged = true;
    }
    AscentResult { x: x.data.into(), value: f, converged }
}
