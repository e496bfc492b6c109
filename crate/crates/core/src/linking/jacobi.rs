//! Phase-only Jacobi iteration: every phase moves simultaneously to the
//! angle of its weighted neighbour sum,
//! `theta_k <- angle(sum_{j != k} W_kj Phi_kj exp(i theta_j))`.

use crate::error::{Error, Result};
use crate::phase::{phasors, wrap};

use super::objective::PtProblem;

/// Phase change below which the iteration has reached a fixed point.
pub const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct JacobiOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Whether the last sweep moved no phase by more than [`STEP_TOL`].
    pub stationary: bool,
}

pub fn iterate(problem: &PtProblem, x0: &[f64], max_iter: usize) -> Result<JacobiOutcome> {
    let a = problem.matrix();
    let mut x = x0.to_vec();
    let mut best = (problem.value(&x), x.clone());
    let mut iterations = 0;
    let mut stationary = false;
    while iterations < max_iter {
        let s = a * phasors(&x);
        let mut step = 0.0f64;
        for (k, sk) in s.iter().enumerate() {
            if sk.norm() > 0.0 {
                let t = sk.arg();
                step = step.max(wrap(t - x[k]).abs());
                x[k] = t;
            }
        }
        iterations += 1;
        let v = problem.value(&x);
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        if v > best.0 {
            best = (v, x.clone());
        }
        if step < STEP_TOL {
            stationary = true;
            break;
        }
    }
    // The iteration is not monotone; keep the best iterate unless we stopped
    // at a fixed point.
    let (value, x) = if stationary { (problem.value(&x), x) } else { best };
    Ok(JacobiOutcome {
        x,
        value,
        iterations,
        stationary,
    })
}
