//! Polak-Ribière nonlinear conjugate gradient ascent.
//!
//! Backtracking line search with a sufficient-increase condition. The first
//! trial step moves the largest coordinate by one radian, or, with
//! [`InitialStep::Adaptive`], is the minimizer of the quadratic through the
//! current slope and the previous gain (never more than one radian). The search
//! direction falls back to steepest ascent whenever the Polak-Ribière
//! coefficient turns negative, the direction stops being an ascent
//! direction, or every `restart_every` iterations.
//!
//! Close to the optimum the increase predicted by the Armijo test drops below
//! the rounding error of the objective. Once the change in objective is
//! within that noise the value test is meaningless, and a step is accepted on
//! the approximate Wolfe condition `phi'(alpha) >= -(1 - 2 delta) phi'(0)`
//! instead. The objective trace is therefore non-decreasing up to a relative
//! `1e-12`.

use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const CONTRACTION: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;
/// Relative size of objective changes treated as rounding noise.
const ROUNDOFF: f64 = 1e-12;
/// Approximate Wolfe parameter used once objective changes are noise.
const WOLFE_DELTA: f64 = 0.1;

/// First trial step of each line search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialStep {
    /// Largest coordinate moves by one radian.
    Unit,
    /// `2.02 * (f_k - f_{k-1}) / slope`, capped at [`InitialStep::Unit`].
    #[default]
    Adaptive,
}

#[derive(Debug, Clone)]
pub struct PrcgOptions {
    /// Convergence threshold on the max-norm of the projected gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Restart period; `0` means the problem dimension.
    pub restart_every: usize,
    /// Coordinate held fixed during the ascent.
    pub fixed: Option<usize>,
    pub initial_step: InitialStep,
}

#[derive(Debug, Clone)]
pub struct PrcgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximizes `f`, which returns the objective and writes the gradient.
pub fn maximize<F>(mut f: F, x0: &[f64], opts: &PrcgOptions) -> Result<PrcgOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let restart_every = if opts.restart_every == 0 { n.max(1) } else { opts.restart_every };
    let project = |g: &mut [f64]| {
        if let Some(p) = opts.fixed {
            g[p] = 0.0;
        }
    };

    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    project(&mut g);
    let mut d = g.clone();
    let mut trace = vec![value];

    let mut x_trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut since_restart = 0usize;
    let mut iterations = 0usize;
    let mut gradient_norm = max_norm(&g);
    let mut previous: Option<(f64, f64)> = None;
    let scale = value.abs();

    while iterations < opts.max_iter {
        if gradient_norm <= opts.tol {
            break;
        }
        let mut slope = dot(&g, &d);
        let mut steepest = since_restart == 0;
        if slope <= 0.0 {
            d.copy_from_slice(&g);
            slope = dot(&g, &g);
            steepest = true;
        }

        let d_norm = max_norm(&d);
        let unit = 1.0 / d_norm;
        let noise = ROUNDOFF * value.abs().max(scale);
        let mut alpha = match (opts.initial_step, previous) {
            (InitialStep::Adaptive, Some((_, gain))) if gain > noise => (2.02 * gain / slope).min(unit),
            _ => unit,
        };
        let mut accepted = None;
        while alpha * d_norm >= MIN_STEP {
            for k in 0..n {
                x_trial[k] = x[k] + alpha * d[k];
            }
            let v = f(&x_trial, &mut g_trial);
            if !v.is_finite() {
                return Err(Error::NonFiniteObjective);
            }
            let accept = if (v - value).abs() <= noise {
                dot(&g_trial, &d) >= -(1.0 - 2.0 * WOLFE_DELTA) * slope
            } else {
                v >= value + ARMIJO * alpha * slope
            };
            if accept {
                accepted = Some(v);
                break;
            }
            alpha *= CONTRACTION;
        }

        iterations += 1;
        let Some(v_new) = accepted else {
            if steepest {
                // No increase along the gradient at representable step sizes.
                break;
            }
            d.copy_from_slice(&g);
            since_restart = 0;
            continue;
        };

        previous = Some((alpha, v_new - value));
        project(&mut g_trial);
        let gg = dot(&g, &g);
        let beta = if gg > 0.0 {
            (dot(&g_trial, &g_trial) - dot(&g_trial, &g)) / gg
        } else {
            0.0
        };
        since_restart += 1;
        let restart = beta <= 0.0 || since_restart >= restart_every;
        for k in 0..n {
            d[k] = if restart { g_trial[k] } else { g_trial[k] + beta * d[k] };
        }
        if restart {
            since_restart = 0;
        }

        std::mem::swap(&mut x, &mut x_trial);
        std::mem::swap(&mut g, &mut g_trial);
        value = v_new;
        trace.push(value);
        gradient_norm = max_norm(&g);
    }

    Ok(PrcgOutcome {
        converged: gradient_norm <= opts.tol,
        x,
        value,
        gradient_norm,
        iterations,
        trace,
    })
}
