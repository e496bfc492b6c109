//! Secondary phase-triangulation solution by penalized PRCG.
//!
//! The secondary solution maximizes the PT objective among phase vectors
//! orthogonal to the primary one. Orthogonality is enforced with a penalty
//! `rho * |<Lambda(theta), Lambda(theta1)>|^2` whose weight starts at the
//! primary's normalized fit and doubles after each inner solve until
//! `|<Lambda(theta2), Lambda(theta1)>| < tau`.

use crate::coherence::PhaseMagnitude;
use crate::error::{Error, Result};
use crate::phase::{phasor_overlap, PhaseHistory};
use crate::weights::WeightMatrix;

use super::objective::PtProblem;
use super::prcg::{self, PrcgOptions};
use super::{LinkingResult, PtOptions, SolverKind};

/// Smallest starting penalty weight.
pub const MIN_RHO: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SecondaryOptions {
    /// Orthogonality tolerance; defaults to `0.05 N`.
    pub tau: Option<f64>,
    /// Ratio between the largest and the starting penalty weight.
    pub rho_growth_limit: f64,
    /// Inner solves; the tolerance defaults to `1e-6 * sum_{i<j} |W_ij|`.
    pub inner: PtOptions,
}

impl Default for SecondaryOptions {
    fn default() -> Self {
        Self {
            tau: None,
            rho_growth_limit: (1u64 << 30) as f64,
            inner: PtOptions::default(),
        }
    }
}

impl SecondaryOptions {
    pub fn tau_for(&self, n: usize) -> f64 {
        self.tau.unwrap_or(0.05 * n as f64)
    }
}

pub fn pt_link_secondary(
    pair: &PhaseMagnitude,
    w: &WeightMatrix,
    primary: &PhaseHistory,
    init: &PhaseHistory,
    opts: &SecondaryOptions,
) -> Result<LinkingResult> {
    let n = pair.n();
    let reference = primary.reference();
    for h in [primary, init] {
        if h.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: h.len() });
        }
    }
    let problem = PtProblem::new(pair, w)?;
    let f_max = w.off_diagonal_abs_sum();
    let f1 = problem.value(primary.phases());
    let fit = if f_max > 0.0 { (f1 / f_max).clamp(0.0, 1.0) } else { 0.0 };
    let rho0 = fit.max(MIN_RHO);
    let rho_max = rho0 * opts.rho_growth_limit;
    let tau = opts.tau_for(n);

    let inner = PrcgOptions {
        tol: opts
            .inner
            .tol
            .unwrap_or_else(|| 1e-6 * w.off_diagonal_abs_sum().max(f64::MIN_POSITIVE)),
        max_iter: opts.inner.max_iter_for(n),
        restart_every: 0,
        fixed: None,
        initial_step: opts.inner.initial_step,
    };

    let mut theta = init.phases().to_vec();
    let mut rho = rho0;
    let mut iterations = 0;
    let mut overlap = phasor_overlap(&theta, primary.phases());
    loop {
        if rho > rho_max {
            return Err(Error::OrthogonalityNotReached {
                inner_product: overlap,
                tolerance: tau,
            });
        }
        let penalized = problem.penalized(primary.phases(), rho);
        let out = prcg::maximize(|x, g| penalized.value_and_gradient(x, g), &theta, &inner)?;
        iterations += out.iterations;
        theta = out.x;
        overlap = phasor_overlap(&theta, primary.phases());
        if overlap < tau {
            let secondary = PhaseHistory::from_raw(&theta, reference)?;
            let f2 = problem.value(secondary.phases());
            return Ok(LinkingResult {
                primary: primary.clone(),
                secondary: Some(secondary),
                objective_primary: f1,
                objective_secondary: Some(f2),
                solver: SolverKind::Prcg,
                iterations,
                converged: out.converged,
                gradient_norm: out.gradient_norm,
                degenerate: false,
                orthogonality: Some(overlap),
            });
        }
        rho *= 2.0;
    }
}
