//! Phase linking: eigendecomposition (ED) and phase triangulation (PT).
//!
//! Both classes maximize `v^H (W (.) Phi) v`. ED searches unit-norm vectors
//! and is solved exactly by the leading eigenvector; PT fixes every
//! magnitude to one and is solved iteratively over phases, here with
//! Polak-Ribière conjugate gradients or a phase-only Jacobi iteration.
//! The reference phase is removed after optimization.

mod eigen;
mod init;
pub mod jacobi;
mod objective;
pub mod prcg;
mod secondary;

pub use eigen::{ed_link, init_eigen, EigenInit, DEGENERACY_GAP};
pub use init::{init_spanning_tree, init_tridiagonal, maximum_spanning_tree};
pub use objective::{pt_gradient, pt_objective, PtProblem};
pub use secondary::{pt_link_secondary, SecondaryOptions, MIN_RHO};

use serde::{Deserialize, Serialize};

use crate::coherence::PhaseMagnitude;
use crate::error::{Error, Result};
use crate::method::{Method, MethodClass};
use crate::phase::PhaseHistory;
use crate::weights::WeightMatrix;

/// Which algorithm produced a [`LinkingResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Eigen,
    Prcg,
    Jacobi,
}

/// Iterative PT solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PtSolver {
    #[default]
    Prcg,
    Jacobi,
}

/// Starting point for PT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    /// ED solution with the same weights.
    #[default]
    Eigen,
    Tridiagonal,
    SpanningTree,
}

#[derive(Debug, Clone)]
pub struct LinkingResult {
    pub primary: PhaseHistory,
    pub secondary: Option<PhaseHistory>,
    /// `f` at the primary solution (`lambda_max` for ED).
    pub objective_primary: f64,
    pub objective_secondary: Option<f64>,
    pub solver: SolverKind,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the objective gradient at the solution.
    pub gradient_norm: f64,
    /// ED only: leading eigenvalue repeated.
    pub degenerate: bool,
    /// `|<Lambda(theta2), Lambda(theta1)>|` for PT, `|<u1, u2>|` for ED.
    pub orthogonality: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct PtOptions {
    /// Gradient max-norm threshold; defaults to
    /// `1e-8 * sum_{i<j} |W_ij|`.
    pub tol: Option<f64>,
    /// Defaults to `500 N`.
    pub max_iter: Option<usize>,
    pub initial_step: prcg::InitialStep,
}

impl PtOptions {
    pub fn tol_for(&self, w: &WeightMatrix) -> f64 {
        self.tol
            .unwrap_or_else(|| 1e-8 * w.off_diagonal_abs_sum().max(f64::MIN_POSITIVE))
    }

    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(500 * n)
    }
}

fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximizes the PT objective from `init`.
///
/// Returns [`Error::DidNotConverge`] with the best iterate when the
/// iteration cap is reached first.
pub fn pt_link(
    pair: &PhaseMagnitude,
    w: &WeightMatrix,
    init: &PhaseHistory,
    solver: PtSolver,
    opts: &PtOptions,
) -> Result<LinkingResult> {
    let n = pair.n();
    if init.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: init.len() });
    }
    let reference = init.reference();
    let problem = PtProblem::new(pair, w)?;
    let tol = opts.tol_for(w);
    let max_iter = opts.max_iter_for(n);

    let (x, iterations, kind) = match solver {
        PtSolver::Prcg => {
            let out = prcg::maximize(
                |x, g| problem.value_and_gradient(x, g),
                init.phases(),
                &prcg::PrcgOptions {
                    tol,
                    max_iter,
                    restart_every: 0,
                    fixed: None,
                    initial_step: opts.initial_step,
                },
            )?;
            (out.x, out.iterations, SolverKind::Prcg)
        }
        PtSolver::Jacobi => {
            let out = jacobi::iterate(&problem, init.phases(), max_iter)?;
            (out.x, out.iterations, SolverKind::Jacobi)
        }
    };

    let primary = PhaseHistory::from_raw(&x, reference)?;
    let mut grad = vec![0.0; n];
    let objective = problem.value_and_gradient(primary.phases(), &mut grad);
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let gradient_norm = max_norm(&grad);
    let result = LinkingResult {
        primary,
        secondary: None,
        objective_primary: objective,
        objective_secondary: None,
        solver: kind,
        iterations,
        converged: gradient_norm <= tol,
        gradient_norm,
        degenerate: false,
        orthogonality: None,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(Error::DidNotConverge(Box::new(result)))
    }
}

/// Options for [`link`].
#[derive(Debug, Clone, Default)]
pub struct LinkOptions {
    pub solver: PtSolver,
    pub initializer: Initializer,
    pub pt: PtOptions,
    pub secondary: SecondaryOptions,
    /// Compute the secondary (orthogonal) solution.
    pub want_secondary: bool,
}

/// Runs one method end to end: ED directly, PT from the chosen initializer
/// and, if requested, its penalized secondary solution.
///
/// Non-convergence of the primary PT solve is reported through
/// `converged = false` rather than an error. When the secondary search finds
/// a better objective than the primary, the two roles are swapped and the
/// search repeated, so that `f2 <= f1` holds on return.
pub fn link(
    method: Method,
    pair: &PhaseMagnitude,
    w: &WeightMatrix,
    reference: usize,
    opts: &LinkOptions,
) -> Result<LinkingResult> {
    if reference >= pair.n() {
        return Err(Error::IndexOutOfRange { index: reference, len: pair.n() });
    }
    match method.class {
        MethodClass::Ed => ed_link(pair, w, reference, opts.want_secondary),
        MethodClass::Pt => {
            let eig = init_eigen(pair, w, reference)?;
            let start = match opts.initializer {
                Initializer::Eigen => eig.primary.clone(),
                Initializer::Tridiagonal => init_tridiagonal(pair, reference)?,
                Initializer::SpanningTree => init_spanning_tree(pair, reference)?,
            };
            let mut primary = solve_or_best(pair, w, &start, opts)?;
            if !opts.want_secondary {
                return Ok(primary);
            }
            let n = pair.n();
            let slack = 1e-9 * (n * n) as f64;
            let mut secondary_init = eig.secondary;
            for _ in 0..3 {
                let second = pt_link_secondary(pair, w, &primary.primary, &secondary_init, &opts.secondary)?;
                let f2 = second.objective_secondary.expect("secondary present");
                if f2 <= primary.objective_primary + slack {
                    primary.secondary = second.secondary;
                    primary.objective_secondary = Some(f2);
                    primary.orthogonality = second.orthogonality;
                    primary.iterations += second.iterations;
                    return Ok(primary);
                }
                // The orthogonal candidate beats the primary: promote it.
                log::debug!("secondary objective {f2} exceeds primary {}", primary.objective_primary);
                let promoted = second.secondary.expect("secondary present");
                secondary_init = primary.primary.clone();
                primary = solve_or_best(pair, w, &promoted, opts)?;
            }
            Err(Error::OrthogonalityNotReached {
                inner_product: f64::NAN,
                tolerance: opts.secondary.tau_for(n),
            })
        }
    }
}

fn solve_or_best(
    pair: &PhaseMagnitude,
    w: &WeightMatrix,
    start: &PhaseHistory,
    opts: &LinkOptions,
) -> Result<LinkingResult> {
    match pt_link(pair, w, start, opts.solver, &opts.pt) {
        Ok(r) => Ok(r),
        Err(Error::DidNotConverge(r)) => Ok(*r),
        Err(e) => Err(e),
    }
}
