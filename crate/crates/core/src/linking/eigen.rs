//! Eigendecomposition linking: phases of the leading eigenvector of
//! `W (.) Phi`.

use crate::coherence::PhaseMagnitude;
use crate::error::{Error, Result};
use crate::linalg::HermitianEigen;
use crate::phase::PhaseHistory;
use crate::weights::WeightMatrix;

use super::{LinkingResult, SolverKind};

/// Relative eigen-gap below which the top eigenvalue counts as repeated.
pub const DEGENERACY_GAP: f64 = 1e-9;

/// Top two eigenpairs of `W (.) Phi`, converted to phase histories.
#[derive(Debug, Clone)]
pub struct EigenInit {
    pub primary: PhaseHistory,
    pub secondary: PhaseHistory,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `|<u1, u2>|` of the unit eigenvectors.
    pub eigenvector_overlap: f64,
    pub degenerate: bool,
}

pub fn init_eigen(pair: &PhaseMagnitude, w: &WeightMatrix, reference: usize) -> Result<EigenInit> {
    let n = pair.n();
    if w.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.n() });
    }
    let eig = HermitianEigen::new(&w.hadamard(pair))?;
    let u1 = eig.vector(0);
    let u2 = eig.vector(1);
    let scale = eig.values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let gap = eig.values[0] - eig.values[1];
    Ok(EigenInit {
        primary: PhaseHistory::from_vector(u1.as_slice(), reference)?,
        secondary: PhaseHistory::from_vector(u2.as_slice(), reference)?,
        lambda1: eig.values[0],
        lambda2: eig.values[1],
        eigenvector_overlap: u1.dotc(&u2).norm(),
        degenerate: gap < DEGENERACY_GAP * scale,
    })
}

/// ED linking. The objective is the largest eigenvalue; with
/// `want_secondary` the second eigenpair supplies the secondary solution.
pub fn ed_link(
    pair: &PhaseMagnitude,
    w: &WeightMatrix,
    reference: usize,
    want_secondary: bool,
) -> Result<LinkingResult> {
    let init = init_eigen(pair, w, reference)?;
    if init.degenerate {
        log::debug!("leading eigenvalue repeated: {} vs {}", init.lambda1, init.lambda2);
    }
    Ok(LinkingResult {
        primary: init.primary,
        secondary: want_secondary.then_some(init.secondary),
        objective_primary: init.lambda1,
        objective_secondary: want_secondary.then_some(init.lambda2),
        solver: SolverKind::Eigen,
        iterations: 0,
        converged: true,
        gradient_norm: 0.0,
        degenerate: init.degenerate,
        orthogonality: want_secondary.then_some(init.eigenvector_overlap),
    })
}
