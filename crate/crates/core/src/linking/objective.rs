//! Phase-triangulation objective
//! `f(theta) = sum_{i<j} W_ij cos(phi_ij - (theta_i - theta_j))` and its
//! gradient.

use nalgebra::DMatrix;

use crate::coherence::PhaseMagnitude;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::phase::phasors;
use crate::weights::WeightMatrix;

fn check_dims(pair: &PhaseMagnitude, w: &WeightMatrix, theta: &[f64]) -> Result<()> {
    let n = pair.n();
    if w.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.n() });
    }
    if theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta.len(),
        });
    }
    Ok(())
}

/// Evaluates the objective by direct summation over `i < j`.
pub fn pt_objective(pair: &PhaseMagnitude, w: &WeightMatrix, theta: &[f64]) -> Result<f64> {
    check_dims(pair, w, theta)?;
    let n = pair.n();
    let mut f = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            f += w.get(i, j) * (pair.phase(i, j) - (theta[i] - theta[j])).cos();
        }
    }
    Ok(f)
}

/// `df/dtheta_k = sum_{j != k} W_kj sin(phi_kj - (theta_k - theta_j))`,
/// including the reference component.
pub fn pt_gradient(pair: &PhaseMagnitude, w: &WeightMatrix, theta: &[f64]) -> Result<Vec<f64>> {
    check_dims(pair, w, theta)?;
    let n = pair.n();
    Ok((0..n)
        .map(|k| {
            (0..n)
                .filter(|&j| j != k)
                .map(|j| w.get(k, j) * (pair.phase(k, j) - (theta[k] - theta[j])).sin())
                .sum()
        })
        .collect())
}

/// Objective in matrix form, `1/2 Re(z^H A z)` with `z = Lambda(theta)` and
/// `A` Hermitian with zero diagonal.
#[derive(Debug, Clone)]
pub struct PtProblem {
    a: DMatrix<C64>,
}

impl PtProblem {
    pub fn new(pair: &PhaseMagnitude, w: &WeightMatrix) -> Result<Self> {
        if w.n() != pair.n() {
            return Err(Error::DimensionMismatch {
                expected: pair.n(),
                got: w.n(),
            });
        }
        Ok(Self::from_hermitian(w.hadamard(pair)))
    }

    /// Uses the off-diagonal part of a Hermitian matrix.
    pub fn from_hermitian(mut a: DMatrix<C64>) -> Self {
        a.fill_diagonal(C64::new(0.0, 0.0));
        Self { a }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.a
    }

    /// Subtracts `rho * sum_{i<j} cos((ref_i - ref_j) - (theta_i - theta_j))`,
    /// i.e. the pairwise part of `rho |<Lambda(theta), Lambda(ref)>|^2 / 2`.
    pub fn penalized(&self, reference: &[f64], rho: f64) -> Self {
        let v = phasors(reference);
        let mut a = &self.a - (&v * v.adjoint()) * C64::new(rho, 0.0);
        a.fill_diagonal(C64::new(0.0, 0.0));
        Self { a }
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, None)
    }

    pub fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(theta, Some(grad))
    }

    fn evaluate(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let n = self.n();
        let z: Vec<C64> = theta.iter().map(|&t| C64::from_polar(1.0, t)).collect();
        // Column k of a Hermitian matrix is the conjugate of row k.
        let a = self.a.as_slice();
        let mut f = 0.0;
        for (k, col) in a.chunks_exact(n).enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for (ajk, zj) in col.iter().zip(&z) {
                s += ajk.conj() * zj;
            }
            let t = z[k].conj() * s;
            f += t.re;
            if let Some(g) = grad.as_deref_mut() {
                g[k] = t.im;
            }
        }
        0.5 * f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{decompose, CoherenceMatrix};
    use crate::method::WeightScheme;
    use crate::weights::build_weights;

    #[test]
    fn two_acquisitions_single_term() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = C64::from_polar(0.6, 0.7);
        let pair = decompose(&CoherenceMatrix::from_upper(&m));
        let w = build_weights(WeightScheme::Cw, &pair, None).unwrap();
        let theta = [0.2, 0.0];
        let f = pt_objective(&pair, &w, &theta).unwrap();
        assert!((f - 0.6 * (0.7f64 - 0.2).cos()).abs() < 1e-14);
        let g = pt_gradient(&pair, &w, &theta).unwrap();
        assert!((g[0] - 0.6 * (0.7f64 - 0.2).sin()).abs() < 1e-14);
        assert!((g[0] + g[1]).abs() < 1e-14);
        let opt = pt_objective(&pair, &w, &[0.7, 0.0]).unwrap();
        assert!((opt - 0.6).abs() < 1e-12);
    }

    #[test]
    fn matrix_form_agrees_with_direct_sum() {
        let theta_true = [0.0, 0.5, -1.1, 2.0];
        let v = phasors(&theta_true);
        let mut m = &v * v.adjoint() * C64::new(0.7, 0.0);
        m.fill_diagonal(C64::new(1.0, 0.0));
        m[(0, 3)] *= C64::from_polar(1.0, 0.4);
        m[(3, 0)] = m[(0, 3)].conj();
        let pair = decompose(&CoherenceMatrix::new(m).unwrap());
        let w = build_weights(WeightScheme::Ew, &pair, None).unwrap();
        let prob = PtProblem::new(&pair, &w).unwrap();
        let theta = [0.3, -0.2, 1.0, 0.1];
        let mut g = [0.0; 4];
        let f = prob.value_and_gradient(&theta, &mut g);
        assert!((f - pt_objective(&pair, &w, &theta).unwrap()).abs() < 1e-12);
        assert!((prob.value(&theta) - f).abs() < 1e-12);
        for (a, b) in g.iter().zip(pt_gradient(&pair, &w, &theta).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let pair = decompose(&CoherenceMatrix::identity(3));
        let w = build_weights(WeightScheme::Ew, &pair, None).unwrap();
        assert!(matches!(
            pt_objective(&pair, &w, &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
