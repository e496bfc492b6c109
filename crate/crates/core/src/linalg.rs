//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Eigen-decomposition of a Hermitian matrix, eigenpairs sorted by
/// decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(m: &DMatrix<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::EigensolverFailure);
        }
        let eig = m
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(Error::EigensolverFailure)?;
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self { values, vectors })
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

/// Eigenvalues only, sorted decreasing.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigensolverFailure);
    }
    let mut values: Vec<f64> = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(Error::EigensolverFailure)?
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Real matrix inverse with a conditioning guard.
pub fn guarded_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = m.clone().try_inverse()?;
    if inv.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let cond = m.norm() * inv.norm();
    if !cond.is_finite() || cond > 1e14 {
        return None;
    }
    Some(inv)
}
