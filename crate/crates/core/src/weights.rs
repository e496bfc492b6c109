//! Weight matrices and pair masks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coherence::PhaseMagnitude;
use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, C64};
use crate::method::WeightScheme;

/// Pair mask applied as `M (.) W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mask {
    /// Keep pairs with `Gamma_ij >= threshold`.
    Coherence(f64),
    /// Keep pairs with `|i - j| <= bandwidth`.
    Bandwidth(usize),
}

impl Mask {
    pub fn keeps(&self, pair: &PhaseMagnitude, i: usize, j: usize) -> bool {
        match *self {
            Mask::Coherence(t) => pair.magnitudes()[(i, j)] >= t,
            Mask::Bandwidth(b) => i.abs_diff(j) <= b,
        }
    }
}

/// Symmetric real weights.
///
/// The diagonal keeps its natural value for each scheme (1 for EW and CW,
/// `-(Gamma^-1)_ii` for ML). Phase-triangulation objectives only read the
/// strict upper triangle; eigendecomposition methods use the full matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
    scheme: WeightScheme,
    mask: Option<Mask>,
}

impl WeightMatrix {
    /// Custom weights; symmetrized from the upper triangle.
    pub fn custom(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: entries.ncols(),
            });
        }
        let entries = DMatrix::from_fn(n, n, |i, j| if i <= j { entries[(i, j)] } else { entries[(j, i)] });
        Ok(Self {
            entries,
            scheme: WeightScheme::Custom,
            mask: None,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }

    pub fn mask(&self) -> Option<Mask> {
        self.mask
    }

    /// `sum_{i<j} |W_ij|`.
    pub fn off_diagonal_abs_sum(&self) -> f64 {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[(i, j)].abs())
            .sum()
    }

    /// `W (.) Phi`, Hermitian.
    pub fn hadamard(&self, pair: &PhaseMagnitude) -> DMatrix<C64> {
        pair.phasors().zip_map(&self.entries, |z, w| z * w)
    }
}

/// Builds the weight matrix of `scheme` for a decomposed coherence matrix.
///
/// ML weights invert the magnitude matrix of `pair` as given, so `pair`
/// should come from a regularized coherence matrix.
pub fn build_weights(scheme: WeightScheme, pair: &PhaseMagnitude, mask: Option<Mask>) -> Result<WeightMatrix> {
    let n = pair.n();
    let gamma = pair.magnitudes();
    let mut entries = match scheme {
        WeightScheme::Ew => DMatrix::from_element(n, n, 1.0),
        WeightScheme::Cw => gamma.clone(),
        WeightScheme::Ml => {
            let inv = guarded_inverse(gamma).ok_or(Error::SingularMagnitudeMatrix)?;
            -inv.component_mul(gamma)
        }
        WeightScheme::Custom => {
            return Err(Error::InvalidInput(
                "custom weights are built with WeightMatrix::custom".into(),
            ))
        }
    };
    // Symmetric by construction up to rounding in the inverse.
    for i in 0..n {
        for j in i + 1..n {
            let keep = mask.is_none_or(|m| m.keeps(pair, i, j));
            let w = if keep { entries[(i, j)] } else { 0.0 };
            entries[(i, j)] = w;
            entries[(j, i)] = w;
        }
    }
    Ok(WeightMatrix { entries, scheme, mask })
}
