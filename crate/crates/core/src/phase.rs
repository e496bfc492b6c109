//! Single-reference phase histories.

use std::f64::consts::PI;

use nalgebra::{Complex, DVector};

use crate::error::{Error, Result};

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Unit phasors `exp(i theta_k)`.
pub fn phasors(theta: &[f64]) -> DVector<Complex<f64>> {
    DVector::from_iterator(theta.len(), theta.iter().map(|&t| Complex::from_polar(1.0, t)))
}

/// `|<Lambda(a), Lambda(b)>|`, independent of either reference.
pub fn phasor_overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| Complex::from_polar(1.0, y - x))
        .sum::<Complex<f64>>()
        .norm()
}

/// A phase history referenced to acquisition `reference`.
///
/// The entry at the reference index is exactly zero and every entry lies in
/// `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistory {
    phases: Vec<f64>,
    reference: usize,
}

impl PhaseHistory {
    /// Re-references raw phases to `reference` and wraps them.
    pub fn from_raw(raw: &[f64], reference: usize) -> Result<Self> {
        if reference >= raw.len() {
            return Err(Error::IndexOutOfRange {
                index: reference,
                len: raw.len(),
            });
        }
        let offset = raw[reference];
        let mut phases: Vec<f64> = raw.iter().map(|&t| wrap(t - offset)).collect();
        phases[reference] = 0.0;
        Ok(Self { phases, reference })
    }

    /// Builds a history from the element-wise angles of a complex vector.
    pub fn from_vector(v: &[Complex<f64>], reference: usize) -> Result<Self> {
        let raw: Vec<f64> = v.iter().map(|z| z.arg()).collect();
        Self::from_raw(&raw, reference)
    }

    pub fn zeros(n: usize, reference: usize) -> Result<Self> {
        Self::from_raw(&vec![0.0; n], reference)
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn to_phasors(&self) -> DVector<Complex<f64>> {
        phasors(&self.phases)
    }

    /// Largest absolute wrapped difference to another history.
    pub fn max_abs_diff(&self, other: &PhaseHistory) -> f64 {
        self.phases
            .iter()
            .zip(&other.phases)
            .map(|(a, b)| wrap(a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.phases
    }
}
