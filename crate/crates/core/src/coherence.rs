//! Sample coherence estimation, phase/magnitude decomposition and closure
//! phases.
//!
//! The coherence matrix of an ensemble of `M` pixel vectors over `N`
//! acquisitions is the zero-mean complex Pearson correlation
//!
//! ```text
//! C_ij = sum(w_i * conj(w_j)) / sqrt(sum |w_i|^2 * sum |w_j|^2)
//! ```
//!
//! Its element-wise polar decomposition `C = Gamma (.) Phi` separates the
//! confidence `Gamma_ij = |C_ij|` from the interferometric phase
//! `Phi_ij = exp(i phi_ij)`. The closure phase of a triplet,
//! `phi_ij + phi_jk - phi_ik`, vanishes modulo `2 pi` for every triplet
//! exactly when `Phi` has rank one.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{HermitianEigen, C64};
use crate::phase::{wrap, PhaseHistory};

/// `M` samples of an `N`-acquisition distributed scatterer.
///
/// Samples are stored row-major: sample `m` occupies
/// `data[m * n .. (m + 1) * n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelEnsemble {
    n: usize,
    data: Vec<C64>,
}

impl PixelEnsemble {
    pub fn new(n_acquisitions: usize, data: Vec<C64>) -> Result<Self> {
        if n_acquisitions < 2 {
            return Err(Error::TooFewAcquisitions {
                needed: 2,
                got: n_acquisitions,
            });
        }
        if data.is_empty() || data.len() % n_acquisitions != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values do not form whole samples of length {}",
                data.len(),
                n_acquisitions
            )));
        }
        Ok(Self {
            n: n_acquisitions,
            data,
        })
    }

    pub fn from_samples(samples: &[Vec<C64>]) -> Result<Self> {
        let n = samples.first().map_or(0, Vec::len);
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Self::new(n, samples.concat())
    }

    pub fn n_acquisitions(&self) -> usize {
        self.n
    }

    pub fn n_samples(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn sample(&self, m: usize) -> &[C64] {
        &self.data[m * self.n..(m + 1) * self.n]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(self.n)
    }
}

/// Hermitian coherence matrix with an exactly unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceMatrix {
    m: DMatrix<C64>,
}

impl CoherenceMatrix {
    /// Validates a candidate matrix and rebuilds it from its upper triangle.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::TooFewAcquisitions { needed: 2, got: n });
        }
        const TOL: f64 = 1e-9;
        for i in 0..n {
            if (m[(i, i)] - C64::new(1.0, 0.0)).norm() > TOL {
                return Err(Error::InvalidInput(format!(
                    "diagonal entry {i} is {} instead of 1",
                    m[(i, i)]
                )));
            }
            for j in i + 1..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > TOL {
                    return Err(Error::InvalidInput(format!("entry ({i}, {j}) is not Hermitian")));
                }
                if !(m[(i, j)].norm() <= 1.0 + TOL) {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) has magnitude {} > 1",
                        m[(i, j)].norm()
                    )));
                }
            }
        }
        Ok(Self::from_upper(&m))
    }

    /// Trusted constructor: copies the strict upper triangle, mirrors its
    /// conjugate and writes ones on the diagonal.
    pub(crate) fn from_upper(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => m[(i, j)],
            std::cmp::Ordering::Equal => C64::new(1.0, 0.0),
            std::cmp::Ordering::Greater => m[(j, i)].conj(),
        });
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn eigen(&self) -> Result<HermitianEigen> {
        HermitianEigen::new(&self.m)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*crate::linalg::hermitian_eigenvalues(&self.m)?
            .last()
            .expect("n >= 2"))
    }
}

/// Element-wise polar decomposition `C = Gamma (.) Phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMagnitude {
    phasors: DMatrix<C64>,
    magnitudes: DMatrix<f64>,
}

impl PhaseMagnitude {
    pub fn n(&self) -> usize {
        self.phasors.nrows()
    }

    /// `Phi`, unit-magnitude entries.
    pub fn phasors(&self) -> &DMatrix<C64> {
        &self.phasors
    }

    /// `Gamma`, entries in `[0, 1]`.
    pub fn magnitudes(&self) -> &DMatrix<f64> {
        &self.magnitudes
    }

    /// Interferometric phase `phi_ij`.
    pub fn phase(&self, i: usize, j: usize) -> f64 {
        self.phasors[(i, j)].arg()
    }

    /// Reassembles `Gamma (.) Phi`.
    pub fn coherence(&self) -> CoherenceMatrix {
        let n = self.n();
        CoherenceMatrix::from_upper(&DMatrix::from_fn(n, n, |i, j| {
            self.phasors[(i, j)] * self.magnitudes[(i, j)]
        }))
    }

    /// Builds a pair directly from phase and magnitude matrices.
    ///
    /// Only the strict upper triangles are read; the result is Hermitian with
    /// unit diagonal.
    pub fn from_parts(phases: &DMatrix<f64>, magnitudes: &DMatrix<f64>) -> Result<Self> {
        let n = phases.nrows();
        if phases.shape() != (n, n) || magnitudes.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: magnitudes.nrows(),
            });
        }
        let c = DMatrix::from_fn(n, n, |i, j| {
            C64::from_polar(magnitudes[(i, j)].clamp(0.0, 1.0), phases[(i, j)])
        });
        let mut pair = decompose(&CoherenceMatrix::from_upper(&c));
        // Keep the requested phase even where the magnitude is zero.
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::from_polar(1.0, phases[(i, j)]);
                pair.phasors[(i, j)] = z;
                pair.phasors[(j, i)] = z.conj();
            }
        }
        Ok(pair)
    }
}

/// Estimates the sample coherence matrix of an ensemble.
pub fn estimate_coherence(ensemble: &PixelEnsemble) -> Result<CoherenceMatrix> {
    let n = ensemble.n_acquisitions();
    // Upper triangle (including the diagonal) accumulated row-major.
    let mut acc = vec![C64::new(0.0, 0.0); n * n];
    for s in ensemble.samples() {
        for i in 0..n {
            let wi = s[i];
            let row = &mut acc[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += wi * s[j].conj();
            }
        }
    }
    let energy: Vec<f64> = (0..n).map(|i| acc[i * n + i].re).collect();
    if let Some(i) = energy.iter().position(|&e| !(e > 0.0)) {
        return Err(Error::ZeroEnergyAcquisition(i));
    }
    let upper = DMatrix::from_fn(n, n, |i, j| {
        if i < j {
            let z = acc[i * n + j] / (energy[i] * energy[j]).sqrt();
            // Cauchy-Schwarz holds exactly; only rounding can exceed one.
            let r = z.norm();
            if r > 1.0 {
                z / r
            } else {
                z
            }
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(CoherenceMatrix::from_upper(&upper))
}

/// Element-wise polar decomposition. Zero entries get phasor `1 + 0i`.
pub fn decompose(c: &CoherenceMatrix) -> PhaseMagnitude {
    let m = c.as_matrix();
    let magnitudes = m.map(|z| z.norm());
    let phasors = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let r = magnitudes[(i, j)];
        if r > 0.0 {
            m[(i, j)] / r
        } else {
            C64::new(1.0, 0.0)
        }
    });
    PhaseMagnitude {
        phasors,
        magnitudes,
    }
}

/// Closure phase `phi_ij + phi_jk - phi_ik`, wrapped to `(-pi, pi]`.
pub fn closure_phase(pair: &PhaseMagnitude, i: usize, j: usize, k: usize) -> Result<f64> {
    let n = pair.n();
    for idx in [i, j, k] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if i == j || j == k || i == k {
        return Err(Error::RepeatedIndex(i, j, k));
    }
    Ok(wrap(pair.phase(i, j) + pair.phase(j, k) - pair.phase(i, k)))
}

#[inline]
fn closure_cosine(phi: &DMatrix<C64>, i: usize, j: usize, k: usize) -> f64 {
    (phi[(i, j)] * phi[(j, k)] * phi[(i, k)].conj()).re
}

/// Mean cosine of all closure phases over `i < j < k`, in `[-1, 1]`.
pub fn closure_mean(pair: &PhaseMagnitude) -> Result<f64> {
    let n = pair.n();
    if n < 3 {
        return Err(Error::TooFewAcquisitions { needed: 3, got: n });
    }
    let phi = pair.phasors();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let pij = phi[(i, j)];
            for k in j + 1..n {
                sum += (pij * phi[(j, k)] * phi[(i, k)].conj()).re;
                count += 1;
            }
        }
    }
    Ok((sum / count as f64).clamp(-1.0, 1.0))
}

/// Closure phase coefficient `max(closure_mean, 0)`.
pub fn closure_coefficient(pair: &PhaseMagnitude) -> Result<f64> {
    Ok(closure_mean(pair)?.max(0.0))
}

/// Outcome of [`rank_one_extract`].
#[derive(Debug, Clone, PartialEq)]
pub enum RankOne {
    Consistent(PhaseHistory),
    NotRankOne,
}

/// Reads the phase history straight off column `p` when every closure
/// phase vanishes.
pub fn rank_one_extract(pair: &PhaseMagnitude, reference: usize) -> Result<RankOne> {
    let n = pair.n();
    if reference >= n {
        return Err(Error::IndexOutOfRange {
            index: reference,
            len: n,
        });
    }
    let phi = pair.phasors();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if (1.0 - closure_cosine(phi, i, j, k)).abs() > 1e-9 {
                    return Ok(RankOne::NotRankOne);
                }
            }
        }
    }
    let column: Vec<f64> = (0..n).map(|i| phi[(i, reference)].arg()).collect();
    Ok(RankOne::Consistent(PhaseHistory::from_raw(&column, reference)?))
}

/// Spectral regularization `(1 - beta) C + beta I`.
pub fn regularize(c: &CoherenceMatrix, beta: f64) -> Result<CoherenceMatrix> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidBeta(beta));
    }
    if beta == 0.0 {
        return Ok(c.clone());
    }
    let scaled = c.as_matrix() * C64::new(1.0 - beta, 0.0);
    Ok(CoherenceMatrix::from_upper(&scaled))
}
