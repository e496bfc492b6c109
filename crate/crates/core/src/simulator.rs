//! Synthetic distributed-scatterer stacks with known covariance.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{CoherenceMatrix, PixelEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{HermitianEigen, C64};
use crate::phase::phasors;
use crate::random::{complex_normal, substream};
use crate::stack::SlcStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    /// Identity: independent acquisitions.
    PureNoise,
    /// `(1 - epsilon) v v^H + epsilon I` with `v = exp(i theta)`.
    RankOnePlusNoise,
    /// `gamma0 exp(-|i - j| / tau)` coherence with phases `theta_i - theta_j`.
    ExpDecorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    pub n: usize,
    /// Defaults to all zeros.
    #[serde(default)]
    pub true_phases: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub gamma0: f64,
    /// E-folding length in acquisitions; may be infinite.
    #[serde(default = "infinite")]
    pub tau_decorr: f64,
    #[serde(default)]
    pub epsilon: f64,
}

fn one() -> f64 {
    1.0
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl CovarianceSpec {
    pub fn pure_noise(n: usize) -> Self {
        Self {
            kind: CovarianceKind::PureNoise,
            n,
            true_phases: None,
            gamma0: 1.0,
            tau_decorr: f64::INFINITY,
            epsilon: 0.0,
        }
    }

    pub fn rank_one(phases: Vec<f64>, epsilon: f64) -> Self {
        Self {
            kind: CovarianceKind::RankOnePlusNoise,
            n: phases.len(),
            true_phases: Some(phases),
            epsilon,
            ..Self::pure_noise(0)
        }
    }

    pub fn exp_decorrelation(phases: Vec<f64>, gamma0: f64, tau_decorr: f64) -> Self {
        Self {
            kind: CovarianceKind::ExpDecorrelation,
            n: phases.len(),
            true_phases: Some(phases),
            gamma0,
            tau_decorr,
            ..Self::pure_noise(0)
        }
    }

    /// True phase history, zeros when unspecified or for pure noise.
    pub fn phases(&self) -> Vec<f64> {
        match (&self.true_phases, self.kind) {
            (Some(p), k) if k != CovarianceKind::PureNoise => p.clone(),
            _ => vec![0.0; self.n],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewAcquisitions { needed: 2, got: self.n });
        }
        if let Some(p) = &self.true_phases {
            if p.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: p.len(),
                });
            }
        }
        let bad = |name: &str, v: f64| Err(Error::InvalidInput(format!("{name} = {v}")));
        if !(0.0..=1.0).contains(&self.gamma0) {
            return bad("gamma0", self.gamma0);
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.tau_decorr > 0.0) {
            return bad("tau_decorr", self.tau_decorr);
        }
        Ok(())
    }
}

/// Model coherence matrix of `spec`.
pub fn build_covariance(spec: &CovarianceSpec) -> Result<CoherenceMatrix> {
    spec.validate()?;
    let n = spec.n;
    let v = phasors(&spec.phases());
    let m = match spec.kind {
        CovarianceKind::PureNoise => DMatrix::identity(n, n),
        CovarianceKind::RankOnePlusNoise => {
            let e = spec.epsilon;
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    v[i] * v[j].conj() * (1.0 - e)
                }
            })
        }
        CovarianceKind::ExpDecorrelation => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                let g = spec.gamma0 * (-(i.abs_diff(j) as f64) / spec.tau_decorr).exp();
                v[i] * v[j].conj() * g
            }
        }),
    };
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += C64::new(1e-10, 0.0);
    }
    if Cholesky::new(shifted).is_none() {
        return Err(Error::NotPsd);
    }
    CoherenceMatrix::new(m)
}

/// A factor `L` with `L L^H = C`.
///
/// Cholesky when `C` is positive definite, otherwise `U sqrt(Lambda)` from
/// the eigendecomposition with negative rounding clamped to zero.
pub fn covariance_factor(c: &CoherenceMatrix) -> Result<DMatrix<C64>> {
    if let Some(chol) = Cholesky::new(c.as_matrix().clone()) {
        return Ok(chol.unpack());
    }
    let eig = HermitianEigen::new(c.as_matrix()).map_err(|_| Error::CholeskyFailure)?;
    let floor = 1e-12 * eig.largest().abs();
    let mut factor = eig.vectors.clone();
    for (k, &l) in eig.values.iter().enumerate() {
        if l < -1e-9 * eig.largest().abs().max(1.0) {
            return Err(Error::NotPsd);
        }
        let s = if l > floor { l.sqrt() } else { 0.0 };
        factor.column_mut(k).scale_mut(s);
    }
    Ok(factor)
}

/// One sample `L z`.
pub fn draw<R: Rng + ?Sized>(factor: &DMatrix<C64>, rng: &mut R, out: &mut [C64]) {
    let n = factor.nrows();
    let z: Vec<C64> = (0..factor.ncols()).map(|_| complex_normal(rng)).collect();
    for (i, o) in out.iter_mut().enumerate().take(n) {
        *o = (0..z.len()).map(|k| factor[(i, k)] * z[k]).sum();
    }
}

/// `m` independent samples with coherence `c`.
pub fn sample_ensemble(c: &CoherenceMatrix, m: usize, seed: u64) -> Result<PixelEnsemble> {
    let factor = covariance_factor(c)?;
    let n = c.n();
    let mut rng = substream(seed, &[]);
    let mut data = vec![C64::new(0.0, 0.0); n * m];
    for chunk in data.chunks_exact_mut(n) {
        draw(&factor, &mut rng, chunk);
    }
    PixelEnsemble::new(n, data)
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    pub fn area(&self) -> usize {
        self.x1.saturating_sub(self.x0) * self.y1.saturating_sub(self.y0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub rect: Rect,
    pub covariance: CovarianceSpec,
    /// Mean backscatter amplitude.
    #[serde(default = "one")]
    pub intensity: f64,
    /// Log-amplitude range of the per-acquisition brightness profile shared by
    /// all pixels of the region. Zero keeps every acquisition equally bright.
    #[serde(default)]
    pub amplitude_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub n_acquisitions: usize,
    pub regions: Vec<Region>,
    pub seed: u64,
}

impl SceneSpec {
    /// Demonstration scene of three vertical strips, left to right: white
    /// noise, exponential decorrelation (γ₀ = 0.8, τ = 3) and a near-rank-one
    /// scatterer (ε = 0.02). Brighter strips sit further right, and every strip
    /// has a log-amplitude spread of 6 so the amplitude test can tell them apart.
    pub fn three_strips(width: usize, height: usize, n: usize, seed: u64) -> Self {
        let phases: Vec<f64> = (0..n).map(|k| 0.4 * k as f64 + (0.7 * k as f64).sin()).collect();
        let third = width / 3;
        let strip = |name: &str, x0, x1, covariance, intensity: f64| Region {
            name: name.into(),
            rect: Rect { x0, y0: 0, x1, y1: height },
            covariance,
            intensity,
            amplitude_spread: 6.0,
        };
        Self {
            width,
            height,
            n_acquisitions: n,
            seed,
            regions: vec![
                strip("noise", 0, third, CovarianceSpec::pure_noise(n), 1.0),
                strip(
                    "decorrelated",
                    third,
                    2 * third,
                    CovarianceSpec::exp_decorrelation(phases.clone(), 0.8, 3.0),
                    6f64.exp(),
                ),
                strip("stable", 2 * third, width, CovarianceSpec::rank_one(phases, 0.02), 12f64.exp()),
            ],
        }
    }

    fn region_map(&self) -> Result<Vec<usize>> {
        let mut owner = vec![usize::MAX; self.width * self.height];
        for (r, region) in self.regions.iter().enumerate() {
            let rect = region.rect;
            if rect.x1 > self.width || rect.y1 > self.height {
                return Err(Error::RegionGapOrOverlap);
            }
            if region.covariance.n != self.n_acquisitions {
                return Err(Error::DimensionMismatch {
                    expected: self.n_acquisitions,
                    got: region.covariance.n,
                });
            }
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    let slot = &mut owner[y * self.width + x];
                    if *slot != usize::MAX {
                        return Err(Error::RegionGapOrOverlap);
                    }
                    *slot = r;
                }
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::RegionGapOrOverlap);
        }
        Ok(owner)
    }
}

/// True phase history of one scene region.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub region: String,
    pub kind: CovarianceKind,
    pub rect: Rect,
    pub phases: Vec<f64>,
}

fn brightness_profile(seed: u64, region: usize, n: usize, spread: f64) -> Vec<f64> {
    let mut rng = substream(seed, &[u64::MAX, region as u64]);
    (0..n).map(|_| (spread * (rng.random::<f64>() - 0.5)).exp()).collect()
}

/// Draws one independent vector per pixel from its region's covariance.
pub fn render_scene(spec: &SceneSpec) -> Result<(SlcStack, Vec<GroundTruth>)> {
    let owner = spec.region_map()?;
    let n = spec.n_acquisitions;
    let (w, h) = (spec.width, spec.height);
    let factors = spec
        .regions
        .iter()
        .map(|r| covariance_factor(&build_covariance(&r.covariance)?))
        .collect::<Result<Vec<_>>>()?;
    let gains: Vec<Vec<f64>> = spec
        .regions
        .iter()
        .enumerate()
        .map(|(k, r)| {
            brightness_profile(spec.seed, k, n, r.amplitude_spread)
                .into_iter()
                .map(|g| g * r.intensity)
                .collect()
        })
        .collect();

    // Pixel-interleaved first, transposed to bands below.
    let mut pixels = vec![C64::new(0.0, 0.0); w * h * n];
    pixels.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        for (x, out) in row.chunks_exact_mut(n).enumerate() {
            let r = owner[y * w + x];
            let mut rng = substream(spec.seed, &[x as u64, y as u64]);
            draw(&factors[r], &mut rng, out);
            for (o, g) in out.iter_mut().zip(&gains[r]) {
                *o *= *g;
            }
        }
    });
    let mut bands = vec![nalgebra::Complex::new(0.0f32, 0.0); w * h * n];
    for (p, v) in pixels.chunks_exact(n).enumerate() {
        for (k, z) in v.iter().enumerate() {
            bands[k * w * h + p] = nalgebra::Complex::new(z.re as f32, z.im as f32);
        }
    }
    let stack = SlcStack::new(w, h, n, bands)?;
    let truth = spec
        .regions
        .iter()
        .map(|r| GroundTruth {
            region: r.name.clone(),
            kind: r.covariance.kind,
            rect: r.rect,
            phases: r.covariance.phases(),
        })
        .collect();
    Ok((stack, truth))
}
