//! Statistically homogeneous pixels.
//!
//! Two pixels are homogeneous when the two-sample Kuiper test does not
//! distinguish their amplitude time series. The homogeneous neighbourhood of
//! a pixel is the connected set of homogeneous pixels around it within a
//! square window.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::coherence::PixelEnsemble;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::stack::SlcStack;

/// `V = D+ + D-` between the empirical CDFs of two sorted samples.
pub fn kuiper_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let d = i as f64 / na - j as f64 / nb;
        d_plus = d_plus.max(d);
        d_minus = d_minus.max(-d);
    }
    Ok(d_plus + d_minus)
}

/// Asymptotic tail probability
/// `Q(l) = 2 sum_j (4 j^2 l^2 - 1) exp(-2 j^2 l^2)`.
pub fn kuiper_q(lambda: f64) -> f64 {
    if lambda < 0.4 {
        return 1.0;
    }
    let l2 = lambda * lambda;
    let mut sum = 0.0;
    for j in 1..=100 {
        let j2 = (j * j) as f64;
        let term = (4.0 * j2 * l2 - 1.0) * (-2.0 * j2 * l2).exp();
        sum += term;
        if term.abs() <= 1e-12 * sum.abs() {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value of `v` for samples of sizes `n1` and `n2`.
pub fn kuiper_pvalue(v: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let s = ne.sqrt();
    kuiper_q((s + 0.155 + 0.24 / s) * v)
}

/// Whether `a` and `b` (any order) pass the Kuiper test at level `alpha`.
pub fn kuiper_homogeneous(a: &[f64], b: &[f64], alpha: f64) -> Result<bool> {
    let sorted = |x: &[f64]| {
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let v = kuiper_statistic(&sorted(a), &sorted(b))?;
    Ok(kuiper_pvalue(v, a.len(), b.len()) > alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShpConfig {
    /// Odd window side length.
    pub window: usize,
    pub alpha: f64,
    pub connectivity: Connectivity,
}

/// Sorted amplitude series of every pixel, for repeated testing.
///
/// All series have the same length `N`, so the Kuiper statistic is a count
/// difference `k / N` and the test reduces to a table lookup on `k`.
pub struct AmplitudeIndex {
    width: usize,
    height: usize,
    n: usize,
    sorted: Vec<f32>,
    accept: Vec<bool>,
}

impl AmplitudeIndex {
    pub fn new(stack: &SlcStack, alpha: f64) -> Self {
        let (w, h, n) = (stack.width(), stack.height(), stack.n_acquisitions());
        let mut sorted = vec![0.0f32; w * h * n];
        for (p, series) in sorted.chunks_exact_mut(n).enumerate() {
            for (k, s) in series.iter_mut().enumerate() {
                *s = stack.band(k)[p].norm();
            }
            series.sort_by(f32::total_cmp);
        }
        let accept = (0..=2 * n).map(|k| kuiper_pvalue(k as f64 / n as f64, n, n) > alpha).collect();
        Self {
            width: w,
            height: h,
            n,
            sorted,
            accept,
        }
    }

    fn series(&self, x: usize, y: usize) -> &[f32] {
        let p = y * self.width + x;
        &self.sorted[p * self.n..(p + 1) * self.n]
    }

    /// Same decision as [`kuiper_homogeneous`] on the two amplitude series.
    pub fn homogeneous(&self, p: (usize, usize), q: (usize, usize)) -> bool {
        let (a, b) = (self.series(p.0, p.1), self.series(q.0, q.1));
        let n = self.n;
        let (mut i, mut j) = (0, 0);
        let (mut d_plus, mut d_minus) = (0isize, 0isize);
        while i < n && j < n {
            let x = if a[i] < b[j] { a[i] } else { b[j] };
            while i < n && a[i] <= x {
                i += 1;
            }
            while j < n && b[j] <= x {
                j += 1;
            }
            let d = i as isize - j as isize;
            d_plus = d_plus.max(d);
            d_minus = d_minus.max(-d);
        }
        self.accept[(d_plus + d_minus) as usize]
    }

    /// Homogeneous pixels connected to `(x, y)` within the window, center
    /// first, then in breadth-first order.
    pub fn neighbourhood(&self, x: usize, y: usize, cfg: &ShpConfig) -> Vec<(usize, usize)> {
        let r = (cfg.window / 2) as isize;
        let side = 2 * r as usize + 1;
        // 0 untested, 1 homogeneous, 2 rejected or outside
        let mut state = vec![0u8; side * side];
        let local = |dx: isize, dy: isize| ((dy + r) as usize) * side + (dx + r) as usize;
        state[local(0, 0)] = 1;
        let mut kept = vec![(x, y)];
        let mut queue = VecDeque::from([(0isize, 0isize)]);
        while let Some((cx, cy)) = queue.pop_front() {
            for &(ox, oy) in cfg.connectivity.offsets() {
                let (dx, dy) = (cx + ox, cy + oy);
                if dx.abs() > r || dy.abs() > r {
                    continue;
                }
                let slot = local(dx, dy);
                if state[slot] != 0 {
                    continue;
                }
                let (px, py) = (x as isize + dx, y as isize + dy);
                if px < 0 || py < 0 || px >= self.width as isize || py >= self.height as isize {
                    state[slot] = 2;
                    continue;
                }
                let q = (px as usize, py as usize);
                if self.homogeneous((x, y), q) {
                    state[slot] = 1;
                    kept.push(q);
                    queue.push_back((dx, dy));
                } else {
                    state[slot] = 2;
                }
            }
        }
        kept
    }
}

/// Ensemble of the homogeneous neighbourhood of `(x, y)`.
pub fn shp_neighborhood(stack: &SlcStack, x: usize, y: usize, cfg: &ShpConfig) -> Result<PixelEnsemble> {
    if x >= stack.width() || y >= stack.height() {
        return Err(Error::IndexOutOfRange {
            index: y * stack.width() + x,
            len: stack.width() * stack.height(),
        });
    }
    let index = AmplitudeIndex::new(stack, cfg.alpha);
    gather(stack, &index.neighbourhood(x, y, cfg))
}

pub(crate) fn gather(stack: &SlcStack, pixels: &[(usize, usize)]) -> Result<PixelEnsemble> {
    let n = stack.n_acquisitions();
    let mut data = vec![C64::new(0.0, 0.0); n * pixels.len()];
    for (chunk, &(x, y)) in data.chunks_exact_mut(n).zip(pixels) {
        stack.pixel(x, y, chunk);
    }
    PixelEnsemble::new(n, data)
}
