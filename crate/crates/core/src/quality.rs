//! Goodness-of-fit and ambiguity coefficients.
//!
//! A linked result is scored by first normalizing its objective value into
//! `[0, 1]` with method-specific bounds,
//!
//! ```text
//! F = (f - f_min) / (f_max - f_min)
//! ```
//!
//! and then removing the value expected for pure noise,
//! `gamma_gof = max((F - F_noise) / (1 - F_noise), 0)`.
//!
//! | method | `f`                        | `f_max`              | `f_min`                     |
//! |--------|----------------------------|----------------------|-----------------------------|
//! | PT     | `sum W_ij cos(...)`        | `sum_{i<j} |W_ij|`   | 0                           |
//! | ED-CW  | `lambda_max(C)`            | `N`                  | 1                           |
//! | ED-EW  | `lambda_max(Phi)`          | `N` (or `sum |l_i|`) | 1                           |
//! | ED-ML  | `lambda_max(-G^-1 (.) C)`  | -1                   | `tr(-G^-1 (.) C) / N`       |

use nalgebra::{Cholesky, DMatrix};

use crate::coherence::{CoherenceMatrix, PhaseMagnitude};
use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, hermitian_eigenvalues, C64};
use crate::linking::{pt_objective, LinkingResult};
use crate::method::{Method, MethodClass, WeightScheme};
use crate::noisefloor::NoiseFloorModel;
use crate::weights::{build_weights, WeightMatrix};

/// Achieved objective and its theoretical range for one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBounds {
    pub f: f64,
    pub f_max: f64,
    pub f_min: f64,
    pub method: Method,
}

impl ObjectiveBounds {
    pub fn new(method: Method, f: f64, f_max: f64, f_min: f64) -> Result<Self> {
        if !(f_max - f_min >= 1e-12) {
            return Err(Error::DegenerateBounds { f_max, f_min });
        }
        Ok(Self { f, f_max, f_min, method })
    }

    /// Same bounds, different achieved value.
    pub fn with_objective(&self, f: f64) -> Self {
        Self { f, ..*self }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BoundsOptions {
    /// ED-EW: use `sum |lambda_i(Phi)|` instead of `N` as upper bound.
    pub ew_abs_eigen_bound: bool,
}

/// Bounds for `method` given the achieved objective `f`.
pub fn objective_bounds(
    method: Method,
    pair: &PhaseMagnitude,
    w: &WeightMatrix,
    f: f64,
    opts: BoundsOptions,
) -> Result<ObjectiveBounds> {
    let n = pair.n() as f64;
    let (f_max, f_min) = match (method.class, method.scheme) {
        (MethodClass::Pt, _) => (w.off_diagonal_abs_sum(), 0.0),
        (MethodClass::Ed, WeightScheme::Cw) => (n, 1.0),
        (MethodClass::Ed, WeightScheme::Ew) => {
            let f_max = if opts.ew_abs_eigen_bound {
                hermitian_eigenvalues(pair.phasors())?.iter().map(|l| l.abs()).sum()
            } else {
                n
            };
            (f_max, 1.0)
        }
        (MethodClass::Ed, WeightScheme::Ml) => {
            let trace: f64 = (0..pair.n()).map(|i| w.get(i, i)).sum();
            (-1.0, trace / n)
        }
        (MethodClass::Ed, WeightScheme::Custom) => {
            return Err(Error::UnsupportedBounds(method.to_string()));
        }
    };
    ObjectiveBounds::new(method, f, f_max, f_min)
}

fn clamp_unit(x: f64, what: &str) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        log::debug!("{what} {x} clamped to [0, 1]");
    }
    x.clamp(0.0, 1.0)
}

/// `F = (f - f_min) / (f_max - f_min)`, clamped to `[0, 1]`.
pub fn normalized_fit(bounds: &ObjectiveBounds) -> f64 {
    clamp_unit((bounds.f - bounds.f_min) / (bounds.f_max - bounds.f_min), "normalized fit")
}

/// `max((F - F_noise) / (1 - F_noise), 0)`.
pub fn gamma_gof(fit: f64, noise_floor: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&noise_floor) {
        return Err(Error::InvalidNoiseFloor(noise_floor));
    }
    Ok(((fit - noise_floor) / (1.0 - noise_floor)).clamp(0.0, 1.0))
}

fn log_det_and_factor(m: &DMatrix<C64>) -> Option<(f64, Cholesky<C64, nalgebra::Dyn>)> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let log_det = 2.0 * (0..m.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    log_det.is_finite().then_some((log_det, chol))
}

/// Wishart goodness of fit
/// `det(C) / det(S) * exp(N - tr(S^-1 C))` with
/// `S = Lambda(theta) Gamma Lambda(theta)^H`, evaluated in log space.
///
/// `c` and `pair` should describe the same (regularized) coherence matrix.
pub fn gamma_gof_wishart(c: &CoherenceMatrix, pair: &PhaseMagnitude, theta: &[f64]) -> Result<f64> {
    let n = c.n();
    if pair.n() != n || theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta.len().min(pair.n()),
        });
    }
    let gamma = pair.magnitudes();
    let sigma = DMatrix::from_fn(n, n, |i, j| C64::from_polar(gamma[(i, j)], theta[i] - theta[j]));
    let (log_det_sigma, chol) = log_det_and_factor(&sigma).ok_or(Error::SingularSigma)?;
    let Some((log_det_c, _)) = log_det_and_factor(c.as_matrix()) else {
        // det(C) = 0
        return Ok(0.0);
    };
    let solved = chol.solve(c.as_matrix());
    let trace: f64 = (0..n).map(|i| solved[(i, i)].re).sum();
    let log_value = log_det_c - log_det_sigma + n as f64 - trace;
    Ok(clamp_unit(log_value.exp(), "Wishart goodness of fit"))
}

/// Which relative difference defines the ambiguity coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbiguityVariant {
    /// `(gof1 - gof2) / gof1`
    GofBased,
    /// `(f1 - f2) / f1`
    ObjectiveBased,
}

impl AmbiguityVariant {
    /// GOF-based for ML weights, objective-based otherwise.
    pub fn default_for(scheme: WeightScheme) -> Self {
        match scheme {
            WeightScheme::Ml => AmbiguityVariant::GofBased,
            _ => AmbiguityVariant::ObjectiveBased,
        }
    }
}

/// Relative gap between primary and secondary solutions, clamped to `[0, 1]`.
///
/// `bounds1` and `bounds2` carry the primary and secondary objective values.
pub fn gamma_ambiguity(
    result: &LinkingResult,
    bounds1: &ObjectiveBounds,
    bounds2: &ObjectiveBounds,
    variant: AmbiguityVariant,
    noise_floor: f64,
) -> Result<f64> {
    if result.secondary.is_none() || result.objective_secondary.is_none() {
        return Err(Error::MissingSecondary);
    }
    let (first, second) = match variant {
        AmbiguityVariant::GofBased => (
            gamma_gof(normalized_fit(bounds1), noise_floor)?,
            gamma_gof(normalized_fit(bounds2), noise_floor)?,
        ),
        AmbiguityVariant::ObjectiveBased => (bounds1.f, bounds2.f),
    };
    if first == 0.0 {
        return Err(Error::UndefinedAmbiguity);
    }
    let value = (first - second) / first;
    // A secondary objective below zero (rank-one EW gives -N/2) pushes the gap past 1.
    if !(0.0..=1.0).contains(&value) {
        log::debug!("ambiguity {value} clamped to the unit interval");
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Literature goodness-of-fit indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegacyIndicators {
    /// Mean residual cosine, `2 / (N^2 - N) sum_{i<j} cos(...)`.
    pub pta: f64,
    /// Coherence-weighted mean residual cosine.
    pub pta_weighted: f64,
    /// Smallest eigenvalue of `Gamma^-1 (.) C`.
    pub lambda_emi: f64,
}

pub fn legacy_indicators(pair: &PhaseMagnitude, theta: &[f64]) -> Result<LegacyIndicators> {
    let n = pair.n();
    let ew = build_weights(WeightScheme::Ew, pair, None)?;
    let cw = build_weights(WeightScheme::Cw, pair, None)?;
    let pta = pt_objective(pair, &ew, theta)? * 2.0 / ((n * n - n) as f64);
    let cw_sum = cw.off_diagonal_abs_sum();
    let pta_weighted = if cw_sum > 0.0 {
        pt_objective(pair, &cw, theta)? / cw_sum
    } else {
        0.0
    };
    let inv = guarded_inverse(pair.magnitudes()).ok_or(Error::SingularMagnitudeMatrix)?;
    let c = pair.coherence();
    let m = c.as_matrix().zip_map(&inv, |z, g| z * g);
    let lambda_emi = *hermitian_eigenvalues(&m)?.last().expect("n >= 2");
    Ok(LegacyIndicators {
        pta,
        pta_weighted,
        lambda_emi,
    })
}

/// Flags attached to a [`QualityReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QualityFlags {
    pub degenerate: bool,
    pub not_converged: bool,
    pub rejected: bool,
}

/// All coefficients of one pixel and method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub gamma_cp: f64,
    /// Normalized fit before noise-floor correction.
    pub fit: f64,
    pub gamma_gof: f64,
    pub gamma_gof_wishart: Option<f64>,
    /// `None` when no secondary is available or the ratio is undefined.
    pub gamma_amb: Option<f64>,
    pub flags: QualityFlags,
}

impl QualityReport {
    pub fn rejected() -> Self {
        Self {
            gamma_cp: 0.0,
            fit: 0.0,
            gamma_gof: 0.0,
            gamma_gof_wishart: None,
            gamma_amb: None,
            flags: QualityFlags {
                rejected: true,
                ..Default::default()
            },
        }
    }
}

/// Scores a linking result.
///
/// `gamma_cp` is supplied by the caller since it does not depend on the
/// method. The Wishart variant is only computed for ML weights.
pub fn assess(
    method: Method,
    c: &CoherenceMatrix,
    pair: &PhaseMagnitude,
    w: &WeightMatrix,
    result: &LinkingResult,
    noise: &NoiseFloorModel,
    gamma_cp: f64,
) -> Result<QualityReport> {
    let bounds = objective_bounds(method, pair, w, result.objective_primary, BoundsOptions::default())?;
    let noise_floor = noise.evaluate(pair.n());
    let fit = normalized_fit(&bounds);
    let gof = gamma_gof(fit, noise_floor)?;
    let wishart = if method.scheme == WeightScheme::Ml {
        Some(gamma_gof_wishart(c, pair, result.primary.phases())?)
    } else {
        None
    };
    let gamma_amb = match result.objective_secondary {
        Some(f2) => {
            let variant = AmbiguityVariant::default_for(method.scheme);
            match gamma_ambiguity(result, &bounds, &bounds.with_objective(f2), variant, noise_floor) {
                Ok(v) => Some(v),
                Err(Error::UndefinedAmbiguity) => None,
                Err(e) => return Err(e),
            }
        }
        None => None,
    };
    Ok(QualityReport {
        gamma_cp,
        fit,
        gamma_gof: gof,
        gamma_gof_wishart: wishart,
        gamma_amb,
        flags: QualityFlags {
            degenerate: result.degenerate,
            not_converged: !result.converged,
            rejected: false,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::decompose;
    use crate::linking::ed_link;
    use crate::phase::phasors;

    const PT_EW: Method = Method::new(MethodClass::Pt, WeightScheme::Ew);
    const ED_CW: Method = Method::new(MethodClass::Ed, WeightScheme::Cw);
    const ED_ML: Method = Method::new(MethodClass::Ed, WeightScheme::Ml);

    fn rank_one(theta: &[f64]) -> CoherenceMatrix {
        let v = phasors(theta);
        CoherenceMatrix::new(&v * v.adjoint()).unwrap()
    }

    #[test]
    fn normalized_fit_endpoints() {
        let b = ObjectiveBounds::new(PT_EW, 3.0, 3.0, 0.0).unwrap();
        assert_eq!(normalized_fit(&b), 1.0);
        assert_eq!(normalized_fit(&b.with_objective(0.0)), 0.0);
        assert!((normalized_fit(&b.with_objective(1.8)) - 0.6).abs() < 1e-15);
        assert_eq!(normalized_fit(&b.with_objective(3.5)), 1.0);
        assert!(matches!(
            ObjectiveBounds::new(ED_ML, -1.0, -1.0, -1.0),
            Err(Error::DegenerateBounds { .. })
        ));
    }

    #[test]
    fn gof_arithmetic() {
        assert_eq!(gamma_gof(1.0, 0.3).unwrap(), 1.0);
        assert_eq!(gamma_gof(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(gamma_gof(0.1, 0.3).unwrap(), 0.0);
        // (0.6 - 0.36203) / (1 - 0.36203)
        let g = gamma_gof(0.6, 0.36203).unwrap();
        assert!((g - 0.373011).abs() < 5e-6, "{g}");
        assert!(matches!(gamma_gof(0.5, 1.0), Err(Error::InvalidNoiseFloor(_))));
    }

    #[test]
    fn ed_bounds_on_rank_one() {
        let c = rank_one(&[0.0, 0.4, -1.3, 2.2]);
        let pair = decompose(&c);
        let w = build_weights(WeightScheme::Cw, &pair, None).unwrap();
        let r = ed_link(&pair, &w, 0, false).unwrap();
        let b = objective_bounds(ED_CW, &pair, &w, r.objective_primary, BoundsOptions::default()).unwrap();
        assert!((b.f - 4.0).abs() < 1e-12);
        assert_eq!((b.f_max, b.f_min), (4.0, 1.0));
    }

    #[test]
    fn ed_ml_identity_is_degenerate() {
        let pair = decompose(&CoherenceMatrix::identity(4));
        let w = build_weights(WeightScheme::Ml, &pair, None).unwrap();
        assert!(matches!(
            objective_bounds(ED_ML, &pair, &w, -1.0, BoundsOptions::default()),
            Err(Error::DegenerateBounds { f_max, f_min }) if f_max == -1.0 && f_min == -1.0
        ));
    }

    #[test]
    fn wishart_is_one_at_exact_model() {
        let theta = [0.0, 1.0, -0.5];
        let v = phasors(&theta);
        let gamma = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.6 });
        let m = DMatrix::from_fn(3, 3, |i, j| v[i] * v[j].conj() * gamma[(i, j)]);
        let c = CoherenceMatrix::new(m).unwrap();
        let pair = decompose(&c);
        let g = gamma_gof_wishart(&c, &pair, &theta).unwrap();
        assert!((g - 1.0).abs() < 1e-12, "{g}");
    }

    #[test]
    fn wishart_two_by_two_closed_form() {
        // Gamma off-diagonal 0.5, phase mismatch pi.
        let c = CoherenceMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(1.0, 0.0)],
        ))
        .unwrap();
        let pair = decompose(&c);
        let theta = [std::f64::consts::PI, 0.0];
        // S = [[1, -0.5], [-0.5, 1]], det S = det C = 0.75,
        // S^-1 = [[1, 0.5], [0.5, 1]] / 0.75, tr(S^-1 C) = (1 + 0.25 + 0.25 + 1) / 0.75
        let trace: f64 = 2.5 / 0.75;
        let expected = (2.0 - trace).exp();
        let g = gamma_gof_wishart(&c, &pair, &theta).unwrap();
        assert!((g - expected).abs() < 1e-12, "{g} vs {expected}");
    }

    #[test]
    fn ambiguity_variants() {
        let c = rank_one(&[0.0, 0.3, 0.9]);
        let pair = decompose(&c);
        let w = build_weights(WeightScheme::Cw, &pair, None).unwrap();
        let mut r = ed_link(&pair, &w, 0, true).unwrap();
        let b = ObjectiveBounds::new(ED_CW, 2.0, 3.0, 1.0).unwrap();
        assert_eq!(
            gamma_ambiguity(&r, &b, &b, AmbiguityVariant::ObjectiveBased, 0.0).unwrap(),
            0.0
        );
        assert_eq!(
            gamma_ambiguity(&r, &b, &b.with_objective(0.0), AmbiguityVariant::ObjectiveBased, 0.0).unwrap(),
            1.0
        );
        assert_eq!(
            gamma_ambiguity(&r, &b, &b.with_objective(-1.5), AmbiguityVariant::ObjectiveBased, 0.0).unwrap(),
            1.0
        );
        let zero = b.with_objective(0.0);
        assert!(matches!(
            gamma_ambiguity(&r, &zero, &zero, AmbiguityVariant::ObjectiveBased, 0.0),
            Err(Error::UndefinedAmbiguity)
        ));
        r.secondary = None;
        assert!(matches!(
            gamma_ambiguity(&r, &b, &b, AmbiguityVariant::GofBased, 0.0),
            Err(Error::MissingSecondary)
        ));
    }

    #[test]
    fn legacy_on_rank_one() {
        let theta = [0.0, 0.3, -2.0, 1.0];
        let c = rank_one(&theta);
        let mut m = c.as_matrix().clone();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m[(i, j)] *= 0.7;
                }
            }
        }
        let pair = decompose(&CoherenceMatrix::new(m).unwrap());
        let l = legacy_indicators(&pair, &theta).unwrap();
        assert!((l.pta - 1.0).abs() < 1e-12);
        assert!((l.pta_weighted - 1.0).abs() < 1e-12);
        assert!(l.lambda_emi >= 1.0 - 1e-9);
    }
}
