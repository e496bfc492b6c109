//! Phase linking for distributed-scatterer InSAR time series, with
//! goodness-of-fit, closure and ambiguity coefficients.
//!
//! ```
//! use phaselink::{decompose, closure_coefficient, CoherenceMatrix};
//!
//! let c = CoherenceMatrix::identity(4);
//! let pair = decompose(&c);
//! assert_eq!(closure_coefficient(&pair).unwrap(), 1.0);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod error;
pub mod linalg;
pub mod linking;
pub mod method;
pub mod noisefloor;
pub mod phase;
pub mod pipeline;
pub mod quality;
pub mod random;
pub mod shp;
pub mod simulator;
pub mod stack;
pub mod weights;

pub use coherence::{
    closure_coefficient, closure_mean, closure_phase, decompose, estimate_coherence, rank_one_extract, regularize,
    CoherenceMatrix, PhaseMagnitude, PixelEnsemble, RankOne,
};
pub use error::{Error, Result};
pub use linking::{link, LinkOptions, LinkingResult};
pub use method::{Method, MethodClass, WeightScheme};
pub use noisefloor::{builtin_model, builtin_models, fit_rational, simulate_noise_points, NoiseFloorModel, NoisePoint, NoiseRunConfig};
pub use phase::PhaseHistory;
pub use pipeline::{process_stack, RunConfig, RunOutputs};
pub use quality::{gamma_gof, normalized_fit, objective_bounds, QualityReport};
pub use shp::{kuiper_homogeneous, Connectivity};
pub use simulator::{build_covariance, render_scene, sample_ensemble, CovarianceKind, CovarianceSpec, Region, SceneSpec};
pub use stack::SlcStack;
pub use weights::{build_weights, Mask, WeightMatrix};
