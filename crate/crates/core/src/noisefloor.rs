//! Expected normalized fit of pure noise.
//!
//! `F_noise(N)` is the value of the normalized fit reached on coherence
//! matrices estimated from complex white noise. It has no closed form, so it
//! is estimated by Monte Carlo and summarized by the rational model
//! `(a N + b) / (N + c)`.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::coherence::{decompose, estimate_coherence, regularize, PhaseMagnitude, PixelEnsemble};
use crate::error::{Error, Result};
use crate::linking::{link, LinkOptions};
use crate::method::{Method, MethodClass, WeightScheme};
use crate::quality::{normalized_fit, objective_bounds, BoundsOptions};
use crate::random::{complex_normal, substream};
use crate::stack::csv_error;
use crate::weights::build_weights;

/// `F_noise(N) = (a N + b) / (N + c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloorModel {
    pub method: Method,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// RMSE of the fit divided by the range of the fitted values.
    pub nrmse: f64,
}

impl NoiseFloorModel {
    pub fn evaluate(&self, n: usize) -> f64 {
        self.evaluate_at(n as f64)
    }

    pub fn evaluate_at(&self, n: f64) -> f64 {
        (self.a * n + self.b) / (n + self.c)
    }
}

const fn model(class: MethodClass, scheme: WeightScheme, a: f64, b: f64, c: f64, nrmse: f64) -> NoiseFloorModel {
    NoiseFloorModel {
        method: Method::new(class, scheme),
        a,
        b,
        c,
        nrmse,
    }
}

const BUILTIN: [NoiseFloorModel; 6] = [
    model(MethodClass::Pt, WeightScheme::Ew, 0.0925, 11.138, 16.000, 3.88e-3),
    model(MethodClass::Pt, WeightScheme::Cw, 0.1041, 12.236, 16.419, 3.88e-3),
    model(MethodClass::Pt, WeightScheme::Ml, 0.1422, 12.758, 13.920, 5.41e-3),
    model(MethodClass::Ed, WeightScheme::Ew, 0.1040, 13.409, 18.470, 3.13e-3),
    model(MethodClass::Ed, WeightScheme::Cw, 0.00139, 0.1811, 23.022, 4.48e-2),
    model(MethodClass::Ed, WeightScheme::Ml, 0.3357, 5.163, 0.7670, 4.02e-2),
];

/// Published fitted models for the six standard methods.
pub fn builtin_models() -> &'static [NoiseFloorModel] {
    &BUILTIN
}

pub fn builtin_model(method: Method) -> Result<NoiseFloorModel> {
    BUILTIN
        .iter()
        .find(|m| m.method == method)
        .copied()
        .ok_or_else(|| Error::UnknownMethodScheme(method.to_string()))
}

/// Published Monte-Carlo estimates, columns in [`Method::ALL`] order.
#[allow(clippy::excessive_precision)]
const PUBLISHED: [(usize, [f64; 6]); 16] = [
    (20, [0.36203085048416384, 0.393922394021862, 0.46128488803671436, 0.40355575655330245, 0.004864235011846181, 0.5672276185089877]),
    (25, [0.32681219194499717, 0.3582914911199989, 0.4180166309853861, 0.36774879125499405, 0.004533218053495464, 0.5297460398967515]),
    (30, [0.30168663309337956, 0.3296602869459862, 0.38690313779893176, 0.3400174483487997, 0.004186658272931017, 0.5014405837707655]),
    (35, [0.2811594176945775, 0.3077925698684361, 0.36113998492881816, 0.31821686881818245, 0.003887040688573957, 0.47766020153068317]),
    (40, [0.2646932066031853, 0.2897950261747799, 0.34037866321522375, 0.3001880346783213, 0.0036110961842958852, 0.4576468977743239]),
    (45, [0.2513702670837292, 0.27632924698004097, 0.3273439286215243, 0.2853139880532267, 0.003821294519020041, 0.44404122986660405]),
    (50, [0.2392673029326324, 0.26341346291440354, 0.3116586315854836, 0.27244146462642804, 0.003515508478071782, 0.42876618613051376]),
    (55, [0.22928000448990984, 0.25218662896543437, 0.2995067408002227, 0.26094509169793956, 0.003249608138161466, 0.41573471767023246]),
    (60, [0.21985659198660842, 0.2421007588228267, 0.287532928958254, 0.2503664099655835, 0.0030391230731422495, 0.4060162873438819]),
    (65, [0.2123627874378205, 0.2342306939786766, 0.27973603695874555, 0.24247737112175638, 0.0031435085367062373, 0.4015849998667952]),
    (70, [0.2051533893411089, 0.22612188808868078, 0.27074074654029584, 0.234102868467669, 0.0029264979363999685, 0.39391500618664244]),
    (75, [0.19917868898947447, 0.2199660061895822, 0.2645999473547898, 0.22744525847061836, 0.0030257487536871986, 0.4046416263233184]),
    (80, [0.19323936962545915, 0.21321160957816798, 0.25663554638184144, 0.220856306448698, 0.002814046663637062, 0.4015960021439374]),
    (85, [0.18809921908412772, 0.20806182248015034, 0.25191545506442914, 0.21516141370952538, 0.0029182213729055037, 0.4100052930937475]),
    (90, [0.18294329034864407, 0.20255591818769011, 0.24514631029033887, 0.20937864090914626, 0.002702591181287127, 0.39610648904471335]),
    (95, [0.1783199747078384, 0.197184544101028, 0.23903302756572847, 0.20408022415329008, 0.0025338953180491413, 0.3824467598355502]),
];

/// Published `F_noise` estimates for `N = 20, 25, ..., 95`.
pub fn published_points(method: Method) -> Result<Vec<NoisePoint>> {
    let col = Method::ALL
        .iter()
        .position(|&m| m == method)
        .ok_or_else(|| Error::UnknownMethodScheme(method.to_string()))?;
    Ok(PUBLISHED
        .iter()
        .map(|&(n, row)| NoisePoint {
            method,
            n,
            mean_f: row[col],
            stderr: 0.0,
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct NoiseRunConfig {
    pub stack_sizes: Vec<usize>,
    /// Samples per coherence estimate, `M`.
    pub ensemble_size: usize,
    /// Independent ensembles per stack size, `K`.
    pub n_ensembles: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub beta: f64,
}

impl Default for NoiseRunConfig {
    fn default() -> Self {
        Self {
            stack_sizes: (20..=95).step_by(5).collect(),
            ensemble_size: 10_000,
            n_ensembles: 200,
            seed: 0,
            methods: Method::ALL.to_vec(),
            beta: 1e-4,
        }
    }
}

impl NoiseRunConfig {
    fn validate(&self) -> Result<()> {
        let max_n = self.stack_sizes.iter().copied().max().unwrap_or(0);
        if self.stack_sizes.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidConfig("no stack sizes or methods".into()));
        }
        if let Some(&n) = self.stack_sizes.iter().find(|&&n| n < 3) {
            return Err(Error::TooFewAcquisitions { needed: 3, got: n });
        }
        if self.ensemble_size <= max_n {
            return Err(Error::InvalidConfig(format!(
                "ensemble size {} must exceed the largest stack size {max_n}",
                self.ensemble_size
            )));
        }
        if self.n_ensembles == 0 {
            return Err(Error::InvalidConfig("at least one ensemble is required".into()));
        }
        if self.n_ensembles < 30 {
            log::warn!("{} ensembles give unreliable standard errors", self.n_ensembles);
        }
        if let Some(&m) = self.methods.iter().find(|m| m.scheme == WeightScheme::Custom) {
            return Err(Error::UnknownMethodScheme(m.to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePoint {
    pub method: Method,
    pub n: usize,
    pub mean_f: f64,
    pub stderr: f64,
}

/// Normalized fit of `method` on one (regularized) coherence matrix.
pub fn method_fit(method: Method, pair: &PhaseMagnitude) -> Result<f64> {
    let w = build_weights(method.scheme, pair, None)?;
    let result = link(method, pair, &w, 0, &LinkOptions::default())?;
    if !result.converged {
        log::debug!("{method} did not converge, using best iterate");
    }
    let bounds = objective_bounds(method, pair, &w, result.objective_primary, BoundsOptions::default())?;
    Ok(normalized_fit(&bounds))
}

fn noise_ensemble(n: usize, m: usize, seed: u64, e: usize) -> Result<PixelEnsemble> {
    let mut rng = substream(seed, &[n as u64, e as u64]);
    let data = (0..n * m).map(|_| complex_normal(&mut rng)).collect();
    PixelEnsemble::new(n, data)
}

fn ensemble_fits(cfg: &NoiseRunConfig, n: usize, e: usize) -> Result<Vec<f64>> {
    let ensemble = noise_ensemble(n, cfg.ensemble_size, cfg.seed, e)?;
    let c = regularize(&estimate_coherence(&ensemble)?, cfg.beta)?;
    let pair = decompose(&c);
    cfg.methods.iter().map(|&method| method_fit(method, &pair)).collect()
}

/// Monte-Carlo `F_noise` for every configured stack size and method.
///
/// Points are ordered by stack size, then by method in configuration order.
pub fn simulate_noise_points(cfg: &NoiseRunConfig) -> Result<Vec<NoisePoint>> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(cfg.stack_sizes.len() * cfg.methods.len());
    for &n in &cfg.stack_sizes {
        let fits: Vec<Vec<f64>> = (0..cfg.n_ensembles)
            .into_par_iter()
            .map(|e| {
                ensemble_fits(cfg, n, e).map_err(|source| Error::Ensemble {
                    index: e,
                    source: Box::new(source),
                })
            })
            .collect::<Result<_>>()?;
        for (col, &method) in cfg.methods.iter().enumerate() {
            let values: Vec<f64> = fits.iter().map(|row| row[col]).collect();
            let (mean_f, stderr) = mean_and_stderr(&values);
            points.push(NoisePoint { method, n, mean_f, stderr });
        }
    }
    warn_non_monotone(&points);
    Ok(points)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn warn_non_monotone(points: &[NoisePoint]) {
    let mut methods: Vec<Method> = points.iter().map(|p| p.method).collect();
    methods.sort();
    methods.dedup();
    for method in methods {
        let mut series: Vec<&NoisePoint> = points.iter().filter(|p| p.method == method).collect();
        series.sort_by_key(|p| p.n);
        for pair in series.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if hi.mean_f - lo.mean_f > 2.0 * (lo.stderr + hi.stderr) {
                log::warn!(
                    "{method}: F_noise rises from {:.5} at N={} to {:.5} at N={}",
                    lo.mean_f,
                    lo.n,
                    hi.mean_f,
                    hi.n
                );
            }
        }
    }
}

const LM_MAX_ITER: usize = 200;

/// Levenberg-Marquardt least-squares fit of `(a N + b) / (N + c)`.
pub fn fit_rational(points: &[NoisePoint]) -> Result<NoiseFloorModel> {
    let method = points.first().map(|p| p.method).ok_or(Error::TooFewPoints { needed: 4, got: 0 })?;
    let mut sizes: Vec<usize> = points.iter().map(|p| p.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: sizes.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_f).collect();
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let range = y_max - y_min;
    if !(range > 0.0) {
        return Err(Error::RankDeficient);
    }

    let first = points.iter().min_by_key(|p| p.n).expect("non-empty");
    let last = points.iter().max_by_key(|p| p.n).expect("non-empty");
    let n_min = first.n as f64;
    let a = last.mean_f;
    let c = n_min;
    let b = first.mean_f * (n_min + c) - a * n_min;
    let mut p = Vector3::new(a, b, c);

    let residuals = |p: &Vector3<f64>| -> Option<Vec<f64>> {
        // Keep the pole left of the data.
        if p[2] <= -n_min {
            return None;
        }
        let r: Vec<f64> = xs.iter().zip(&ys).map(|(&x, &y)| (p[0] * x + p[1]) / (x + p[2]) - y).collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut r = residuals(&p).ok_or(Error::FitDiverged)?;
    let mut current = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..LM_MAX_ITER {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&x, &ri) in xs.iter().zip(&r) {
            let d = x + p[2];
            let row = Vector3::new(x / d, 1.0 / d, -(p[0] * x + p[1]) / (d * d));
            jtj += row * row.transpose();
            jtr += row * ri;
        }
        if jtr.amax() <= 1e-15 * (1.0 + current) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = damped.lu().solve(&(-jtr));
            if let Some(step) = step {
                let trial = p + step;
                if let Some(rt) = residuals(&trial) {
                    let c_trial = cost(&rt);
                    if c_trial < current {
                        let small = step.amax() <= 1e-12 * (1.0 + p.amax());
                        p = trial;
                        r = rt;
                        let gain = current - c_trial;
                        current = c_trial;
                        lambda = (lambda / 10.0).max(1e-12);
                        accepted = true;
                        if small || gain <= 1e-15 * current {
                            converged = true;
                        }
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        // No downhill step exists at any damping: a minimum to working
        // precision.
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if !converged || !current.is_finite() {
        return Err(Error::FitDiverged);
    }
    let rmse = (current / xs.len() as f64).sqrt();
    Ok(NoiseFloorModel {
        method,
        a: p[0],
        b: p[1],
        c: p[2],
        nrmse: rmse / range,
    })
}

/// `method,scheme,N,mean_F,stderr`, one row per point.
pub fn write_points_csv<W: std::io::Write>(points: &[NoisePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "scheme", "N", "mean_F", "stderr"]).map_err(csv_error)?;
    for p in points {
        w.write_record([
            p.method.class.to_string(),
            p.method.scheme.to_string(),
            p.n.to_string(),
            p.mean_f.to_string(),
            p.stderr.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `method,scheme,a,b,c,nrmse`, one row per model.
pub fn write_models_csv<W: std::io::Write>(models: &[NoiseFloorModel], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "scheme", "a", "b", "c", "nrmse"]).map_err(csv_error)?;
    for m in models {
        w.write_record([
            m.method.class.to_string(),
            m.method.scheme.to_string(),
            m.a.to_string(),
            m.b.to_string(),
            m.c.to_string(),
            m.nrmse.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads models written by [`write_models_csv`].
pub fn read_models_csv<R: std::io::Read>(input: R) -> Result<Vec<NoiseFloorModel>> {
    let mut r = csv::Reader::from_reader(input);
    let mut models = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_error)?;
        if row.len() != 6 {
            return Err(Error::Format(format!("noise model row has {} fields, expected 6", row.len())));
        }
        let number = |k: usize| -> Result<f64> {
            row[k]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("noise model field `{}` is not a number", &row[k])))
        };
        models.push(NoiseFloorModel {
            method: Method::new(row[0].parse()?, row[1].parse()?),
            a: number(2)?,
            b: number(3)?,
            c: number(4)?,
            nrmse: number(5)?,
        });
    }
    Ok(models)
}
