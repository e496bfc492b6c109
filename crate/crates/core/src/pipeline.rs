//! Pixel-wise processing of an SLC stack.
//!
//! For every pixel: find its statistically homogeneous neighbourhood, reject
//! the pixel if the neighbourhood is too small, otherwise estimate and
//! regularize the coherence matrix, link phases with each configured method
//! and score the result. Pixels are independent, so the output does not
//! depend on the number of worker threads.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{closure_coefficient, decompose, estimate_coherence, regularize};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::linking::{link, Initializer, LinkOptions, PtSolver};
use crate::method::Method;
use crate::noisefloor::{builtin_model, read_models_csv, NoiseFloorModel};
use crate::phase::wrap;
use crate::quality::{assess, QualityReport};
use crate::shp::{gather, AmplitudeIndex, Connectivity, ShpConfig};
use crate::stack::{read_header, read_raster, write_mask, write_raster, SlcStack};
use crate::weights::build_weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Odd side length of the SHP search window.
    pub window: usize,
    pub shp_alpha: f64,
    /// Pixels with at most this many homogeneous neighbours are rejected.
    pub shp_min: usize,
    pub shp_connectivity: Connectivity,
    pub beta: f64,
    pub reference: usize,
    pub methods: Vec<Method>,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub initializer: Initializer,
    pub solver: PtSolver,
    /// Compute secondary solutions and the ambiguity coefficient.
    pub ambiguity: bool,
    /// Noise-floor models as written by `noisefloor`; methods missing from
    /// the file use the built-in models.
    pub noise_models: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window: 101,
            shp_alpha: 0.25,
            shp_min: 50,
            shp_connectivity: Connectivity::Eight,
            beta: 1e-4,
            reference: 0,
            methods: Method::ALL.to_vec(),
            threads: 0,
            initializer: Initializer::Eigen,
            solver: PtSolver::Prcg,
            ambiguity: true,
            noise_models: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidConfig(format!("window must be odd and at least 3, got {}", self.window)));
        }
        if !(self.shp_alpha > 0.0 && self.shp_alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("shp_alpha must lie in (0, 1), got {}", self.shp_alpha)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidBeta(self.beta));
        }
        if self.reference >= n {
            return Err(Error::IndexOutOfRange {
                index: self.reference,
                len: n,
            });
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if n < 3 {
            return Err(Error::TooFewAcquisitions { needed: 3, got: n });
        }
        if self.shp_min < n {
            log::warn!("shp_min {} is below the number of acquisitions {n}", self.shp_min);
        }
        Ok(())
    }

    /// Noise-floor model for each configured method, in method order.
    pub fn resolve_noise_models(&self) -> Result<Vec<NoiseFloorModel>> {
        let loaded = match &self.noise_models {
            Some(path) => read_models_csv(fs::File::open(path).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
            })?)?,
            None => Vec::new(),
        };
        self.methods
            .iter()
            .map(|&m| match loaded.iter().find(|model| model.method == m) {
                Some(model) => Ok(*model),
                None => {
                    if self.noise_models.is_some() {
                        log::info!("{m}: no fitted noise model supplied, using the built-in one");
                    }
                    builtin_model(m)
                }
            })
            .collect()
    }

    fn link_options(&self) -> LinkOptions {
        LinkOptions {
            solver: self.solver,
            initializer: self.initializer,
            want_secondary: self.ambiguity,
            ..Default::default()
        }
    }
}

/// Coefficient and phase rasters of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodMaps {
    pub method: Method,
    /// Normalized fit before noise-floor correction.
    pub fit: Vec<f32>,
    pub gamma_gof: Vec<f32>,
    /// Wishart goodness of fit, ML weights only.
    pub gamma_gof_wishart: Option<Vec<f32>>,
    pub gamma_amb: Option<Vec<f32>>,
    /// `N` bands of linked phases.
    pub phases: Vec<f32>,
}

/// Everything produced by [`process_stack`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub width: usize,
    pub height: usize,
    pub n_acquisitions: usize,
    pub gamma_cp: Vec<f32>,
    /// Homogeneous neighbourhood size including the pixel itself.
    pub shp_count: Vec<f32>,
    /// 1 where the pixel was rejected.
    pub rejected: Vec<u8>,
    /// Bit `k` set when method `k` failed on the pixel, bit 7 when the
    /// coherence estimate itself failed.
    pub errors: Vec<u8>,
    pub methods: Vec<MethodMaps>,
}

const PIXEL_ERROR: u8 = 1 << 7;

struct MethodPixel {
    report: QualityReport,
    phases: Vec<f64>,
}

struct PixelOutput {
    gamma_cp: f64,
    shp_count: usize,
    rejected: bool,
    errors: u8,
    methods: Vec<MethodPixel>,
}

fn passthrough(center: &[C64], reference: usize) -> Vec<f64> {
    let r = center[reference].arg();
    center.iter().map(|z| wrap(z.arg() - r)).collect()
}

fn process_pixel(
    stack: &SlcStack,
    index: &AmplitudeIndex,
    x: usize,
    y: usize,
    cfg: &RunConfig,
    models: &[NoiseFloorModel],
) -> PixelOutput {
    let n = stack.n_acquisitions();
    let shp = ShpConfig {
        window: cfg.window,
        alpha: cfg.shp_alpha,
        connectivity: cfg.shp_connectivity,
    };
    let mut center = vec![C64::new(0.0, 0.0); n];
    stack.pixel(x, y, &mut center);
    let kept = index.neighbourhood(x, y, &shp);
    let fallback = |errors: u8, rejected: bool| PixelOutput {
        gamma_cp: 0.0,
        shp_count: kept.len(),
        rejected,
        errors,
        methods: cfg
            .methods
            .iter()
            .map(|_| MethodPixel {
                report: QualityReport::rejected(),
                phases: passthrough(&center, cfg.reference),
            })
            .collect(),
    };
    if kept.len() <= cfg.shp_min {
        return fallback(0, true);
    }
    let prepared = gather(stack, &kept)
        .and_then(|e| estimate_coherence(&e))
        .and_then(|c| regularize(&c, cfg.beta))
        .and_then(|c| {
            let pair = decompose(&c);
            let gamma_cp = closure_coefficient(&pair)?;
            Ok((c, pair, gamma_cp))
        });
    let (c, pair, gamma_cp) = match prepared {
        Ok(v) => v,
        Err(e) => {
            log::warn!("pixel ({x}, {y}): {e}");
            return fallback(PIXEL_ERROR, false);
        }
    };

    let opts = cfg.link_options();
    let mut errors = 0u8;
    let methods = cfg
        .methods
        .iter()
        .zip(models)
        .enumerate()
        .map(|(k, (&method, model))| {
            let run = || -> Result<MethodPixel> {
                let w = build_weights(method.scheme, &pair, None)?;
                let result = match link(method, &pair, &w, cfg.reference, &opts) {
                    Err(Error::OrthogonalityNotReached { .. }) => {
                        let opts = LinkOptions {
                            want_secondary: false,
                            ..opts.clone()
                        };
                        link(method, &pair, &w, cfg.reference, &opts)?
                    }
                    other => other?,
                };
                let report = assess(method, &c, &pair, &w, &result, model, gamma_cp)?;
                Ok(MethodPixel {
                    report,
                    phases: result.primary.into_vec(),
                })
            };
            run().unwrap_or_else(|e| {
                log::warn!("pixel ({x}, {y}) {method}: {e}");
                errors |= 1 << k;
                MethodPixel {
                    report: QualityReport {
                        gamma_cp,
                        ..QualityReport::rejected()
                    },
                    phases: passthrough(&center, cfg.reference),
                }
            })
        })
        .collect();
    PixelOutput {
        gamma_cp,
        shp_count: kept.len(),
        rejected: false,
        errors,
        methods,
    }
}

/// Runs the full per-pixel chain on `stack`.
pub fn process_stack(stack: &SlcStack, cfg: &RunConfig) -> Result<RunOutputs> {
    let n = stack.n_acquisitions();
    cfg.validate(n)?;
    let models = cfg.resolve_noise_models()?;
    let (w, h) = (stack.width(), stack.height());
    let index = AmplitudeIndex::new(stack, cfg.shp_alpha);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let pixels: Vec<PixelOutput> = pool.install(|| {
        (0..w * h)
            .into_par_iter()
            .map(|p| process_pixel(stack, &index, p % w, p / w, cfg, &models))
            .collect()
    });

    let count = w * h;
    let with_secondary = cfg.ambiguity;
    let mut methods: Vec<MethodMaps> = cfg
        .methods
        .iter()
        .map(|&method| MethodMaps {
            method,
            fit: vec![0.0; count],
            gamma_gof: vec![0.0; count],
            gamma_gof_wishart: (method.scheme == crate::method::WeightScheme::Ml).then(|| vec![0.0; count]),
            gamma_amb: with_secondary.then(|| vec![0.0; count]),
            phases: vec![0.0; count * n],
        })
        .collect();
    let mut out = RunOutputs {
        width: w,
        height: h,
        n_acquisitions: n,
        gamma_cp: vec![0.0; count],
        shp_count: vec![0.0; count],
        rejected: vec![0; count],
        errors: vec![0; count],
        methods: Vec::new(),
    };
    for (p, px) in pixels.iter().enumerate() {
        out.gamma_cp[p] = px.gamma_cp as f32;
        out.shp_count[p] = px.shp_count as f32;
        out.rejected[p] = px.rejected as u8;
        out.errors[p] = px.errors;
        for (maps, mp) in methods.iter_mut().zip(&px.methods) {
            let r = &mp.report;
            maps.fit[p] = r.fit as f32;
            maps.gamma_gof[p] = r.gamma_gof as f32;
            if let Some(v) = maps.gamma_gof_wishart.as_mut() {
                v[p] = r.gamma_gof_wishart.unwrap_or(0.0) as f32;
            }
            if let Some(v) = maps.gamma_amb.as_mut() {
                v[p] = r.gamma_amb.unwrap_or(0.0) as f32;
            }
            for (k, &t) in mp.phases.iter().enumerate() {
                maps.phases[k * count + p] = t as f32;
            }
        }
    }
    out.methods = methods;
    Ok(out)
}

/// A named single-band raster.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMap {
    pub name: String,
    pub values: Vec<f32>,
}

impl RunOutputs {
    /// Quality-coefficient rasters, `gamma_cp` first.
    pub fn coefficient_maps(&self) -> Vec<NamedMap> {
        let mut maps = vec![NamedMap {
            name: "gamma_cp".into(),
            values: self.gamma_cp.clone(),
        }];
        for m in &self.methods {
            let mut push = |suffix: &str, v: &Vec<f32>| {
                maps.push(NamedMap {
                    name: format!("{}_{suffix}", m.method),
                    values: v.clone(),
                })
            };
            push("gamma_gof", &m.gamma_gof);
            if let Some(v) = &m.gamma_gof_wishart {
                push("gamma_gof_wishart", v);
            }
            if let Some(v) = &m.gamma_amb {
                push("gamma_amb", v);
            }
        }
        maps
    }

    /// Writes every raster to `dir` plus an `outputs.hdr` index.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let coefficients = self.coefficient_maps();
        for m in &coefficients {
            write_raster(&dir.join(format!("{}.f32", m.name)), &m.values)?;
        }
        write_raster(&dir.join("shp_count.f32"), &self.shp_count)?;
        for m in &self.methods {
            write_raster(&dir.join(format!("{}_fit.f32", m.method)), &m.fit)?;
            write_raster(&dir.join(format!("{}_phase.f32", m.method)), &m.phases)?;
        }
        write_mask(&dir.join("rejected.u8"), &self.rejected)?;
        write_mask(&dir.join("errors.u8"), &self.errors)?;

        let names: Vec<&str> = coefficients.iter().map(|m| m.name.as_str()).collect();
        let methods: Vec<String> = self.methods.iter().map(|m| m.method.to_string()).collect();
        let mut h = fs::File::create(dir.join("outputs.hdr"))?;
        writeln!(h, "width = {}", self.width)?;
        writeln!(h, "height = {}", self.height)?;
        writeln!(h, "n_acquisitions = {}", self.n_acquisitions)?;
        writeln!(h, "methods = {}", methods.join(","))?;
        writeln!(h, "coefficients = {}", names.join(","))?;
        Ok(())
    }
}

/// Reads the coefficient rasters listed in `dir/outputs.hdr`.
pub fn read_coefficient_maps(dir: &Path) -> Result<Vec<NamedMap>> {
    let header: BTreeMap<String, String> = read_header(&dir.join("outputs.hdr"))?;
    let size = |k: &str| -> Result<usize> {
        header
            .get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format(format!("outputs.hdr: bad or missing `{k}`")))
    };
    let count = size("width")? * size("height")?;
    let names = header.get("coefficients").map(String::as_str).unwrap_or("");
    names
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|name| {
            let values = read_raster(&dir.join(format!("{name}.f32")))?;
            if values.len() != count {
                return Err(Error::Format(format!("{name}.f32 has {} values, expected {count}", values.len())));
            }
            Ok(NamedMap {
                name: name.to_string(),
                values,
            })
        })
        .collect()
}

fn interior(v: f32) -> bool {
    v > 0.0 && v < 1.0
}

/// Per-coefficient histograms over `[0, 1]` as CSV
/// (`coefficient,bin_lo,bin_hi,count`), one row per occupied bin.
/// Values of exactly 0 or 1 are left out.
pub fn export_histograms<W: Write>(maps: &[NamedMap], bins: usize, out: W) -> Result<()> {
    if bins == 0 {
        return Err(Error::InvalidConfig("at least one bin is required".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["coefficient", "bin_lo", "bin_hi", "count"])
        .map_err(crate::stack::csv_error)?;
    for m in maps {
        let mut counts = vec![0u64; bins];
        for &v in m.values.iter().filter(|&&v| interior(v)) {
            let b = ((v as f64 * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            w.write_record([m.name.clone(), lo.to_string(), hi.to_string(), c.to_string()])
                .map_err(crate::stack::csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `(gamma_gof, gamma_amb)` pairs per method as CSV
/// (`method,gamma_gof,gamma_amb`), skipping pixels where either is 0 or 1.
pub fn export_scatter<W: Write>(maps: &[NamedMap], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "gamma_gof", "gamma_amb"])
        .map_err(crate::stack::csv_error)?;
    for gof in maps.iter().filter(|m| m.name.ends_with("_gamma_gof")) {
        let method = gof.name.trim_end_matches("_gamma_gof");
        let Some(amb) = maps.iter().find(|m| m.name == format!("{method}_gamma_amb")) else {
            continue;
        };
        for (&g, &a) in gof.values.iter().zip(&amb.values) {
            if interior(g) && interior(a) {
                w.write_record([method.to_string(), g.to_string(), a.to_string()])
                    .map_err(crate::stack::csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: Vec<f32>) -> NamedMap {
        NamedMap {
            name: "gamma_cp".into(),
            values,
        }
    }

    fn csv_rows(bytes: Vec<u8>) -> Vec<String> {
        String::from_utf8(bytes).unwrap().lines().map(str::to_string).collect()
    }

    #[test]
    fn config_defaults_and_toml() {
        let cfg = RunConfig::from_toml("window = 21\nmethods = [\"pt-ew\", \"ed-ml\"]\nshp_connectivity = \"4\"").unwrap();
        assert_eq!(cfg.window, 21);
        assert_eq!(cfg.shp_min, 50);
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.shp_connectivity, Connectivity::Four);
        assert!(RunConfig::from_toml("windw = 3").is_err());
        assert!(RunConfig { window: 4, ..Default::default() }.validate(10).is_err());
        assert!(RunConfig::default().validate(10).is_ok());
    }

    #[test]
    fn all_rejected_histogram_is_empty() {
        let mut buf = Vec::new();
        export_histograms(&[map(vec![0.0; 16])], 10, &mut buf).unwrap();
        assert_eq!(csv_rows(buf), vec!["coefficient,bin_lo,bin_hi,count"]);
    }

    #[test]
    fn constant_map_fills_one_bin() {
        let mut buf = Vec::new();
        export_histograms(&[map(vec![0.5; 16])], 10, &mut buf).unwrap();
        assert_eq!(csv_rows(buf)[1..], ["gamma_cp,0.5,0.6,16".to_string()]);
    }

    #[test]
    fn histogram_counts_match_recount() {
        let values: Vec<f32> = (0..1000).map(|k| ((k * 37) % 101) as f32 / 100.0).collect();
        let mut buf = Vec::new();
        export_histograms(&[map(values.clone())], 7, &mut buf).unwrap();
        let rows = csv_rows(buf);
        let total: u64 = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
        assert_eq!(total as usize, values.iter().filter(|&&v| v > 0.0 && v < 1.0).count());
        for r in &rows[1..] {
            let f: Vec<&str> = r.split(',').collect();
            let (lo, hi): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
            let recount = values
                .iter()
                .filter(|&&v| v > 0.0 && v < 1.0 && (v as f64) >= lo && ((v as f64) < hi || hi == 1.0))
                .count();
            assert_eq!(f[3].parse::<usize>().unwrap(), recount, "{r}");
        }
    }
}
