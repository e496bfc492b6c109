//! SLC stacks and the raw on-disk formats.
//!
//! A stack is a text header of `key = value` lines next to a raw file of
//! little-endian `f32` (re, im) pairs, band-sequential and row-major within a
//! band:
//!
//! ```text
//! width = 256
//! height = 256
//! n_acquisitions = 20
//! dtype = complex64
//! order = band-sequential
//! data_file = scene.raw
//! labels = 20200101,20200112,...
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::simulator::{CovarianceKind, GroundTruth, Rect};

#[derive(Debug, Clone, PartialEq)]
pub struct SlcStack {
    width: usize,
    height: usize,
    n: usize,
    labels: Vec<String>,
    data: Vec<Complex<f32>>,
}

impl SlcStack {
    /// `data` holds `n` bands of `width * height` pixels each.
    pub fn new(width: usize, height: usize, n_acquisitions: usize, data: Vec<Complex<f32>>) -> Result<Self> {
        if n_acquisitions < 2 {
            return Err(Error::TooFewAcquisitions {
                needed: 2,
                got: n_acquisitions,
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("empty raster".into()));
        }
        let expected = width * height * n_acquisitions;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            n: n_acquisitions,
            labels: (0..n_acquisitions).map(|k| k.to_string()).collect(),
            data,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_acquisitions(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn band(&self, k: usize) -> &[Complex<f32>] {
        let len = self.width * self.height;
        &self.data[k * len..(k + 1) * len]
    }

    pub fn value(&self, k: usize, x: usize, y: usize) -> Complex<f32> {
        self.data[(k * self.height + y) * self.width + x]
    }

    /// Time series of one pixel in double precision.
    pub fn pixel(&self, x: usize, y: usize, out: &mut [C64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.n) {
            let z = self.value(k, x, y);
            *o = C64::new(z.re as f64, z.im as f64);
        }
    }

    /// Writes the header to `header` and the samples next to it with the
    /// extension `raw`.
    pub fn write(&self, header: &Path) -> Result<()> {
        let raw = header.with_extension("raw");
        let raw_name = raw
            .file_name()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Format(format!("bad path {}", raw.display())))?;
        let mut h = BufWriter::new(File::create(header)?);
        writeln!(h, "width = {}", self.width)?;
        writeln!(h, "height = {}", self.height)?;
        writeln!(h, "n_acquisitions = {}", self.n)?;
        writeln!(h, "dtype = complex64")?;
        writeln!(h, "order = band-sequential")?;
        writeln!(h, "data_file = {raw_name}")?;
        writeln!(h, "labels = {}", self.labels.join(","))?;
        h.flush()?;
        let mut w = BufWriter::new(File::create(&raw)?);
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(header: &Path) -> Result<Self> {
        let fields = read_header(header)?;
        let get = |key: &str| fields.get(key).ok_or_else(|| Error::Format(format!("missing `{key}` in header")));
        let num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("`{key}` is not a non-negative integer")))
        };
        let (width, height, n) = (num("width")?, num("height")?, num("n_acquisitions")?);
        if let Some(dtype) = fields.get("dtype") {
            if dtype != "complex64" {
                return Err(Error::Format(format!("unsupported dtype {dtype}")));
            }
        }
        if let Some(order) = fields.get("order") {
            if order != "band-sequential" {
                return Err(Error::Format(format!("unsupported order {order}")));
            }
        }
        let raw = match fields.get("data_file") {
            Some(name) => header.parent().unwrap_or(Path::new(".")).join(name),
            None => header.with_extension("raw"),
        };
        let values = read_f32(&raw)?;
        if values.len() != 2 * width * height * n {
            return Err(Error::Format(format!(
                "{} holds {} floats, header implies {}",
                raw.display(),
                values.len(),
                2 * width * height * n
            )));
        }
        let data = values.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect();
        let stack = Self::new(width, height, n, data)?;
        match fields.get("labels") {
            Some(l) if !l.is_empty() => stack.with_labels(l.split(',').map(|s| s.trim().to_string()).collect()),
            _ => Ok(stack),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn read_header(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("{}:{}: expected key = value", path.display(), no + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn read_f32(path: &Path) -> Result<Vec<f32>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!("{} is not a whole number of floats", path.display())));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

/// Little-endian `f32` raster, row-major.
pub fn write_raster(path: &Path, values: &[f32]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raster(path: &Path) -> Result<Vec<f32>> {
    read_f32(path)
}

pub fn write_mask(path: &Path, values: &[u8]) -> Result<()> {
    std::fs::write(path, values)?;
    Ok(())
}

/// `region,kind,x0,y0,x1,y1,phase_0,...`
pub fn write_ground_truth(path: &Path, truth: &[GroundTruth]) -> Result<()> {
    let n = truth.first().map_or(0, |t| t.phases.len());
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut head: Vec<String> = ["region", "kind", "x0", "y0", "x1", "y1"].iter().map(|s| s.to_string()).collect();
    head.extend((0..n).map(|k| format!("phase_{k}")));
    w.write_record(&head).map_err(csv_error)?;
    for t in truth {
        let kind = match t.kind {
            CovarianceKind::PureNoise => "pure_noise",
            CovarianceKind::RankOnePlusNoise => "rank_one_plus_noise",
            CovarianceKind::ExpDecorrelation => "exp_decorrelation",
        };
        let mut rec = vec![
            t.region.clone(),
            kind.to_string(),
            t.rect.x0.to_string(),
            t.rect.y0.to_string(),
            t.rect.x1.to_string(),
            t.rect.y1.to_string(),
        ];
        rec.extend(t.phases.iter().map(|p| p.to_string()));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::Format("short ground-truth row".into()));
        let int = |k: usize| -> Result<usize> { field(k)?.parse().map_err(|_| Error::Format("bad rectangle".into())) };
        let kind = match field(1)? {
            "pure_noise" => CovarianceKind::PureNoise,
            "rank_one_plus_noise" => CovarianceKind::RankOnePlusNoise,
            "exp_decorrelation" => CovarianceKind::ExpDecorrelation,
            other => return Err(Error::Format(format!("unknown region kind {other}"))),
        };
        let phases = (6..rec.len())
            .map(|k| field(k)?.parse().map_err(|_| Error::Format("bad phase".into())))
            .collect::<Result<_>>()?;
        out.push(GroundTruth {
            region: field(0)?.to_string(),
            kind,
            rect: Rect {
                x0: int(2)?,
                y0: int(3)?,
                x1: int(4)?,
                y1: int(5)?,
            },
            phases,
        });
    }
    Ok(out)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}
