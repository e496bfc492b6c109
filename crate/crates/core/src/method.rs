use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Solver class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodClass {
    /// Phase triangulation: unit-modulus solution vector.
    Pt,
    /// Eigendecomposition: leading eigenvector.
    Ed,
}

/// Weighting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// Maximum likelihood, `-Gamma^-1 (.) Gamma`.
    Ml,
    /// Coherence weighted, `Gamma`.
    Cw,
    /// Equal weighted, all ones.
    Ew,
    /// User supplied.
    Custom,
}

/// A (class, scheme) pair such as `pt-ml`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Method {
    pub class: MethodClass,
    pub scheme: WeightScheme,
}

impl Method {
    pub const fn new(class: MethodClass, scheme: WeightScheme) -> Self {
        Self { class, scheme }
    }

    /// The six standard combinations, PT first.
    pub const ALL: [Method; 6] = [
        Method::new(MethodClass::Pt, WeightScheme::Ew),
        Method::new(MethodClass::Pt, WeightScheme::Cw),
        Method::new(MethodClass::Pt, WeightScheme::Ml),
        Method::new(MethodClass::Ed, WeightScheme::Ew),
        Method::new(MethodClass::Ed, WeightScheme::Cw),
        Method::new(MethodClass::Ed, WeightScheme::Ml),
    ];
}

impl fmt::Display for MethodClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodClass::Pt => "pt",
            MethodClass::Ed => "ed",
        })
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Ml => "ml",
            WeightScheme::Cw => "cw",
            WeightScheme::Ew => "ew",
            WeightScheme::Custom => "custom",
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.class, self.scheme)
    }
}

impl FromStr for MethodClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pt" => Ok(MethodClass::Pt),
            "ed" => Ok(MethodClass::Ed),
            other => Err(Error::UnknownMethodScheme(other.to_string())),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(WeightScheme::Ml),
            "cw" => Ok(WeightScheme::Cw),
            "ew" => Ok(WeightScheme::Ew),
            "custom" => Ok(WeightScheme::Custom),
            other => Err(Error::UnknownMethodScheme(other.to_string())),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (class, scheme) = s
            .split_once(['-', '_'])
            .ok_or_else(|| Error::UnknownMethodScheme(s.to_string()))?;
        Ok(Method::new(class.parse()?, scheme.parse()?))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
