//! Run configuration: a TOML file merged with command-line flags.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::ball_body::MeasureDescriptor;
use crate::body::{BodyDescriptor, BodyParams, ConvexBody};

use super::CliError;

pub const DEFAULT_SEED: u64 = 20240521;
pub const DEFAULT_SAMPLES: usize = 200_000;

/// A sample budget written as an integer or a decimal/scientific string
/// such as `"2e5"`. Values must be whole and fit in `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Samples(pub usize);

impl Samples {
    pub fn parse(s: &str) -> Result<Self, String> {
        let t = s.trim().replace('_', "");
        if let Ok(v) = t.parse::<u64>() {
            return usize::try_from(v).map(Samples).map_err(|_| format!("sample budget `{s}` overflows"));
        }
        let (mant, exp) = t
            .split_once(['e', 'E'])
            .ok_or_else(|| format!("sample budget `{s}` is not an integer or scientific literal"))?;
        let exp: u32 = exp
            .trim_start_matches('+')
            .parse()
            .map_err(|_| format!("sample budget `{s}` has a bad exponent"))?;
        let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        {
            return Err(format!("sample budget `{s}` is not an integer or scientific literal"));
        }
        let frac_len = frac.len() as u32;
        if frac_len > exp && frac[exp as usize..].chars().any(|c| c != '0') {
            return Err(format!("sample budget `{s}` is not a whole number"));
        }
        let digits: String = format!("{int}{frac}");
        let base: u128 = digits.parse().map_err(|_| format!("sample budget `{s}` overflows"))?;
        let value = if exp >= frac_len {
            10u128
                .checked_pow(exp - frac_len)
                .and_then(|p| base.checked_mul(p))
        } else {
            Some(base / 10u128.pow(frac_len - exp))
        };
        value
            .and_then(|v| usize::try_from(v).ok())
            .map(Samples)
            .ok_or_else(|| format!("sample budget `{s}` overflows"))
    }
}

impl fmt::Display for Samples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Samples {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.0 as u64)
    }
}

impl<'de> Deserialize<'de> for Samples {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => usize::try_from(v).map(Samples).map_err(serde::de::Error::custom),
            Raw::Text(s) => Samples::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    /// Standard errors allowed below zero slack in Monte Carlo verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

/// Every key a config file may hold. Fields that do not apply to the
/// chosen command are rejected at validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Samples>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Body shorthands (`ball`, `cube`, `square`, ...) expanded with `dim` and `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bodies: Option<Vec<BodyDescriptor>>,
    /// Measure shorthands (`mu_p`, `gaussian`, `uniform_body`) expanded with `dim`, `p` and `body`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<Vec<MeasureDescriptor>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorems: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub funcs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions_per_family: Option<usize>,
    /// Boundary grid size; replaces Monte Carlo by quadrature (`n <= 3`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<usize>,
    /// Runs the fixed inequality suite instead of a selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<bool>,
    /// Adds the cube rows to an `lp-scaling` sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceOverrides>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config file: {e}")))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay!(
            self, top, command, seed, samples, out, body, bodies, measure, measures, dim, p, grid, theorems, funcs,
            functions_per_family, quadrature, suite, cube, tolerance
        );
        self
    }

    /// Names of the keys that are set.
    pub fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut mark = |name, set: bool| {
            if set {
                out.push(name);
            }
        };
        mark("seed", self.seed.is_some());
        mark("samples", self.samples.is_some());
        mark("out", self.out.is_some());
        mark("body", self.body.is_some());
        mark("bodies", self.bodies.is_some());
        mark("measure", self.measure.is_some());
        mark("measures", self.measures.is_some());
        mark("dim", self.dim.is_some());
        mark("p", self.p.is_some());
        mark("grid", self.grid.is_some());
        mark("theorems", self.theorems.is_some());
        mark("funcs", self.funcs.is_some());
        mark("functions_per_family", self.functions_per_family.is_some());
        mark("quadrature", self.quadrature.is_some());
        mark("suite", self.suite.is_some());
        mark("cube", self.cube.is_some());
        mark("tolerance", self.tolerance.is_some());
        out
    }

    /// Rejects keys outside `allowed`.
    pub fn allow_only(&self, command: &str, allowed: &[&str]) -> Result<(), CliError> {
        let extra: Vec<&str> = self.present().into_iter().filter(|k| !allowed.contains(k)).collect();
        if extra.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(format!("`{command}` does not take: {}", extra.join(", "))))
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn samples(&self) -> usize {
        self.samples.map_or(DEFAULT_SAMPLES, |s| s.0)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Bodies from `bodies` followed by the shorthands in `body × dim`.
    pub fn resolve_bodies(&self, default_dim: usize) -> Result<Vec<ConvexBody>, CliError> {
        let mut descs: Vec<BodyDescriptor> = self.bodies.clone().unwrap_or_default();
        if let Some(kinds) = &self.body {
            let dims = self.dim.clone().unwrap_or_else(|| vec![default_dim]);
            for kind in kinds {
                for &n in &dims {
                    descs.push(self.shorthand(kind, n)?);
                }
            }
        }
        descs.iter().map(|d| d.build().map_err(CliError::config_from)).collect()
    }

    fn single_p(&self, kind: &str) -> Result<f64, CliError> {
        match self.p.as_deref() {
            Some([p]) => Ok(*p),
            _ => Err(CliError::config(format!("body `{kind}` needs exactly one value of p"))),
        }
    }

    fn shorthand(&self, kind: &str, n: usize) -> Result<BodyDescriptor, CliError> {
        let mut params = BodyParams::default();
        let (kind, n) = match kind {
            "square" => {
                params.half_side = Some(0.5);
                ("cube", 2)
            }
            "disk" => ("ball", 2),
            "ellipsoid" => {
                params.semi_axes = Some((0..n).map(|i| [2.0, 1.0].get(i).copied().unwrap_or(0.5)).collect());
                ("ellipsoid", n)
            }
            "lp_ball" => {
                params.p = Some(self.single_p(kind)?);
                ("lp_ball", n)
            }
            "ball" | "cube" | "simplex" => (kind, n),
            other => {
                return Err(CliError::config(format!(
                    "unknown body `{other}` (expected ball, ellipsoid, cube, lp_ball, simplex, square, disk)"
                )))
            }
        };
        Ok(BodyDescriptor { kind: kind.to_string(), dim: n, params })
    }

    /// Measures from `measures` followed by the shorthands in `measure`,
    /// swept over `p × dim` (or `dim` alone).
    pub fn resolve_measures(&self) -> Result<Vec<MeasureDescriptor>, CliError> {
        let mut out: Vec<MeasureDescriptor> = self.measures.clone().unwrap_or_default();
        let Some(kinds) = &self.measure else {
            return Ok(out);
        };
        let dims = self.dim.clone().ok_or_else(|| CliError::config("measure shorthands need dim"))?;
        for kind in kinds {
            match kind.as_str() {
                "mu_p" => {
                    let ps = self.p.clone().ok_or_else(|| CliError::config("measure `mu_p` needs p"))?;
                    for &p in &ps {
                        for &n in &dims {
                            out.push(MeasureDescriptor::MuP { p, n });
                        }
                    }
                }
                "gaussian" => out.extend(dims.iter().map(|&n| MeasureDescriptor::Gaussian { n })),
                "uniform_body" => {
                    let kinds = self.body.clone().ok_or_else(|| CliError::config("measure `uniform_body` needs body"))?;
                    for b in &kinds {
                        for &n in &dims {
                            out.push(MeasureDescriptor::UniformBody { body: self.shorthand(b, n)? });
                        }
                    }
                }
                other => {
                    return Err(CliError::config(format!(
                        "unknown measure `{other}` (expected mu_p, gaussian, uniform_body; custom laws go in `measures`)"
                    )))
                }
            }
        }
        Ok(out)
    }
}
