//! Flat `key = value` configuration with dotted section prefixes.

use std::collections::HashMap;
use std::path::PathBuf;

use crate::analysis::{Analysis, Thresholds};
use crate::error::{Error, Result};
use crate::family::{BuiltinMatrix, Coefficient, EvolutionFamily, IntegratorConfig};
use crate::grid::{SupSampling, TimeGrid};
use crate::linalg::StateMatrix;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    ScalarExample1,
    ScalarExample2,
    ConstantDecay,
    MatrixOde,
    Rescaled,
}

impl FamilyKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "scalar_example1" => FamilyKind::ScalarExample1,
            "scalar_example2" | "perron" => FamilyKind::ScalarExample2,
            "constant_decay" => FamilyKind::ConstantDecay,
            "matrix_ode" => FamilyKind::MatrixOde,
            "rescaled" => FamilyKind::Rescaled,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::ScalarExample1 => "scalar_example1",
            FamilyKind::ScalarExample2 => "scalar_example2",
            FamilyKind::ConstantDecay => "constant_decay",
            FamilyKind::MatrixOde => "matrix_ode",
            FamilyKind::Rescaled => "rescaled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub rate: f64,
    pub shift: f64,
    pub dim: Option<usize>,
    /// Built-in name or row-major entries separated by commas, spaces or `;`.
    pub ode_matrix: Option<String>,
    pub inner: Option<FamilyKind>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec { kind: FamilyKind::ScalarExample1, rate: 1.0, shift: 0.0, dim: None, ode_matrix: None, inner: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Linear,
    LogAugmented,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub family: FamilySpec,
    pub t_max: f64,
    pub h: f64,
    pub t_sup: Option<f64>,
    pub sampling: SamplingMode,
    pub per_efold: usize,
    pub alphas: Vec<f64>,
    pub bracket: Option<(f64, f64)>,
    pub bisect_tol: f64,
    pub n_dirs: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub delta: f64,
    pub nu: f64,
    pub t_gap: Option<f64>,
    pub n_bumps: usize,
    pub out_dir: PathBuf,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            family: FamilySpec::default(),
            t_max: 200.0,
            h: 0.01,
            t_sup: None,
            sampling: SamplingMode::Linear,
            per_efold: 1000,
            alphas: Vec::new(),
            bracket: None,
            bisect_tol: 0.02,
            n_dirs: 4,
            seed: DEFAULT_SEED,
            thresholds: Thresholds::default(),
            delta: 0.5,
            nu: 1.0,
            t_gap: None,
            n_bumps: 20,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl AnalysisConfig {
    pub fn t_sup(&self) -> f64 {
        self.t_sup.unwrap_or(self.t_max)
    }

    pub fn sup_sampling(&self) -> SupSampling {
        match self.sampling {
            SamplingMode::Linear => SupSampling::Linear { t_sup: self.t_sup() },
            SamplingMode::LogAugmented => SupSampling::LogAugmented { t_sup: self.t_sup(), per_efold: self.per_efold },
        }
    }

    pub fn build_family(&self) -> Result<EvolutionFamily> {
        let spec = &self.family;
        match spec.kind {
            FamilyKind::Rescaled => {
                let inner = spec.inner.unwrap_or(FamilyKind::ConstantDecay);
                if inner == FamilyKind::Rescaled {
                    return Err(Error::Domain("family.inner cannot itself be rescaled".into()));
                }
                self.base_family(inner)?.rescale(spec.shift)
            }
            kind => self.base_family(kind),
        }
    }

    fn base_family(&self, kind: FamilyKind) -> Result<EvolutionFamily> {
        let spec = &self.family;
        match kind {
            FamilyKind::ScalarExample1 => Ok(EvolutionFamily::example1()),
            FamilyKind::ScalarExample2 => Ok(EvolutionFamily::example2()),
            FamilyKind::ConstantDecay => EvolutionFamily::constant_decay(spec.rate, spec.dim.unwrap_or(1)),
            FamilyKind::MatrixOde => {
                let integrator = IntegratorConfig {
                    horizon: IntegratorConfig::default().horizon.max(self.t_sup()),
                    ..IntegratorConfig::default()
                };
                let text = spec.ode_matrix.as_deref().unwrap_or("shear");
                let coefficient = match BuiltinMatrix::parse(text) {
                    Some(b) => Coefficient::Builtin(b),
                    None => Coefficient::Constant(parse_matrix(text, spec.dim)?),
                };
                EvolutionFamily::matrix_ode(coefficient, integrator)
            }
            FamilyKind::Rescaled => unreachable!("handled by build_family"),
        }
    }

    pub fn analysis(&self) -> Result<Analysis> {
        Analysis::new(self.build_family()?, TimeGrid::uniform(self.h, self.t_max)?, self.sup_sampling())
    }
}

fn parse_matrix(text: &str, dim: Option<usize>) -> Result<StateMatrix> {
    let vals: Vec<f64> = text
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Domain(format!("bad matrix entry `{s}`"))))
        .collect::<Result<_>>()?;
    let n = dim.unwrap_or((vals.len() as f64).sqrt().round() as usize);
    if n == 0 || vals.len() != n * n {
        return Err(Error::Domain(format!("family.ode_matrix has {} entries, expected {}", vals.len(), n * n)));
    }
    Ok(StateMatrix::from_row_major(n, &vals))
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| err(line, format!("`{key}` expects a number, got `{v}`")))?;
    if x.is_nan() {
        return Err(err(line, format!("`{key}` is NaN")));
    }
    Ok(x)
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| err(line, format!("`{key}` expects a nonnegative integer, got `{v}`")))
}

pub fn parse_seed(v: &str) -> Option<u64> {
    match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => v.parse().ok(),
    }
}

/// Parses the configuration text, filling defaults and checking ranges.
pub fn parse_config(text: &str) -> Result<AnalysisConfig> {
    let mut cfg = AnalysisConfig::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut lo = None;
    let mut hi = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{body}`")))?;
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        if key.is_empty() {
            return Err(err(line, "empty key"));
        }
        if key != "alpha" && seen.insert(key.to_string(), line).is_some() {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
        seen.entry(key.to_string()).or_insert(line);
        match key {
            "family.kind" => {
                cfg.family.kind = FamilyKind::parse(value).ok_or_else(|| err(line, format!("unknown family `{value}`")))?
            }
            "family.inner" => {
                cfg.family.inner =
                    Some(FamilyKind::parse(value).ok_or_else(|| err(line, format!("unknown family `{value}`")))?)
            }
            "family.rate" => cfg.family.rate = num(line, key, value)?,
            "family.shift" => cfg.family.shift = num(line, key, value)?,
            "family.dim" => cfg.family.dim = Some(count(line, key, value)?),
            "family.ode_matrix" => cfg.family.ode_matrix = Some(value.to_string()),
            "t_max" => cfg.t_max = num(line, key, value)?,
            "h" => cfg.h = num(line, key, value)?,
            "t_sup" => cfg.t_sup = Some(num(line, key, value)?),
            "sampling" => {
                cfg.sampling = match value {
                    "linear" => SamplingMode::Linear,
                    "log-augmented" | "log_augmented" | "log" => SamplingMode::LogAugmented,
                    _ => return Err(err(line, format!("sampling must be `linear` or `log-augmented`, got `{value}`"))),
                }
            }
            "per_efold" => cfg.per_efold = count(line, key, value)?,
            "alpha" => {
                for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    cfg.alphas.push(num(line, key, part)?);
                }
            }
            "bracket.lo" => lo = Some(num(line, key, value)?),
            "bracket.hi" => hi = Some(num(line, key, value)?),
            "bisect_tol" => cfg.bisect_tol = num(line, key, value)?,
            "probes.n_dirs" => cfg.n_dirs = count(line, key, value)?,
            "seed" => cfg.seed = parse_seed(value).ok_or_else(|| err(line, format!("bad seed `{value}`")))?,
            "theta" => cfg.thresholds.theta = num(line, key, value)?,
            "tol_growth" => cfg.thresholds.tol_growth = num(line, key, value)?,
            "tol_tail" => cfg.thresholds.tol_tail = num(line, key, value)?,
            "c_safety" => cfg.thresholds.c_safety = num(line, key, value)?,
            "delta" => cfg.delta = num(line, key, value)?,
            "nu" => cfg.nu = num(line, key, value)?,
            "t_gap" => cfg.t_gap = Some(num(line, key, value)?),
            "n_bumps" => cfg.n_bumps = count(line, key, value)?,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            _ => return Err(err(line, format!("unknown key `{key}`"))),
        }
    }
    let at = |key: &str| seen.get(key).copied().unwrap_or(0);
    cfg.bracket = match (lo, hi) {
        (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(err(at("bracket.lo").max(at("bracket.hi")), "bracket needs bracket.lo < bracket.hi")),
    };
    validate(&cfg, at)?;
    Ok(cfg)
}

fn validate(cfg: &AnalysisConfig, at: impl Fn(&str) -> usize) -> Result<()> {
    if !(cfg.h > 0.0 && cfg.h.is_finite()) {
        return Err(err(at("h"), format!("h must be positive, got {}", cfg.h)));
    }
    if !(cfg.t_max >= 10.0 * cfg.h && cfg.t_max.is_finite()) {
        return Err(err(at("t_max"), format!("t_max must be at least 10 h, got {}", cfg.t_max)));
    }
    if let Some(t) = cfg.t_sup {
        if !(t >= cfg.t_max) || !t.is_finite() {
            return Err(err(at("t_sup"), format!("t_sup must be finite and >= t_max, got {t}")));
        }
    }
    if cfg.sampling == SamplingMode::LogAugmented && cfg.per_efold == 0 {
        return Err(err(at("per_efold"), "per_efold must be positive"));
    }
    let positive = [
        ("bisect_tol", cfg.bisect_tol),
        ("nu", cfg.nu),
        ("theta", cfg.thresholds.theta),
        ("tol_growth", cfg.thresholds.tol_growth),
        ("tol_tail", cfg.thresholds.tol_tail),
        ("c_safety", cfg.thresholds.c_safety),
    ];
    for (key, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            return Err(err(at(key), format!("{key} must be positive, got {v}")));
        }
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(err(at("delta"), format!("delta must lie in (0, 1), got {}", cfg.delta)));
    }
    if let Some(g) = cfg.t_gap {
        if !(g > 0.0) {
            return Err(err(at("t_gap"), "t_gap must be positive"));
        }
    }
    if cfg.family.dim == Some(0) {
        return Err(err(at("family.dim"), "family.dim must be positive"));
    }
    if !(cfg.family.rate >= 0.0) {
        return Err(err(at("family.rate"), "family.rate must be >= 0"));
    }
    Ok(())
}
