use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Flat {
        l: usize,
    },
    TwoAtom {
        a: f64,
    },
    /// Raw eigenvalues, normalized on load.
    Weights {
        weights: Vec<f64>,
        #[serde(default)]
        tail: f64,
    },
    Euler {
        r: f64,
        #[serde(default = "default_k")]
        k: usize,
    },
    Regvar {
        beta: f64,
        p: f64,
        r: f64,
        #[serde(default = "default_k")]
        k: usize,
    },
    Loglog {
        beta: f64,
        s: f64,
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Product of the first `d` marginals with `3^{−2r_j−2} ∼ β/(j (ln j)^p)`.
    EulerFamily {
        beta: f64,
        p: f64,
        #[serde(default = "default_tail_tol")]
        tail_tol: f64,
        #[serde(default = "default_k_max")]
        k_max: usize,
    },
    /// Product of seeded random marginals with at most `k_max` eigenvalues each.
    Random {
        #[serde(default = "default_random_k")]
        k_max: usize,
    },
}

fn default_k() -> usize {
    10_000
}
fn default_tail_tol() -> f64 {
    1e-14
}
fn default_k_max() -> usize {
    4096
}
fn default_random_k() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Binomial for two-atom degrees, exact search otherwise, grid brackets past `n_cap`.
    Auto,
    Exact,
    Binomial,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `a_d = Σ E_j`, `b_d = max(1, (Σ σ_j²)^{1/2})`.
    Clt,
    /// `a_d = 0`, `b_d = max(1, ln d)`.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub step: f64,
    pub x_max: f64,
    pub normalization: Normalization,
    /// Size of the `ε₂` grid scanned for the lower bound.
    pub eps2_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { step: 0.005, x_max: 8.0, normalization: Normalization::Clt, eps2_points: 99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DickmanConfig {
    pub h: f64,
    pub x_max: f64,
}

impl Default for DickmanConfig {
    fn default() -> Self {
        DickmanConfig { h: 1.0 / 1024.0, x_max: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    /// Dickman for Euler families, centred normal for degrees with `σ > 0`.
    Auto,
    Dickman,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcConfig {
    pub target: TargetChoice,
    /// Per-marginal index cutoff; `null` keeps every index.
    pub n: Option<usize>,
    pub tau: Vec<f64>,
    pub x: Vec<f64>,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig {
            target: TargetChoice::Auto,
            n: Some(2),
            tau: vec![0.1, 0.25, 0.5, 0.75, 1.0, 2.0],
            x: vec![0.1, 0.25, 0.5, 0.75, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Dickman {
        beta: f64,
    },
    Stable {
        alpha: f64,
        #[serde(default = "one")]
        rho: f64,
        #[serde(default = "one")]
        beta_skew: f64,
        #[serde(default)]
        mu: f64,
    },
    Normal,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistConfig {
    pub law: Option<LawSpec>,
    /// Quantile levels `u`.
    pub levels: Vec<f64>,
    /// CDF evaluation points `x`.
    pub points: Vec<f64>,
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig { law: None, levels: vec![0.1, 0.25, 0.5, 0.75, 0.9], points: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RRule {
    /// Real `r_j` with `3^{−2r_j−2} = min(1/9, β/((j+1)(ln(j+1))^p))`.
    Euler { beta: f64, p: f64 },
    Linear { slope: f64 },
    Constant { r: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TractConfig {
    pub rule: Option<RRule>,
    pub d_max: usize,
    pub tau: Vec<f64>,
}

impl Default for TractConfig {
    fn default() -> Self {
        TractConfig { rule: None, d_max: 100_000, tau: vec![0.5, 1.0, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Option<ProblemSpec>,
    pub d: Vec<u64>,
    pub eps: Vec<f64>,
    pub method: MethodChoice,
    pub n_cap: u64,
    pub grid: GridConfig,
    pub dickman: DickmanConfig,
    pub fit_window: Option<(f64, f64)>,
    pub abc: AbcConfig,
    pub dist: DistConfig,
    pub tract: TractConfig,
    pub results: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: u64,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: None,
            d: Vec::new(),
            eps: Vec::new(),
            method: MethodChoice::Auto,
            n_cap: 10_000_000,
            grid: GridConfig::default(),
            dickman: DickmanConfig::default(),
            fit_window: None,
            abc: AbcConfig::default(),
            dist: DistConfig::default(),
            tract: TractConfig::default(),
            results: None,
            out: None,
            threads: None,
            seed: 0,
            format: Format::Csv,
        }
    }
}

/// Reads the config file (if any) as a JSON tree so that flags can be layered on top.
pub fn load_tree(path: Option<&Path>) -> Result<Value, CliError> {
    match path {
        None => Ok(Value::Object(Map::new())),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if !v.is_object() {
                return Err(CliError::Config(format!("{}: top level must be an object", p.display())));
            }
            Ok(v)
        }
    }
}

/// Sets `value` at a dotted path, creating objects on the way.
pub fn set_path(tree: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = tree;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad key path '{path}'")));
    }
    for key in &keys[..keys.len() - 1] {
        if !node.get(*key).is_some_and(Value::is_object) {
            node[*key] = Value::Object(Map::new());
        }
        node = &mut node[*key];
    }
    node[keys[keys.len() - 1]] = value;
    Ok(())
}

/// Parses a flag value as JSON, falling back to a plain string.
pub fn flag_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Splits `key=value`.
pub fn assignment(raw: &str) -> Result<(String, Value), CliError> {
    let (k, v) = raw.split_once('=').ok_or_else(|| CliError::Config(format!("expected KEY=VALUE, got '{raw}'")))?;
    Ok((k.trim().to_string(), flag_value(v.trim())))
}

pub fn parse(tree: Value) -> Result<ExperimentConfig, CliError> {
    serde_json::from_value(tree).map_err(|e| CliError::Config(e.to_string()))
}

impl ExperimentConfig {
    pub fn problem(&self) -> Result<&ProblemSpec, CliError> {
        self.problem.as_ref().ok_or_else(|| CliError::Config("no problem given (config 'problem' or --family)".into()))
    }

    pub fn require_d(&self) -> Result<(), CliError> {
        if self.d.is_empty() {
            return Err(CliError::Config("d-list is empty".into()));
        }
        if self.d[0] == 0 || self.d.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(format!("d-list must be positive and strictly ascending, got {:?}", self.d)));
        }
        Ok(())
    }

    pub fn require_eps(&self) -> Result<(), CliError> {
        if self.eps.is_empty() {
            return Err(CliError::Config("eps-list is empty".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(CliError::Config(format!("eps {e} outside (0,1)")));
        }
        Ok(())
    }

    pub fn validate_common(&self) -> Result<(), CliError> {
        if !(self.grid.step > 0.0) || !(self.grid.x_max > 0.0) {
            return Err(CliError::Config("grid.step and grid.x_max must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if self.method == MethodChoice::Binomial && !matches!(self.problem, Some(ProblemSpec::TwoAtom { .. })) {
            return Err(CliError::Config("method 'binomial' needs a two_atom problem".into()));
        }
        Ok(())
    }
}
