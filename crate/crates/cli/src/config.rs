//! Resolved configurations: defaults, then the JSON config file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use cdpd::dpd::Variant;
use cdpd::estimate::SolverConfig;
use cdpd::models::{Design, ModelTag};
use cdpd::robustness::GridSpec;
use cdpd::simulate::SimDesign;
use cdpd::survival_data::{CsvSchema, MissingPolicy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cli::{DataArgs, FitArgs, InfluenceArgs, SimulateArgs, SolverArgs, SweepArgs};
use crate::error::{CliError, CliResult};

/// Reads a config for `subcommand`. A run manifest is accepted too, in
/// which case its embedded config is used.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>, subcommand: &str) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let json_err = |source| CliError::Json {
        path: path.to_path_buf(),
        source,
    };
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    if let Some(sub) = value.get("subcommand").and_then(|v| v.as_str()) {
        if sub != subcommand {
            return Err(CliError::Usage(format!(
                "{} is a manifest for `{sub}`, not `{subcommand}`",
                path.display()
            )));
        }
        value = value.get("config").cloned().unwrap_or_default();
    }
    serde_json::from_value(value).map_err(json_err)
}

pub fn parse_model(s: &str) -> CliResult<ModelTag> {
    Ok(s.parse::<ModelTag>()?)
}

pub fn parse_variant(s: &str) -> CliResult<Variant> {
    Ok(s.parse::<Variant>()?)
}

/// Parses a kebab/lowercase enum through its serde names.
fn parse_named<T: DeserializeOwned>(s: &str, what: &str) -> CliResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Usage(format!("unknown {what} `{s}`")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub time_col: String,
    pub status_col: String,
    pub covariate_cols: Vec<String>,
    pub id_col: Option<String>,
    pub drop_missing: bool,
    pub intercept: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            time_col: "time".into(),
            status_col: "status".into(),
            covariate_cols: Vec::new(),
            id_col: None,
            drop_missing: false,
            intercept: false,
        }
    }
}

impl DataConfig {
    fn apply(&mut self, a: &DataArgs) {
        if let Some(v) = &a.time_col {
            self.time_col = v.clone();
        }
        if let Some(v) = &a.status_col {
            self.status_col = v.clone();
        }
        if let Some(v) = &a.covariate_cols {
            self.covariate_cols = v.clone();
        }
        if let Some(v) = &a.id_col {
            self.id_col = Some(v.clone());
        }
        self.drop_missing |= a.drop_missing;
        self.intercept |= a.intercept;
    }

    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            time_col: self.time_col.clone(),
            status_col: self.status_col.clone(),
            covariate_cols: self.covariate_cols.clone(),
            id_col: self.id_col.clone(),
            missing: if self.drop_missing {
                MissingPolicy::Drop
            } else {
                MissingPolicy::Reject
            },
        }
    }

    pub fn design(&self) -> Design {
        Design::new(self.covariate_cols.len(), self.intercept)
    }

    fn check(&self) -> CliResult<()> {
        if self.covariate_cols.is_empty() {
            return Err(CliError::Usage("--covariate-cols is required".into()));
        }
        Ok(())
    }
}

fn apply_solver(s: &mut SolverConfig, a: &SolverArgs) {
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.restarts {
        s.restarts = v;
    }
    if let Some(v) = a.tol {
        s.tol = v;
    }
    if let Some(v) = a.max_iter {
        s.max_iter = v;
    }
}

fn require_model(m: Option<ModelTag>) -> CliResult<ModelTag> {
    m.ok_or_else(|| {
        CliError::Usage(format!("--model is required (one of: {})", ModelTag::known()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub input: Option<PathBuf>,
    pub model: Option<ModelTag>,
    pub alpha: f64,
    pub variant: Variant,
    pub exclude_ids: Vec<String>,
    pub data: DataConfig,
    pub solver: SolverConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: None,
            model: None,
            alpha: 0.3,
            variant: Variant::Joint,
            exclude_ids: Vec::new(),
            data: DataConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn resolve(a: &FitArgs) -> CliResult<Self> {
        let mut c: Self = load(a.common.config.as_deref(), "fit")?;
        if let Some(v) = &a.input {
            c.input = Some(v.clone());
        }
        if let Some(v) = &a.model {
            c.model = Some(parse_model(v)?);
        }
        if let Some(v) = a.alpha {
            c.alpha = v;
        }
        if let Some(v) = &a.variant {
            c.variant = parse_variant(v)?;
        }
        if let Some(v) = &a.exclude_ids {
            c.exclude_ids = v.clone();
        }
        c.data.apply(&a.data);
        apply_solver(&mut c.solver, &a.solver);
        require_model(c.model)?;
        c.data.check()?;
        if c.input.is_none() {
            return Err(CliError::Usage("an input CSV is required".into()));
        }
        Ok(c)
    }

    pub fn model(&self) -> ModelTag {
        self.model.expect("resolved config has a model")
    }
}

pub const HEART_ALPHAS: [f64; 10] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub full: Option<PathBuf>,
    pub cleaned: Option<PathBuf>,
    pub exclude_ids: Vec<String>,
    pub model: Option<ModelTag>,
    pub variant: Variant,
    pub alphas: Vec<f64>,
    pub data: DataConfig,
    pub solver: SolverConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            full: None,
            cleaned: None,
            exclude_ids: Vec::new(),
            model: None,
            variant: Variant::Conditional,
            alphas: HEART_ALPHAS.to_vec(),
            data: DataConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn resolve(a: &SweepArgs) -> CliResult<Self> {
        let mut c: Self = load(a.common.config.as_deref(), "sweep")?;
        if let Some(v) = &a.full {
            c.full = Some(v.clone());
        }
        if let Some(v) = &a.cleaned {
            c.cleaned = Some(v.clone());
        }
        if let Some(v) = &a.exclude_ids {
            c.exclude_ids = v.clone();
        }
        if let Some(v) = &a.model {
            c.model = Some(parse_model(v)?);
        }
        if let Some(v) = &a.variant {
            c.variant = parse_variant(v)?;
        }
        if let Some(v) = &a.alphas {
            c.alphas = v.clone();
        }
        c.data.apply(&a.data);
        apply_solver(&mut c.solver, &a.solver);
        require_model(c.model)?;
        c.data.check()?;
        if c.full.is_none() {
            return Err(CliError::Usage("a CSV with the full data is required".into()));
        }
        if c.cleaned.is_some() == !c.exclude_ids.is_empty() {
            return Err(CliError::Usage(
                "give exactly one of --cleaned or --exclude-ids".into(),
            ));
        }
        if c.alphas.is_empty() {
            return Err(CliError::Usage("--alphas must not be empty".into()));
        }
        Ok(c)
    }

    pub fn model(&self) -> ModelTag {
        self.model.expect("resolved config has a model")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    /// Base design; censoring and contamination are taken from the level lists.
    pub design: SimDesign,
    pub censoring_levels: Vec<f64>,
    pub contamination_levels: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            design: SimDesign::default(),
            censoring_levels: vec![0.1, 0.2],
            contamination_levels: vec![0.0, 0.05, 0.1, 0.15, 0.2],
        }
    }
}

impl SimulateConfig {
    pub fn resolve(a: &SimulateArgs) -> CliResult<Self> {
        let mut c: Self = load(a.common.config.as_deref(), "simulate")?;
        let d = &mut c.design;
        if let Some(v) = a.seed {
            d.seed = v;
        }
        if let Some(v) = a.replications {
            d.replications = v;
        }
        if let Some(v) = a.n {
            d.n = v;
        }
        if let Some(v) = &a.model {
            d.model = parse_model(v)?;
        }
        if let Some(v) = &a.alphas {
            d.alphas = v.clone();
        }
        if let Some(v) = &a.censoring_scheme {
            d.censoring_scheme = parse_named(v, "censoring scheme")?;
        }
        if let Some(v) = &a.channel {
            d.channel = parse_named(v, "contamination channel")?;
        }
        if let Some(v) = &a.censoring_levels {
            c.censoring_levels = v.clone();
        }
        if let Some(v) = &a.contamination_levels {
            c.contamination_levels = v.clone();
        }
        if c.censoring_levels.is_empty() || c.contamination_levels.is_empty() {
            return Err(CliError::Usage("level lists must not be empty".into()));
        }
        for &cens in &c.censoring_levels {
            for &cont in &c.contamination_levels {
                c.at(cens, cont).validate()?;
            }
        }
        Ok(c)
    }

    pub fn at(&self, censoring: f64, contamination: f64) -> SimDesign {
        SimDesign {
            censoring,
            contamination,
            ..self.design.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfluenceConfig {
    pub model: ModelTag,
    pub p: usize,
    pub intercept: bool,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    pub variant: Variant,
    pub grid: GridSpec,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        Self {
            model: ModelTag::Erm,
            p: 1,
            intercept: false,
            theta: vec![0.5],
            gamma: vec![1.0],
            alpha: 0.3,
            variant: Variant::Joint,
            grid: GridSpec::default(),
        }
    }
}

/// The subset of a `fit` report that `influence --fit` needs.
#[derive(Debug, Deserialize)]
struct FitFile {
    model: ModelTag,
    p: usize,
    intercept: bool,
    fit: FitParams,
}

#[derive(Debug, Deserialize)]
struct FitParams {
    theta_hat: Vec<f64>,
    gamma_hat: Option<Vec<f64>>,
}

impl InfluenceConfig {
    pub fn resolve(a: &InfluenceArgs) -> CliResult<Self> {
        let mut c: Self = load(a.common.config.as_deref(), "influence")?;
        if let Some(path) = &a.fit {
            let text = fs::read_to_string(path).map_err(CliError::io(path))?;
            let f: FitFile = serde_json::from_str(&text).map_err(|source| CliError::Json {
                path: path.clone(),
                source,
            })?;
            c.model = f.model;
            c.p = f.p;
            c.intercept = f.intercept;
            c.theta = f.fit.theta_hat;
            // a conditional fit carries no γ̂; centre the covariates at zero
            c.gamma = f.fit.gamma_hat.unwrap_or_else(|| vec![0.0; f.p]);
        }
        if let Some(v) = &a.model {
            c.model = parse_model(v)?;
        }
        if let Some(v) = a.p {
            c.p = v;
        }
        c.intercept |= a.intercept;
        if let Some(v) = &a.theta {
            c.theta = v.clone();
        }
        if let Some(v) = &a.gamma {
            c.gamma = v.clone();
        }
        if let Some(v) = a.alpha {
            c.alpha = v;
        }
        if let Some(v) = &a.variant {
            c.variant = parse_variant(v)?;
        }
        if let Some(v) = a.y_max {
            c.grid.y_max = v;
        }
        if let Some(v) = a.x_radius_max {
            c.grid.x_radius_max = v;
        }
        if let Some(v) = a.points_per_shell {
            c.grid.points_per_shell = v;
        }
        if c.gamma.len() != c.p {
            return Err(CliError::Usage(format!(
                "gamma has {} entries but p = {}",
                c.gamma.len(),
                c.p
            )));
        }
        let model = c.model.build(Design::new(c.p, c.intercept));
        model.check_theta(&c.theta)?;
        Ok(c)
    }
}
