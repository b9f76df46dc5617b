//! Experiment configuration files (TOML).
//!
//! ```toml
//! [model]
//! path = "sir.crn"
//! property = "sir.prop"
//! t_end = 120.0
//!
//! [design]
//! initial = "grid 10x10"
//! inducing = "initial"
//! n_traj = 10
//!
//! [active]
//! iterations = 2
//! strategy = "variance"
//! batch_size = 150
//!
//! [run]
//! seed = 1
//! ```
//!
//! Every other key has a default; relative paths are resolved against the
//! file's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smc_core::design::parse_grid_dims;
use smc_core::gp::{DEFAULT_JITTER, DEFAULT_LENGTH_SCALE, DEFAULT_QUADRATURE_NODES};
use smc_core::{
    parse_model, parse_property, Design, FitOptions, KernelParams, Oracle, QueryConfig, Strategy,
};

use crate::error::{Error, Result};

/// Where the inducing points come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InducingDesign {
    /// Regular grid over the normalized box.
    Grid(Vec<usize>),
    /// k-means++ centres of the distinct initial design points.
    KMeans(usize),
    /// The distinct initial design points themselves.
    Initial,
}

impl FromStr for InducingDesign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts.as_slice() {
            ["initial"] => Ok(InducingDesign::Initial),
            ["grid", dims] => parse_grid_dims(dims)
                .map(InducingDesign::Grid)
                .map_err(|e| e.to_string()),
            ["kmeans", k] => k
                .parse()
                .ok()
                .filter(|k| *k > 0)
                .map(InducingDesign::KMeans)
                .ok_or_else(|| format!("bad cluster count in `{s}`")),
            _ => Err(format!(
                "cannot parse inducing design `{s}` (expected `initial`, `grid AxB` or `kmeans K`)"
            )),
        }
    }
}

impl fmt::Display for InducingDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InducingDesign::Grid(dims) => write!(f, "{}", Design::Grid(dims.clone())),
            InducingDesign::KMeans(k) => write!(f, "kmeans {k}"),
            InducingDesign::Initial => write!(f, "initial"),
        }
    }
}

/// Which procedure `smc` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One fit with an inducing point at every distinct training location.
    Dense,
    /// One fit with the configured inducing points.
    Sparse,
    /// Initial fit followed by query/update rounds.
    Active,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Dense => "dense",
            Mode::Sparse => "sparse",
            Mode::Active => "active",
        })
    }
}

/// Everything an experiment needs besides the model and property.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub initial: Design,
    /// Trajectories per initial design point.
    pub n_traj: usize,
    pub inducing: InducingDesign,
    pub kernel: KernelParams,
    pub fit: FitOptions,
    pub active_iterations: usize,
    /// Pool, clustering and batch settings; the seed is derived per round.
    pub query: QueryConfig,
    /// Trajectories per queried point.
    pub active_n_traj: usize,
    pub eval_grid: Vec<usize>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Active,
            initial: Design::Grid(vec![10, 10]),
            n_traj: 10,
            inducing: InducingDesign::Initial,
            kernel: KernelParams::default(),
            fit: FitOptions::default(),
            active_iterations: 2,
            query: QueryConfig::default(),
            active_n_traj: 10,
            eval_grid: vec![20, 20],
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.initial.is_empty() {
            return bad("initial design has no points".into());
        }
        if let Design::Grid(d) = &self.initial {
            if d.len() != dim {
                return bad(format!("initial grid has {} axes, model has {dim}", d.len()));
            }
        }
        if let InducingDesign::Grid(d) = &self.inducing {
            if d.len() != dim {
                return bad(format!("inducing grid has {} axes, model has {dim}", d.len()));
            }
        }
        if self.eval_grid.len() != dim {
            return bad(format!(
                "evaluation grid has {} axes, model has {dim}",
                self.eval_grid.len()
            ));
        }
        if self.n_traj == 0 || self.active_n_traj == 0 {
            return bad("trajectory counts must be positive".into());
        }
        if self.mode == Mode::Active && self.active_iterations == 0 {
            return bad("active mode needs at least one iteration".into());
        }
        self.kernel
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.fit
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.query
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub active: ActiveSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub path: PathBuf,
    /// File holding the property formula.
    pub property: PathBuf,
    pub t_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub initial: String,
    pub inducing: String,
    pub n_traj: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            initial: "grid 10x10".into(),
            inducing: "initial".into(),
            n_traj: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub length_scale: f64,
    pub jitter: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            length_scale: DEFAULT_LENGTH_SCALE,
            jitter: DEFAULT_JITTER,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub quadrature_nodes: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActiveSection {
    pub iterations: usize,
    pub strategy: String,
    pub pool_size: usize,
    /// Defaults to three times the batch size.
    pub n_clusters: Option<usize>,
    pub batch_size: usize,
    pub n_traj: usize,
}

impl Default for ActiveSection {
    fn default() -> Self {
        Self {
            iterations: 2,
            strategy: "variance".into(),
            pool_size: 1000,
            n_clusters: None,
            batch_size: 150,
            n_traj: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub grid: String,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            grid: "20x20".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub grid: String,
    pub runs: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            grid: "20x20".into(),
            runs: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub mode: Mode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: Mode::Active,
        }
    }
}

fn grid_spec(s: &str, what: &str) -> Result<Vec<usize>> {
    parse_grid_dims(s).map_err(|_| Error::Config(format!("bad {what} grid `{s}`")))
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ConfigFile = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.model.path, &mut cfg.model.property] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn oracle(&self) -> Result<Oracle> {
        load_oracle(&self.model.path, &self.model.property, self.model.t_end)
    }

    pub fn baseline_grid(&self) -> Result<Vec<usize>> {
        grid_spec(&self.baseline.grid, "baseline")
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg_err = |e: String| Error::Config(e);
        let initial: Design = self
            .design
            .initial
            .parse()
            .map_err(|e: smc_core::design::DesignError| cfg_err(e.to_string()))?;
        let inducing: InducingDesign = self.design.inducing.parse().map_err(cfg_err)?;
        let kernel = KernelParams::new(self.kernel.length_scale, self.kernel.jitter)
            .map_err(|e| Error::Config(e.to_string()))?;
        let strategy: Strategy = self
            .active
            .strategy
            .parse()
            .map_err(|e: smc_core::QueryError| Error::Config(e.to_string()))?;
        Ok(ExperimentConfig {
            mode: self.run.mode,
            initial,
            n_traj: self.design.n_traj,
            inducing,
            kernel,
            fit: FitOptions {
                max_iterations: self.fit.max_iterations,
                tolerance: self.fit.tolerance,
                quadrature_nodes: self.fit.quadrature_nodes,
                seed: self.run.seed,
                ..FitOptions::default()
            },
            active_iterations: self.active.iterations,
            query: QueryConfig {
                pool_size: self.active.pool_size,
                n_clusters: self
                    .active
                    .n_clusters
                    .unwrap_or(3 * self.active.batch_size),
                batch_size: self.active.batch_size,
                strategy,
                seed: self.run.seed,
            },
            active_n_traj: self.active.n_traj,
            eval_grid: grid_spec(&self.evaluation.grid, "evaluation")?,
            seed: self.run.seed,
        })
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a model file and a property file into an [`Oracle`].
pub fn load_oracle(model: &Path, property: &Path, t_end: f64) -> Result<Oracle> {
    let text = read_text(property)?;
    load_oracle_with_formula(model, text.trim(), t_end)
}

pub fn load_oracle_with_formula(model: &Path, formula: &str, t_end: f64) -> Result<Oracle> {
    let text = read_text(model)?;
    let model = parse_model(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", model.display())))?;
    let property = parse_property(formula, &model.species)
        .map_err(|e| Error::Parse(format!("property `{formula}`: {e}")))?;
    Oracle::new(model, property, t_end).map_err(|e| Error::Config(e.to_string()))
}
