//! Run configuration: defaults, then the config file, then flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vaguelie::equilibrium::{SolverOptions, DEFAULT_RESOLUTION};
use vaguelie::simulation::StageOrder;
use vaguelie::{CostSpec, Environment, ModelParams, StateSpace, TypeDistribution};

use crate::error::CliError;

pub const CONFIG_ENV: &str = "VAGUELIE_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub variant: Option<String>,
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSection {
    pub variant: Option<String>,
}

/// Every key is optional. Nested sections are written with dotted keys,
/// e.g. `cost.kappa = 0.1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub env: Option<String>,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub t_max: Option<f64>,
    pub t_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistSection>,
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub seed_profile: Option<String>,
    pub off_path: Option<f64>,
    pub agents: Option<usize>,
    pub seed: Option<u64>,
    pub stage_order: Option<String>,
    pub format: Option<String>,
    pub dollars: Option<bool>,
    pub timestamp: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Model keys of `params`, suitable for writing back to a file.
    pub fn from_params(params: &ModelParams<f64>) -> Result<Self, CliError> {
        let (variant, kappa) = match &params.cost {
            CostSpec::Zero => ("zero", None),
            CostSpec::Linear { kappa } => ("linear", Some(*kappa)),
            CostSpec::Quadratic { kappa } => ("quadratic", Some(*kappa)),
            CostSpec::Table { .. } => return Err(CliError::Config("cost tables have no flat config form".into())),
        };
        if !matches!(params.dist, TypeDistribution::Uniform { .. }) {
            return Err(CliError::Config("tabulated distributions have no flat config form".into()));
        }
        Ok(Self {
            n: Some(params.n()),
            gamma: Some(params.gamma),
            t_max: Some(params.t_max()),
            cost: Some(CostSection { variant: Some(variant.into()), kappa }),
            dist: Some(DistSection { variant: Some("uniform".into()) }),
            ..Self::default()
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// Keys set in `other` replace ours.
    pub fn overlay(mut self, other: FileConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(env, n, gamma, t_max, t_grid, damping, max_iter, tol, seed_profile, off_path, agents, seed, stage_order, format, dollars, timestamp);
        if let Some(c) = other.cost {
            let mine = self.cost.get_or_insert_with(CostSection::default);
            if c.variant.is_some() {
                mine.variant = c.variant;
            }
            if c.kappa.is_some() {
                mine.kappa = c.kappa;
            }
        }
        if let Some(d) = other.dist {
            if d.variant.is_some() {
                self.dist = Some(d);
            }
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Table,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            other => Err(CliError::Config(format!("unknown format '{other}' (expected csv, json or table)"))),
        }
    }
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub env: Option<Environment>,
    pub params: ModelParams<f64>,
    pub t_grid: usize,
    pub solver: SolverOptions<f64>,
    pub seed_profile: Option<String>,
    pub agents: usize,
    pub seed: u64,
    pub stage_order: StageOrder,
    pub format: Option<Format>,
    pub dollars: bool,
    pub timestamp: bool,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub beliefs: Option<PathBuf>,
    pub paired: bool,
}

pub struct IoPaths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub beliefs: Option<PathBuf>,
    pub paired: bool,
}

fn build_params(cfg: &FileConfig) -> Result<ModelParams<f64>, CliError> {
    let n = cfg.n.unwrap_or(10);
    let gamma = cfg.gamma.unwrap_or(2.0);
    let states = StateSpace::new(n)?;
    let cost_section = cfg.cost.clone().unwrap_or_default();
    let kappa = cost_section.kappa.unwrap_or(0.1);
    let cost = match cost_section.variant.as_deref().unwrap_or("linear") {
        "zero" => CostSpec::Zero,
        "linear" => CostSpec::linear(kappa),
        "quadratic" => CostSpec::quadratic(kappa),
        other => {
            return Err(CliError::Config(format!("unknown cost.variant '{other}' (expected zero, linear or quadratic)")))
        }
    };
    let t_max = cfg.t_max.unwrap_or(n as f64 + gamma + 1.0);
    let dist = match cfg.dist.as_ref().and_then(|d| d.variant.as_deref()).unwrap_or("uniform") {
        "uniform" => TypeDistribution::uniform(t_max)?,
        other => return Err(CliError::Config(format!("unknown dist.variant '{other}' (expected uniform)"))),
    };
    let params = ModelParams::new(states, gamma, cost, dist)?;
    if let Some(v) = params.cost.validate(states).violation {
        eprintln!("warning: cost function fails the {} assumption: {}", v.assumption.label(), v.detail);
    }
    Ok(params)
}

impl RunConfig {
    pub fn resolve(cfg: FileConfig, io: IoPaths) -> Result<Self, CliError> {
        let params = build_params(&cfg)?;
        let env = cfg.env.as_deref().map(Environment::from_str).transpose()?;
        let t_grid = cfg.t_grid.unwrap_or(DEFAULT_RESOLUTION);
        if t_grid == 0 {
            return Err(CliError::Model(vaguelie::Error::Validation("t_grid must be at least 1".into())));
        }
        let mut solver = SolverOptions::<f64>::default();
        if let Some(d) = cfg.damping {
            solver.damping = d;
        }
        if let Some(m) = cfg.max_iter {
            solver.max_iter = m;
        }
        if let Some(t) = cfg.tol {
            solver.tol = t;
        }
        if let Some(o) = cfg.off_path {
            solver.off_path = o;
        }
        solver.check()?;
        let stage_order = cfg.stage_order.as_deref().map(StageOrder::from_str).transpose()?.unwrap_or(StageOrder::Randomized);
        Ok(Self {
            env,
            params,
            t_grid,
            solver,
            seed_profile: cfg.seed_profile,
            agents: cfg.agents.unwrap_or(1000),
            seed: cfg.seed.unwrap_or(0),
            stage_order,
            format: cfg.format.as_deref().map(Format::from_str).transpose()?,
            dollars: cfg.dollars.unwrap_or(false),
            timestamp: cfg.timestamp.unwrap_or(true),
            input: io.input,
            output: io.output,
            profile: io.profile,
            beliefs: io.beliefs,
            paired: io.paired,
        })
    }
}
