//! JSON documents for profiles and beliefs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Environment, Message, StateSpace};
use crate::scalar::Scalar;

use super::grid::TGrid;
use super::profile::{BeliefMap, StrategyProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub i: usize,
    pub cell: usize,
    pub t_mid: f64,
    pub message: Message,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub environment: String,
    pub n: usize,
    pub cells: usize,
    pub t_max: f64,
    pub sigma: Vec<SigmaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefRow {
    pub message: Message,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefDoc {
    pub off_path: f64,
    pub beliefs: Vec<BeliefRow>,
}

impl ProfileDoc {
    pub fn from_profile<S: Scalar>(profile: &StrategyProfile<S>, grid: &TGrid<S>) -> Self {
        let sigma = profile
            .rows()
            .flat_map(|(i, c, row)| {
                let t_mid = grid.mid(c).to_f64_lossy();
                row.iter().map(move |(m, p)| SigmaRow { i, cell: c, t_mid, message: *m, prob: p.to_f64_lossy() })
            })
            .collect();
        Self {
            environment: profile.environment().to_string(),
            n: profile.n(),
            cells: profile.cells(),
            t_max: grid.t_max().to_f64_lossy(),
            sigma,
        }
    }

    /// Rebuilds the profile on `grid`, which must have the same resolution.
    pub fn to_profile<S: Scalar>(&self, grid: &TGrid<S>) -> Result<StrategyProfile<S>> {
        let env: Environment = self.environment.parse()?;
        let states = StateSpace::new(self.n)?;
        if self.cells != grid.resolution() {
            return Err(Error::Shape(format!(
                "profile was written for {} cells, grid has {}",
                self.cells,
                grid.resolution()
            )));
        }
        let mut rows: Vec<Vec<(Message, S)>> = vec![Vec::new(); self.n * self.cells];
        for r in &self.sigma {
            if !states.contains(r.i) || r.cell >= self.cells {
                return Err(Error::Shape(format!("sigma row ({}, {}) outside the profile", r.i, r.cell)));
            }
            rows[(r.i - 1) * self.cells + r.cell].push((r.message, S::from_f64_lossy(r.prob)));
        }
        StrategyProfile::new(env, states, self.cells, rows)
    }
}

impl BeliefDoc {
    pub fn from_beliefs<S: Scalar>(beliefs: &BeliefMap<S>) -> Self {
        Self {
            off_path: beliefs.off_path().to_f64_lossy(),
            beliefs: beliefs.iter().map(|(message, r)| BeliefRow { message, rho: r.to_f64_lossy() }).collect(),
        }
    }

    pub fn to_beliefs<S: Scalar>(&self) -> Result<BeliefMap<S>> {
        BeliefMap::from_entries(
            self.beliefs.iter().map(|b| (b.message, S::from_f64_lossy(b.rho))),
            S::from_f64_lossy(self.off_path),
        )
    }
}

pub fn profile_to_json<S: Scalar>(profile: &StrategyProfile<S>, grid: &TGrid<S>) -> String {
    serde_json::to_string_pretty(&ProfileDoc::from_profile(profile, grid)).expect("profile documents serialize")
}

pub fn profile_from_json<S: Scalar>(text: &str, grid: &TGrid<S>) -> Result<StrategyProfile<S>> {
    let doc: ProfileDoc = serde_json::from_str(text).map_err(|e| Error::Data(e.to_string()))?;
    doc.to_profile(grid)
}

pub fn beliefs_to_json<S: Scalar>(beliefs: &BeliefMap<S>) -> String {
    serde_json::to_string_pretty(&BeliefDoc::from_beliefs(beliefs)).expect("belief documents serialize")
}

pub fn beliefs_from_json<S: Scalar>(text: &str) -> Result<BeliefMap<S>> {
    let doc: BeliefDoc = serde_json::from_str(text).map_err(|e| Error::Data(e.to_string()))?;
    doc.to_beliefs()
}
