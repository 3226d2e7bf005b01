//! Monte Carlo populations drawn from strategy profiles.
//!
//! Randomness: subject `k` (zero-based) draws from ChaCha20 keyed by the run
//! seed with stream number `k`, so every subject's draws are independent of
//! thread count and of how many other subjects are simulated.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{StrategyProfile, TGrid};
use crate::error::{Error, Result};
use crate::model::{Anonymity, Environment, Message, ModelParams, Restriction};
use crate::scalar::Scalar;

/// Which task a record comes from; the tokens match [`Restriction`].
pub type Stage = Restriction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    /// Each subject plays the two stages in a random order.
    Randomized,
    /// Restricted first.
    Fixed,
}

impl FromStr for StageOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "randomized" => Ok(StageOrder::Randomized),
            "fixed" => Ok(StageOrder::Fixed),
            other => Err(Error::Parameter(format!("unknown stage order '{other}'"))),
        }
    }
}

/// How each subject's aversion is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AversionDraw {
    /// Inverse-CDF sampling from the model distribution.
    Distribution,
    /// Every subject gets this value.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_agents: usize,
    pub seed: u64,
    pub environment: Environment,
    pub stage_order: StageOrder,
    /// Leave `true_state` empty in the records; the sidecar keeps it.
    pub blank_true_state: bool,
    pub aversion: AversionDraw,
}

impl SimConfig {
    pub fn new(n_agents: usize, seed: u64, environment: Environment) -> Result<Self> {
        let cfg = Self {
            n_agents,
            seed,
            environment,
            stage_order: StageOrder::Randomized,
            blank_true_state: false,
            aversion: AversionDraw::Distribution,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Validation("n_agents must be at least 1".into()));
        }
        if let AversionDraw::Fixed(t) = self.aversion {
            if !(t >= 0.0) {
                return Err(Error::Validation(format!("fixed aversion must be nonnegative, got {t}")));
            }
        }
        Ok(())
    }
}

/// One observed report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub subject_id: String,
    #[serde(rename = "environment")]
    pub anonymity: Anonymity,
    pub stage: Stage,
    pub true_state: Option<usize>,
    pub message: Message,
    pub realized_payoff: Option<usize>,
}

impl ReportRecord {
    pub fn environment(&self) -> Environment {
        Environment { anonymity: self.anonymity, restriction: self.stage }
    }

    pub fn is_truthful(&self) -> Option<bool> {
        self.true_state.map(|i| self.message.contains(i))
    }
}

/// Ground truth retained for every record, in record order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTruth {
    pub subject_id: String,
    pub stage: Stage,
    pub true_state: usize,
    pub aversion: f64,
    pub cell: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    pub records: Vec<ReportRecord>,
    pub sidecar: Vec<AgentTruth>,
}

impl fmt::Display for StageOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageOrder::Randomized => "randomized",
            StageOrder::Fixed => "fixed",
        })
    }
}

/// The generator of subject `index` under `seed`.
pub fn subject_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn subject_id(index: usize, n_agents: usize) -> String {
    let width = n_agents.to_string().len().max(6);
    format!("s{:0width$}", index + 1)
}

fn draw_aversion<S: Scalar, R: Rng>(rng: &mut R, params: &ModelParams<S>, cfg: &SimConfig) -> f64 {
    match cfg.aversion {
        AversionDraw::Distribution => params.dist.quantile(rng.gen::<f64>()),
        AversionDraw::Fixed(t) => t,
    }
}

fn draw_report<S: Scalar, R: Rng>(
    rng: &mut R,
    profile: &StrategyProfile<S>,
    grid: &TGrid<S>,
    t: f64,
) -> (usize, usize, Message, usize) {
    let n = profile.n();
    let i = rng.gen_range(1..=n);
    let cell = grid.locate(t);
    let row = profile.row(i, cell);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut pick = row[row.len() - 1].0;
    for (m, p) in row {
        acc += p.to_f64_lossy();
        if u < acc {
            pick = *m;
            break;
        }
    }
    let k = rng.gen_range(0..pick.len());
    let payoff = pick.members().nth(k).expect("index within message length");
    (i, cell, pick, payoff)
}

fn check_inputs<S: Scalar>(profile: &StrategyProfile<S>, params: &ModelParams<S>, grid: &TGrid<S>) -> Result<()> {
    if profile.states() != params.states {
        return Err(Error::Shape(format!("profile has {} states, parameters have {}", profile.n(), params.n())));
    }
    if profile.cells() != grid.resolution() {
        return Err(Error::Shape(format!(
            "profile has {} cells but the grid has {}",
            profile.cells(),
            grid.resolution()
        )));
    }
    Ok(())
}

/// One report per agent: state uniform on `1..=N`, aversion from the model
/// distribution, message from the agent's row, payoff uniform over the message.
pub fn simulate_population<S: Scalar>(
    profile: &StrategyProfile<S>,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
    config: &SimConfig,
) -> Result<SimulationOutput> {
    config.check()?;
    check_inputs(profile, params, grid)?;
    if profile.environment() != config.environment {
        return Err(Error::Shape(format!(
            "profile is for {} but the simulation is configured for {}",
            profile.environment(),
            config.environment
        )));
    }
    let env = config.environment;
    let drawn: Vec<(ReportRecord, AgentTruth)> = (0..config.n_agents)
        .into_par_iter()
        .map(|k| {
            let mut rng = subject_rng(config.seed, k);
            let t = draw_aversion(&mut rng, params, config);
            let (i, cell, message, payoff) = draw_report(&mut rng, profile, grid, t);
            let id = subject_id(k, config.n_agents);
            let record = ReportRecord {
                subject_id: id.clone(),
                anonymity: env.anonymity,
                stage: env.restriction,
                true_state: if config.blank_true_state { None } else { Some(i) },
                message,
                realized_payoff: Some(payoff),
            };
            (record, AgentTruth { subject_id: id, stage: env.restriction, true_state: i, aversion: t, cell })
        })
        .collect();
    let (records, sidecar) = drawn.into_iter().unzip();
    Ok(SimulationOutput { records, sidecar })
}

/// Two reports per subject, one per stage, with a single aversion draw and
/// independent state draws. Records are grouped by subject in play order.
pub fn paired_session<S: Scalar>(
    profile_r: &StrategyProfile<S>,
    profile_ur: &StrategyProfile<S>,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
    config: &SimConfig,
) -> Result<SimulationOutput> {
    config.check()?;
    check_inputs(profile_r, params, grid)?;
    check_inputs(profile_ur, params, grid)?;
    if !profile_r.environment().is_restricted() || profile_ur.environment().is_restricted() {
        return Err(Error::Shape("paired sessions need a restricted and an unrestricted profile".into()));
    }
    let anonymity = config.environment.anonymity;
    if profile_r.environment().anonymity != anonymity || profile_ur.environment().anonymity != anonymity {
        return Err(Error::Shape(format!("both profiles must be {}", anonymity.token())));
    }
    let pairs: Vec<Vec<(ReportRecord, AgentTruth)>> = (0..config.n_agents)
        .into_par_iter()
        .map(|k| {
            let mut rng = subject_rng(config.seed, k);
            let t = draw_aversion(&mut rng, params, config);
            let restricted_first = match config.stage_order {
                StageOrder::Fixed => true,
                StageOrder::Randomized => rng.gen_bool(0.5),
            };
            let order = if restricted_first { [profile_r, profile_ur] } else { [profile_ur, profile_r] };
            let id = subject_id(k, config.n_agents);
            order
                .into_iter()
                .map(|profile| {
                    let stage = profile.environment().restriction;
                    let (i, cell, message, payoff) = draw_report(&mut rng, profile, grid, t);
                    (
                        ReportRecord {
                            subject_id: id.clone(),
                            anonymity,
                            stage,
                            true_state: if config.blank_true_state { None } else { Some(i) },
                            message,
                            realized_payoff: Some(payoff),
                        },
                        AgentTruth { subject_id: id.clone(), stage, true_state: i, aversion: t, cell },
                    )
                })
                .collect()
        })
        .collect();
    let (records, sidecar) = pairs.into_iter().flatten().unzip();
    Ok(SimulationOutput { records, sidecar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_anonymous_restricted, solve_anonymous_unrestricted};

    fn setup() -> (ModelParams<f64>, TGrid<f64>) {
        let p = ModelParams::default();
        let g = TGrid::midpoint(&p.dist, 400).unwrap();
        (p, g)
    }

    #[test]
    fn zero_agents_rejected() {
        assert!(matches!(SimConfig::new(0, 1, Environment::A_R), Err(Error::Validation(_))));
    }

    #[test]
    fn environment_mismatch_is_a_shape_error() {
        let (p, g) = setup();
        let prof = solve_anonymous_restricted(&p, &g).unwrap();
        let cfg = SimConfig::new(5, 1, Environment::NA_R).unwrap();
        assert!(matches!(simulate_population(&prof, &p, &g, &cfg), Err(Error::Shape(_))));
    }

    #[test]
    fn always_top_pays_top() {
        let (p, g) = setup();
        let prof = StrategyProfile::<f64>::pure(Environment::A_R, p.states, 400, |_, _| Message::singleton(10)).unwrap();
        let out = simulate_population(&prof, &p, &g, &SimConfig::new(500, 3, Environment::A_R).unwrap()).unwrap();
        assert!(out.records.iter().all(|r| r.realized_payoff == Some(10)));
    }

    #[test]
    fn pair_payoffs_split_evenly() {
        let (p, g) = setup();
        let pair = Message::interval(1, 2);
        let prof = StrategyProfile::<f64>::pure(Environment::A_UR, p.states, 400, |_, _| pair).unwrap();
        let out = simulate_population(&prof, &p, &g, &SimConfig::new(20_000, 9, Environment::A_UR).unwrap()).unwrap();
        let ones = out.records.iter().filter(|r| r.realized_payoff == Some(1)).count() as f64 / 20_000.0;
        assert!((ones - 0.5).abs() < 0.02, "{ones}");
        assert!(out.records.iter().all(|r| r.message.contains(r.realized_payoff.unwrap())));
    }

    #[test]
    fn truthful_mean_report() {
        let (p, g) = setup();
        let prof = StrategyProfile::truthful(Environment::A_R, p.states, 400).unwrap();
        let out = simulate_population(&prof, &p, &g, &SimConfig::new(1_000_000, 11, Environment::A_R).unwrap()).unwrap();
        let mean = out.records.iter().map(|r| r.message.expected_payoff::<f64>()).sum::<f64>() / 1e6;
        assert!((mean - 5.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn reproducible_and_prefix_stable() {
        let (p, g) = setup();
        let prof = solve_anonymous_unrestricted(&p, &g).unwrap();
        let a = simulate_population(&prof, &p, &g, &SimConfig::new(300, 5, Environment::A_UR).unwrap()).unwrap();
        let b = simulate_population(&prof, &p, &g, &SimConfig::new(300, 5, Environment::A_UR).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = simulate_population(&prof, &p, &g, &SimConfig::new(1000, 5, Environment::A_UR).unwrap()).unwrap();
        for (x, y) in a.sidecar.iter().zip(&c.sidecar) {
            assert_eq!((x.true_state, x.aversion), (y.true_state, y.aversion));
        }
    }

    #[test]
    fn blanking_keeps_sidecar() {
        let (p, g) = setup();
        let prof = StrategyProfile::truthful(Environment::NA_R, p.states, 400).unwrap();
        let mut cfg = SimConfig::new(50, 2, Environment::NA_R).unwrap();
        cfg.blank_true_state = true;
        let out = simulate_population(&prof, &p, &g, &cfg).unwrap();
        assert!(out.records.iter().all(|r| r.true_state.is_none()));
        assert!(out.records.iter().zip(&out.sidecar).all(|(r, s)| r.message == Message::singleton(s.true_state)));
    }

    #[test]
    fn paired_session_shape() {
        let (p, g) = setup();
        let r = solve_anonymous_restricted(&p, &g).unwrap();
        let u = solve_anonymous_unrestricted(&p, &g).unwrap();
        let out = paired_session(&r, &u, &p, &g, &SimConfig::new(1, 4, Environment::A_UR).unwrap()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].subject_id, out.records[1].subject_id);
        assert_ne!(out.records[0].stage, out.records[1].stage);
        assert_eq!(out.sidecar[0].aversion, out.sidecar[1].aversion);

        assert!(paired_session(&u, &r, &p, &g, &SimConfig::new(1, 4, Environment::A_UR).unwrap()).is_err());
    }

    #[test]
    fn zero_aversion_lies_everywhere() {
        let (p, g) = setup();
        let r = solve_anonymous_restricted(&p, &g).unwrap();
        let u = solve_anonymous_unrestricted(&p, &g).unwrap();
        let mut cfg = SimConfig::new(2000, 8, Environment::A_UR).unwrap();
        cfg.aversion = AversionDraw::Fixed(0.0);
        let out = paired_session(&r, &u, &p, &g, &cfg).unwrap();
        for rec in &out.records {
            let i = rec.true_state.unwrap();
            if i < 10 {
                assert_eq!(rec.is_truthful(), Some(false), "{rec:?}");
            }
        }
    }
}
