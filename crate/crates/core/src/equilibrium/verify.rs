use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message_space::{environment_messages, ovm};
use crate::model::{Environment, Message, ModelParams};
use crate::scalar::Scalar;

use super::grid::TGrid;
use super::profile::{check_grid, liar_mass, posterior_beliefs, BeliefMap, StrategyProfile};

/// A played message and the better reply available to the same type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub state: usize,
    pub cell: usize,
    pub t: f64,
    pub played: Message,
    pub better: Message,
    pub gain: f64,
}

/// Outcome of an equilibrium check or a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub converged: bool,
    pub iterations: usize,
    /// Largest on-path gap between the beliefs and the recomputed posterior
    /// (for solver runs, also the last belief step).
    pub belief_residual: f64,
    /// Largest utility shortfall of a played message against the best reply.
    pub incentive_residual: f64,
    pub normalization_residual: f64,
    pub liar_mass: f64,
    pub worst_deviation: Option<Deviation>,
}

impl EquilibriumReport {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let mut kv = vec![
            ("converged", self.converged.to_string()),
            ("iterations", self.iterations.to_string()),
            ("belief_residual", format!("{:e}", self.belief_residual)),
            ("incentive_residual", format!("{:e}", self.incentive_residual)),
            ("normalization_residual", format!("{:e}", self.normalization_residual)),
            ("liar_mass", format!("{}", self.liar_mass)),
        ];
        if let Some(d) = &self.worst_deviation {
            kv.push(("worst_deviation.state", d.state.to_string()));
            kv.push(("worst_deviation.t", format!("{}", d.t)));
            kv.push(("worst_deviation.played", d.played.to_string()));
            kv.push(("worst_deviation.better", d.better.to_string()));
            kv.push(("worst_deviation.gain", format!("{}", d.gain)));
        }
        kv
    }
}

impl fmt::Display for EquilibriumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.key_values() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Belief-adjusted material value of every available message for one state:
/// utility is `stat - t` for lies and `stat` for truthful messages.
pub(crate) struct StateTable<S> {
    pub stats: Vec<S>,
    pub best_truth: Option<(usize, S)>,
    pub best_lie: Option<(usize, S)>,
}

pub(crate) fn state_table<S: Scalar, B: Fn(usize) -> S>(
    i: usize,
    messages: &[Message],
    params: &ModelParams<S>,
    env: Environment,
    rho: B,
) -> StateTable<S> {
    let social = !env.is_anonymous();
    let mut stats = Vec::with_capacity(messages.len());
    let mut best_truth: Option<(usize, S)> = None;
    let mut best_lie: Option<(usize, S)> = None;
    for (k, m) in messages.iter().enumerate() {
        let mut s = params.material_value(i, m);
        if social {
            s = s + params.gamma * rho(k);
        }
        stats.push(s);
        let slot = if m.contains(i) { &mut best_truth } else { &mut best_lie };
        // ties: higher mean, then canonical order
        let replace = match slot {
            None => true,
            Some((b, v)) => {
                s > *v || (s == *v && m.expected_payoff::<S>() > messages[*b].expected_payoff::<S>())
            }
        };
        if replace {
            *slot = Some((k, s));
        }
    }
    StateTable { stats, best_truth, best_lie }
}

impl<S: Scalar> StateTable<S> {
    pub fn utility(&self, k: usize, lie: bool, t: S) -> S {
        if lie {
            self.stats[k] - t
        } else {
            self.stats[k]
        }
    }

    /// Best attainable utility at aversion `t` and the message attaining it.
    pub fn best(&self, t: S) -> (usize, S) {
        match (self.best_truth, self.best_lie) {
            (Some((kt, vt)), Some((kl, vl))) => {
                if vt >= vl - t {
                    (kt, vt)
                } else {
                    (kl, vl - t)
                }
            }
            (Some((kt, vt)), None) => (kt, vt),
            (None, Some((kl, vl))) => (kl, vl - t),
            (None, None) => unreachable!("every state has at least one available message"),
        }
    }
}

pub(crate) fn message_index(messages: &[Message], m: &Message) -> Option<usize> {
    messages.binary_search(m).ok()
}

/// Checks optimality of every played message, normalization, and consistency
/// of on-path beliefs with Bayes' rule. Failures are reported, not raised.
pub fn check_equilibrium<S: Scalar>(
    profile: &StrategyProfile<S>,
    beliefs: &BeliefMap<S>,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
    tol: S,
) -> Result<EquilibriumReport> {
    check_grid(profile, grid)?;
    if profile.states() != params.states {
        return Err(Error::Shape(format!("profile has {} states, parameters have {}", profile.n(), params.n())));
    }
    let env = profile.environment();
    let messages = environment_messages(env, params.states)?;
    let rho: Vec<S> = messages.iter().map(|m| beliefs.get(m)).collect();

    let per_state: Vec<(S, Option<Deviation>)> = params
        .states
        .states()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            let table = state_table(i, &messages, params, env, |k| rho[k]);
            let mut worst = S::zero();
            let mut dev: Option<Deviation> = None;
            for c in 0..grid.resolution() {
                let t = grid.mid(c);
                let (kb, best) = table.best(t);
                for (m, p) in profile.row(i, c) {
                    if *p <= S::zero() {
                        continue;
                    }
                    let k = message_index(&messages, m).expect("profile messages are validated against the environment");
                    let gap = best - table.utility(k, !m.contains(i), t);
                    if gap > worst {
                        worst = gap;
                        dev = Some(Deviation {
                            state: i,
                            cell: c,
                            t: t.to_f64_lossy(),
                            played: *m,
                            better: messages[kb],
                            gain: gap.to_f64_lossy(),
                        });
                    }
                }
            }
            (worst, dev)
        })
        .collect();

    let mut incentive = S::zero();
    let mut worst_deviation = None;
    for (w, d) in per_state {
        if w > incentive {
            incentive = w;
            worst_deviation = d;
        }
    }

    let posterior = posterior_beliefs(profile, grid, beliefs.off_path())?;
    let belief_residual = posterior
        .iter()
        .map(|(m, r)| (beliefs.get(&m) - r).abs())
        .fold(S::zero(), |a, b| a.max_of(b));
    let normalization_residual = profile.normalization_residual();
    let converged = incentive <= tol && belief_residual <= tol && normalization_residual <= tol.to_f64_lossy().max(1e-9);
    Ok(EquilibriumReport {
        converged,
        iterations: 0,
        belief_residual: belief_residual.to_f64_lossy(),
        incentive_residual: incentive.to_f64_lossy(),
        normalization_residual,
        liar_mass: liar_mass(profile, grid)?.to_f64_lossy(),
        worst_deviation,
    })
}

/// Every message within the tie tolerance of the best utility for type
/// `(i, t)`, in canonical order.
pub fn best_response<S: Scalar>(
    i: usize,
    t: S,
    beliefs: &BeliefMap<S>,
    env: Environment,
    params: &ModelParams<S>,
) -> Result<Vec<Message>> {
    params.states.check_state(i)?;
    let messages = environment_messages(env, params.states)?;
    let utilities: Vec<S> = messages.iter().map(|m| params.utility_in(env, i, m, t, beliefs.get(m))).collect();
    let best = utilities.iter().copied().fold(utilities[0], |a, b| a.max_of(b));
    let floor = best - S::tie_tolerance();
    Ok(messages.into_iter().zip(utilities).filter(|(_, u)| *u >= floor).map(|(m, _)| m).collect())
}

/// Result of checking the interval-equilibrium conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example2Report {
    pub holds: bool,
    /// Smallest margin of a truth-teller's interval over its optimal vague
    /// deviation; `None` when nobody tells the truth.
    pub truth_teller_margin: Option<f64>,
    /// Smallest margin of a liar's interval over the best message outside the
    /// interval family; `None` when nobody lies.
    pub liar_margin: Option<f64>,
    pub worst_state: Option<usize>,
    pub worst_cell: Option<usize>,
}

/// Checks a profile in which everyone reports some `[k, N]`, with beliefs
/// zeroed outside that family: truth-tellers must weakly prefer their interval
/// to their optimal vague message, liars theirs to every message outside the
/// family.
pub fn verify_example2<S: Scalar>(
    profile: &StrategyProfile<S>,
    beliefs: &BeliefMap<S>,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
    tol: S,
) -> Result<Example2Report> {
    check_grid(profile, grid)?;
    let n = params.n();
    if profile.states() != params.states {
        return Err(Error::Shape(format!("profile has {} states, parameters have {}", profile.n(), n)));
    }
    let is_upper = |m: &Message| m.highest() == n && m.len() == n - m.lowest() + 1;
    for (i, c, row) in profile.rows() {
        if let Some((m, _)) = row.iter().find(|(m, p)| *p > S::zero() && !is_upper(m)) {
            return Err(Error::Shape(format!("state {i}, cell {c} plays {m}, which is not of the form [k, N]")));
        }
    }
    let rho = |m: &Message| if is_upper(m) { beliefs.get(m) } else { S::zero() };
    let outside: Vec<Message> =
        crate::message_space::enumerate_messages(params.states)?.into_iter().filter(|m| !is_upper(m)).collect();

    let mut truth_margin: Option<S> = None;
    let mut liar_margin: Option<S> = None;
    let mut worst: Option<(S, usize, usize)> = None;
    for i in params.states.states() {
        let ovm_i = ovm(i, params.states);
        let best_outside_value = outside
            .iter()
            .map(|m| (params.utility_anonymous(i, m, S::zero()), m.contains(i)))
            .collect::<Vec<_>>();
        for c in 0..grid.resolution() {
            let t = grid.mid(c);
            for (m, p) in profile.row(i, c) {
                if *p <= S::zero() {
                    continue;
                }
                let lhs = params.utility(i, m, t, rho(m));
                let margin = if m.contains(i) {
                    let rhs = params.utility(i, &ovm_i, t, rho(&ovm_i));
                    let d = lhs - rhs;
                    truth_margin = Some(truth_margin.map_or(d, |a| a.min_of(d)));
                    d
                } else {
                    let rhs = best_outside_value
                        .iter()
                        .map(|(u, truthful)| if *truthful { *u } else { *u - t })
                        .fold(None::<S>, |a, u| Some(a.map_or(u, |a| a.max_of(u))))
                        .expect("N >= 2 leaves messages outside the interval family");
                    let d = lhs - rhs;
                    liar_margin = Some(liar_margin.map_or(d, |a| a.min_of(d)));
                    d
                };
                if worst.map_or(true, |(w, _, _)| margin < w) {
                    worst = Some((margin, i, c));
                }
            }
        }
    }
    let floor = S::zero() - tol;
    let holds = truth_margin.map_or(true, |m| m >= floor) && liar_margin.map_or(true, |m| m >= floor);
    Ok(Example2Report {
        holds,
        truth_teller_margin: truth_margin.map(|m| m.to_f64_lossy()),
        liar_margin: liar_margin.map(|m| m.to_f64_lossy()),
        worst_state: worst.map(|w| w.1),
        worst_cell: worst.map(|w| w.2),
    })
}

/// Beliefs of the fully vague equilibrium candidate: one on `Ω`, zero elsewhere.
pub fn example1_beliefs<S: Scalar>(params: &ModelParams<S>) -> BeliefMap<S> {
    BeliefMap::from_entries([(params.states.full(), S::one())], S::zero()).expect("0 and 1 are valid beliefs")
}
