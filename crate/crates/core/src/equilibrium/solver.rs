use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::message_space::environment_messages;
use crate::model::{Environment, Message, ModelParams};
use crate::scalar::Real;

use super::closed_form::{solve_anonymous_restricted, solve_anonymous_unrestricted};
use super::grid::TGrid;
use super::profile::{check_grid, posterior_beliefs, BeliefMap, StrategyProfile};
use super::verify::{check_equilibrium, message_index, state_table, EquilibriumReport, StateTable};

/// Starting profile for [`solve_fixed_point`].
#[derive(Clone, Debug, PartialEq)]
pub enum Seed<S> {
    /// Everyone reports `{i}`.
    Truthful,
    /// Everyone reports the full state space.
    Example1,
    /// The non-anonymous restricted solution with each `{j}` widened to `[j, N]`.
    Interval,
    /// The anonymous closed form of the same restriction.
    AnonymousSolution,
    Profile(StrategyProfile<S>),
}

impl<S> Seed<S> {
    pub const NAMES: [&'static str; 4] = ["truthful", "example1", "interval", "anonymous-solution"];

    pub fn name(&self) -> &'static str {
        match self {
            Seed::Truthful => "truthful",
            Seed::Example1 => "example1",
            Seed::Interval => "interval",
            Seed::AnonymousSolution => "anonymous-solution",
            Seed::Profile(_) => "profile",
        }
    }
}

impl<S> fmt::Display for Seed<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl<S> FromStr for Seed<S> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "truthful" => Ok(Seed::Truthful),
            "example1" => Ok(Seed::Example1),
            "interval" | "example2" => Ok(Seed::Interval),
            "anonymous-solution" | "anonymous" => Ok(Seed::AnonymousSolution),
            other => Err(Error::Parameter(format!(
                "unknown seed profile '{other}' (expected one of {})",
                Seed::<S>::NAMES.join(", ")
            ))),
        }
    }
}

/// Knobs of the fixed-point iteration.
///
/// Each round, mass in every row moves toward the best truthful and the best
/// lying message at a speed proportional to the utility gain, `within_rate`
/// between messages of the same kind and `cross_rate` between a truthful and
/// a lying message, both divided by `1 + gamma`. Beliefs then move a fraction
/// `damping` toward the Bayes posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions<S> {
    pub damping: S,
    pub max_iter: usize,
    pub tol: S,
    pub off_path: S,
    pub within_rate: S,
    pub cross_rate: S,
    /// Probabilities below this are dropped from the returned profile.
    pub prune: S,
    /// Halve both rates and the belief step when the belief residual keeps
    /// rising (in at least 8 of the last 20 rounds).
    pub adaptive: bool,
}

impl<S: Real> Default for SolverOptions<S> {
    fn default() -> Self {
        Self {
            damping: S::ratio(1, 2),
            max_iter: 10_000,
            tol: S::from_f64_lossy(1e-8),
            off_path: S::zero(),
            within_rate: S::ratio(1, 2),
            cross_rate: S::from_int(2000),
            prune: S::from_f64_lossy(1e-12),
            adaptive: true,
        }
    }
}

impl<S: Real> SolverOptions<S> {
    pub fn check(&self) -> Result<()> {
        if !(self.damping > S::zero() && self.damping <= S::one()) {
            return Err(Error::Parameter(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > S::zero()) {
            return Err(Error::Parameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.off_path >= S::zero() && self.off_path <= S::one()) {
            return Err(Error::Parameter(format!("off-path belief must lie in [0, 1], got {}", self.off_path)));
        }
        if !(self.within_rate > S::zero() && self.cross_rate > S::zero()) {
            return Err(Error::Parameter("revision rates must be positive".into()));
        }
        if self.prune < S::zero() {
            return Err(Error::Parameter("prune floor must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint<S> {
    pub profile: StrategyProfile<S>,
    pub beliefs: BeliefMap<S>,
    pub report: EquilibriumReport,
}

/// Materializes a named seed for `env`.
pub fn seed_profile<S: Real>(
    seed: &Seed<S>,
    env: Environment,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
    opts: &SolverOptions<S>,
) -> Result<StrategyProfile<S>> {
    let states = params.states;
    let cells = grid.resolution();
    let needs_vague = |name: &str| {
        if env.is_restricted() {
            Err(Error::Parameter(format!("seed '{name}' uses vague messages, which {env} does not allow")))
        } else {
            Ok(())
        }
    };
    match seed {
        Seed::Truthful => StrategyProfile::truthful(env, states, cells),
        Seed::Example1 => {
            needs_vague("example1")?;
            StrategyProfile::pure(env, states, cells, |_, _| states.full())
        }
        Seed::Interval => {
            needs_vague("interval")?;
            let base = solve_fixed_point(Environment::NA_R, params, grid, Seed::Truthful, opts)?;
            let n = states.n();
            base.profile.map_messages(env, |_, m| Message::interval(m.lowest(), n))
        }
        Seed::AnonymousSolution => {
            let p = if env.is_restricted() {
                solve_anonymous_restricted(params, grid)?
            } else {
                solve_anonymous_unrestricted(params, grid)?
            };
            p.with_environment(env)
        }
        Seed::Profile(p) => {
            check_grid(p, grid)?;
            if p.states() != states {
                return Err(Error::Shape(format!("seed has {} states, parameters have {}", p.n(), states.n())));
            }
            p.clone().with_environment(env)
        }
    }
}

type SparseRow<S> = Vec<(usize, S)>;

/// Searches for an equilibrium of `env` from `seed`. Not converging within
/// `max_iter` rounds is reported through `report.converged`, not as an error.
pub fn solve_fixed_point<S: Real>(
    env: Environment,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
    seed: Seed<S>,
    opts: &SolverOptions<S>,
) -> Result<FixedPoint<S>> {
    opts.check()?;
    let states = params.states;
    let cells = grid.resolution();
    let messages = environment_messages(env, states)?;
    let initial = seed_profile(&seed, env, params, grid, opts)?;

    let mut rows: Vec<SparseRow<S>> = initial
        .rows()
        .map(|(_, _, row)| {
            row.iter()
                .map(|(m, p)| (message_index(&messages, m).expect("seed messages belong to the environment"), *p))
                .collect()
        })
        .collect();

    let mut rho = vec![opts.off_path; messages.len()];
    bayes_step(&rows, &messages, grid, cells, S::one(), opts.off_path, &mut rho);

    let gamma = if env.is_anonymous() { S::zero() } else { params.gamma };
    let base_within = opts.within_rate / (S::one() + gamma);
    let base_cross = opts.cross_rate / (S::one() + gamma);
    let mut mu = S::one();
    let mut damping = opts.damping;
    let mut rising: VecDeque<bool> = VecDeque::with_capacity(20);
    let mut prev: Option<S> = None;
    let mut belief_step = S::zero();

    for it in 1..=opts.max_iter {
        let tables: Vec<StateTable<S>> = states
            .states()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|i| state_table(i, &messages, params, env, |k| rho[k]))
            .collect();
        let within = base_within * mu;
        let cross = base_cross * mu;

        let revised: Vec<(SparseRow<S>, S)> = rows
            .par_iter()
            .enumerate()
            .map(|(r, row)| {
                let i = r / cells + 1;
                revise(row, &tables[i - 1], &messages, i, grid.mid(r % cells), within, cross)
            })
            .collect();
        let mut strategy_step = S::zero();
        rows = revised
            .into_iter()
            .map(|(row, d)| {
                strategy_step = strategy_step.max_of(d);
                row
            })
            .collect();

        belief_step = bayes_step(&rows, &messages, grid, cells, damping, opts.off_path, &mut rho);

        if opts.adaptive {
            if let Some(p) = prev {
                if rising.len() == 20 {
                    rising.pop_front();
                }
                rising.push_back(belief_step > p);
                if rising.len() == 20 && rising.iter().filter(|r| **r).count() >= 8 {
                    mu = (mu * S::ratio(1, 2)).max_of(S::from_f64_lossy(1e-9));
                    damping = (damping * S::ratio(1, 2)).max_of(opts.damping.min_of(S::from_f64_lossy(1e-4)));
                    rising.clear();
                }
            }
            prev = Some(belief_step);
        }

        if belief_step < opts.tol && strategy_step < opts.tol {
            let candidate = finish(env, params, grid, &messages, &rows, it, belief_step, opts)?;
            if candidate.report.converged {
                return Ok(candidate);
            }
        }
    }
    finish(env, params, grid, &messages, &rows, opts.max_iter, belief_step, opts)
}

/// One revision round for a single row. Returns the new row and the largest
/// probability change.
fn revise<S: Real>(
    row: &[(usize, S)],
    table: &StateTable<S>,
    messages: &[Message],
    i: usize,
    t: S,
    within: S,
    cross: S,
) -> (SparseRow<S>, S) {
    let lie = |k: usize| !messages[k].contains(i);
    let targets: Vec<usize> = [table.best_truth, table.best_lie].into_iter().flatten().map(|(k, _)| k).collect();
    let mut next: Vec<(usize, S)> = row.to_vec();
    for &b in &targets {
        if !next.iter().any(|(k, _)| *k == b) {
            next.push((b, S::zero()));
        }
    }
    let mut delta = vec![S::zero(); next.len()];
    for (a, &(ka, p)) in next.iter().enumerate() {
        if p <= S::zero() {
            continue;
        }
        let ua = table.utility(ka, lie(ka), t);
        let mut gains: Vec<(usize, S)> = Vec::with_capacity(2);
        for &b in &targets {
            if b == ka {
                continue;
            }
            let ub = table.utility(b, lie(b), t);
            if ub > ua {
                let rate = if lie(b) == lie(ka) { within } else { cross };
                gains.push((b, rate * (ub - ua)));
            }
        }
        let total = gains.iter().fold(S::zero(), |s, (_, g)| s + *g);
        if total <= S::zero() {
            continue;
        }
        let scale = if total > S::one() { S::one() / total } else { S::one() };
        for (b, g) in gains {
            let flow = p * g * scale;
            delta[a] = delta[a] - flow;
            let pos = next.iter().position(|(k, _)| *k == b).expect("targets were inserted");
            delta[pos] = delta[pos] + flow;
        }
    }
    let mut step = S::zero();
    for (e, d) in next.iter_mut().zip(delta) {
        step = step.max_of(d.abs());
        e.1 = (e.1 + d).max_of(S::zero());
    }
    next.retain(|(_, p)| *p > S::zero());
    next.sort_by_key(|(k, _)| *k);
    (next, step)
}

/// Moves `rho` a fraction `damping` toward the posterior of `rows` and returns
/// the largest change.
fn bayes_step<S: Real>(
    rows: &[SparseRow<S>],
    messages: &[Message],
    grid: &TGrid<S>,
    cells: usize,
    damping: S,
    off_path: S,
    rho: &mut [S],
) -> S {
    let mut truthful = vec![S::zero(); messages.len()];
    let mut total = vec![S::zero(); messages.len()];
    for (r, row) in rows.iter().enumerate() {
        let i = r / cells + 1;
        let mass = grid.mass(r % cells);
        for &(k, p) in row {
            let w = mass * p;
            total[k] = total[k] + w;
            if messages[k].contains(i) {
                truthful[k] = truthful[k] + w;
            }
        }
    }
    let keep = S::one() - damping;
    let mut step = S::zero();
    for k in 0..messages.len() {
        let target = if total[k] > S::zero() { (truthful[k] / total[k]).min_of(S::one()) } else { off_path };
        let next = keep * rho[k] + damping * target;
        step = step.max_of((next - rho[k]).abs());
        rho[k] = next;
    }
    step
}

#[allow(clippy::too_many_arguments)]
fn finish<S: Real>(
    env: Environment,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
    messages: &[Message],
    rows: &[SparseRow<S>],
    iterations: usize,
    belief_step: S,
    opts: &SolverOptions<S>,
) -> Result<FixedPoint<S>> {
    let dense = rows.iter().map(|row| row.iter().map(|(k, p)| (messages[*k], *p)).collect()).collect();
    let profile = StrategyProfile::from_rows_unchecked(env, params.states, grid.resolution(), dense).pruned(opts.prune);
    let beliefs = posterior_beliefs(&profile, grid, opts.off_path)?;
    let mut report = check_equilibrium(&profile, &beliefs, params, grid, opts.tol)?;
    report.iterations = iterations;
    report.belief_residual = report.belief_residual.max(belief_step.to_f64_lossy());
    report.converged = report.converged && belief_step < opts.tol;
    Ok(FixedPoint { profile, beliefs, report })
}
