use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{Environment, Message, StateSpace};
use crate::scalar::Scalar;

use super::grid::TGrid;

/// Largest allowed deviation of a row's total probability from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A discretized mixed strategy: for every observed state and aversion cell, a
/// distribution over messages. Rows are sparse and kept in canonical message
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile<S> {
    env: Environment,
    states: StateSpace,
    cells: usize,
    rows: Vec<Vec<(Message, S)>>,
}

impl<S: Scalar> StrategyProfile<S> {
    /// `rows[(i - 1) * cells + c]` is the distribution of state `i` in cell `c`.
    pub fn new(env: Environment, states: StateSpace, cells: usize, rows: Vec<Vec<(Message, S)>>) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Shape("profile needs at least one type cell".into()));
        }
        if rows.len() != states.n() * cells {
            return Err(Error::Shape(format!(
                "expected {} rows for {} states x {cells} cells, got {}",
                states.n() * cells,
                states.n(),
                rows.len()
            )));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (r, row) in rows.into_iter().enumerate() {
            let (i, c) = (r / cells + 1, r % cells);
            let mut merged: BTreeMap<Message, S> = BTreeMap::new();
            for (m, p) in row {
                if m.highest() > states.n() {
                    return Err(Error::Shape(format!("state {i}, cell {c}: message {m} outside 1..={}", states.n())));
                }
                if !env.allows(&m) {
                    return Err(Error::Shape(format!("state {i}, cell {c}: {env} does not allow vague message {m}")));
                }
                if p < S::zero() {
                    return Err(Error::Shape(format!("state {i}, cell {c}: negative probability {p}")));
                }
                if p > S::zero() {
                    let e = merged.entry(m).or_insert_with(S::zero);
                    *e = *e + p;
                }
            }
            let total = merged.values().fold(S::zero(), |a, p| a + *p);
            if (total.to_f64_lossy() - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::Shape(format!("state {i}, cell {c}: probabilities sum to {total}")));
            }
            clean.push(merged.into_iter().collect());
        }
        Ok(Self { env, states, cells, rows: clean })
    }

    /// Degenerate profile: each `(i, cell)` sends `choose(i, cell)` for sure.
    pub fn pure<F: FnMut(usize, usize) -> Message>(
        env: Environment,
        states: StateSpace,
        cells: usize,
        mut choose: F,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(states.n() * cells);
        for i in states.states() {
            for c in 0..cells {
                rows.push(vec![(choose(i, c), S::one())]);
            }
        }
        Self::new(env, states, cells, rows)
    }

    /// Every agent reports `{i}`.
    pub fn truthful(env: Environment, states: StateSpace, cells: usize) -> Result<Self> {
        Self::pure(env, states, cells, |i, _| Message::singleton(i))
    }

    pub(crate) fn from_rows_unchecked(
        env: Environment,
        states: StateSpace,
        cells: usize,
        rows: Vec<Vec<(Message, S)>>,
    ) -> Self {
        Self { env, states, cells, rows }
    }

    pub fn environment(&self) -> Environment {
        self.env
    }

    pub fn states(&self) -> StateSpace {
        self.states
    }

    pub fn n(&self) -> usize {
        self.states.n()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn row(&self, i: usize, cell: usize) -> &[(Message, S)] {
        &self.rows[(i - 1) * self.cells + cell]
    }

    /// `(state, cell, row)` in state-major order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, &[(Message, S)])> + '_ {
        self.rows.iter().enumerate().map(move |(r, row)| (r / self.cells + 1, r % self.cells, row.as_slice()))
    }

    pub fn prob(&self, i: usize, cell: usize, message: &Message) -> S {
        self.row(i, cell).iter().find(|(m, _)| m == message).map(|(_, p)| *p).unwrap_or_else(S::zero)
    }

    /// Messages played with positive probability by anyone.
    pub fn support(&self) -> BTreeSet<Message> {
        self.rows.iter().flat_map(|r| r.iter().map(|(m, _)| *m)).collect()
    }

    /// Same strategy relabeled to another environment.
    pub fn with_environment(mut self, env: Environment) -> Result<Self> {
        if env.is_restricted() && self.rows.iter().flatten().any(|(m, _)| m.is_vague()) {
            return Err(Error::Shape(format!("profile uses vague messages and cannot move to {env}")));
        }
        self.env = env;
        Ok(self)
    }

    /// Applies `f` to every message, merging collisions.
    pub fn map_messages<F: Fn(usize, Message) -> Message>(&self, env: Environment, f: F) -> Result<Self> {
        let rows = self
            .rows()
            .map(|(i, _, row)| row.iter().map(|(m, p)| (f(i, *m), *p)).collect())
            .collect();
        Self::new(env, self.states, self.cells, rows)
    }

    /// Largest deviation of a row total from one.
    pub fn normalization_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().fold(S::zero(), |a, (_, p)| a + *p).to_f64_lossy() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Drops entries below `floor` and rescales each row to sum to one.
    pub fn pruned(&self, floor: S) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let kept: Vec<(Message, S)> = row.iter().copied().filter(|(_, p)| *p >= floor).collect();
                let kept = if kept.is_empty() {
                    let top = row.iter().copied().fold(None::<(Message, S)>, |b, e| match b {
                        Some(b) if b.1 >= e.1 => Some(b),
                        _ => Some(e),
                    });
                    top.into_iter().collect()
                } else {
                    kept
                };
                let total = kept.iter().fold(S::zero(), |a, (_, p)| a + *p);
                kept.into_iter().map(|(m, p)| (m, p / total)).collect()
            })
            .collect();
        Self::from_rows_unchecked(self.env, self.states, self.cells, rows)
    }
}

/// Posterior probability that the sender of each message was truthful, with a
/// constant for messages nobody sends.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefMap<S> {
    rho: BTreeMap<Message, S>,
    off_path: S,
}

impl<S: Scalar> BeliefMap<S> {
    pub fn new(off_path: S) -> Result<Self> {
        check_unit(off_path, "off-path belief")?;
        Ok(Self { rho: BTreeMap::new(), off_path })
    }

    pub fn from_entries<I: IntoIterator<Item = (Message, S)>>(entries: I, off_path: S) -> Result<Self> {
        let mut b = Self::new(off_path)?;
        for (m, r) in entries {
            b.set(m, r)?;
        }
        Ok(b)
    }

    pub fn set(&mut self, message: Message, rho: S) -> Result<()> {
        check_unit(rho, "belief")?;
        self.rho.insert(message, rho);
        Ok(())
    }

    pub fn get(&self, message: &Message) -> S {
        self.rho.get(message).copied().unwrap_or(self.off_path)
    }

    pub fn off_path(&self) -> S {
        self.off_path
    }

    /// Explicit entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (Message, S)> + '_ {
        self.rho.iter().map(|(m, r)| (*m, *r))
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

fn check_unit<S: Scalar>(v: S, what: &str) -> Result<()> {
    if v < S::zero() || v > S::one() {
        return Err(Error::Parameter(format!("{what} {v} outside [0, 1]")));
    }
    Ok(())
}

/// Bayes' rule under the uniform state prior, which cancels: the truthful
/// share of the mass sending each message. Unsent messages get `off_path`.
pub fn posterior_beliefs<S: Scalar>(profile: &StrategyProfile<S>, grid: &TGrid<S>, off_path: S) -> Result<BeliefMap<S>> {
    check_grid(profile, grid)?;
    let mut acc: BTreeMap<Message, (S, S)> = BTreeMap::new();
    for (i, c, row) in profile.rows() {
        let mass = grid.mass(c);
        for (m, p) in row {
            let w = mass * *p;
            let e = acc.entry(*m).or_insert((S::zero(), S::zero()));
            if m.contains(i) {
                e.0 = e.0 + w;
            }
            e.1 = e.1 + w;
        }
    }
    let mut beliefs = BeliefMap::new(off_path)?;
    for (m, (truthful, total)) in acc {
        if total > S::zero() {
            let r = (truthful / total).max_of(S::zero()).min_of(S::one());
            beliefs.set(m, r)?;
        }
    }
    Ok(beliefs)
}

pub(crate) fn check_grid<S: Scalar>(profile: &StrategyProfile<S>, grid: &TGrid<S>) -> Result<()> {
    if profile.cells() != grid.resolution() {
        return Err(Error::Shape(format!(
            "profile has {} cells but the grid has {}",
            profile.cells(),
            grid.resolution()
        )));
    }
    Ok(())
}

/// `(state, cell)` pairs that put positive probability on a message excluding
/// their state.
pub fn liar_set<S: Scalar>(profile: &StrategyProfile<S>) -> BTreeSet<(usize, usize)> {
    profile
        .rows()
        .filter(|(i, _, row)| row.iter().any(|(m, p)| *p > S::zero() && !m.contains(*i)))
        .map(|(i, c, _)| (i, c))
        .collect()
}

/// Population share of lies: states uniform, cells weighted by mass.
pub fn liar_mass<S: Scalar>(profile: &StrategyProfile<S>, grid: &TGrid<S>) -> Result<S> {
    check_grid(profile, grid)?;
    let n = S::from_int(profile.n() as i64);
    let mut total = S::zero();
    for (i, c, row) in profile.rows() {
        for (m, p) in row {
            if !m.contains(i) {
                total = total + grid.mass(c) * *p;
            }
        }
    }
    Ok(total / n)
}

/// Expected mean of the reported message over the population.
pub fn expected_earnings<S: Scalar>(profile: &StrategyProfile<S>, grid: &TGrid<S>) -> Result<S> {
    check_grid(profile, grid)?;
    let n = S::from_int(profile.n() as i64);
    let mut total = S::zero();
    for (_, c, row) in profile.rows() {
        for (m, p) in row {
            total = total + grid.mass(c) * *p * m.expected_payoff::<S>();
        }
    }
    Ok(total / n)
}

/// Smallest message used as a lie in a restricted profile; `None` when nobody
/// lies.
pub fn extract_threshold_l<S: Scalar>(profile: &StrategyProfile<S>) -> Result<Option<usize>> {
    if !profile.environment().is_restricted() {
        return Err(Error::Shape("the lie threshold is defined for restricted profiles".into()));
    }
    Ok(profile
        .rows()
        .flat_map(|(i, _, row)| row.iter().filter(move |(m, p)| *p > S::zero() && !m.contains(i)).map(|(m, _)| m.lowest()))
        .min())
}
