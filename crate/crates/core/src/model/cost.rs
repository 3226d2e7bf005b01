//! Variable cost of lying, `c(a, b)`, where `a` is the payoff of the truthful
//! precise report and `b` the expected payoff of the message actually sent.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::message::StateSpace;
use crate::scalar::Scalar;

/// Cost family. All variants depend on `|a - b|` only.
#[derive(Clone, Debug, PartialEq)]
pub enum CostSpec<S> {
    Zero,
    /// `kappa * |a - b|`
    Linear { kappa: S },
    /// `kappa * (a - b)^2`
    Quadratic { kappa: S },
    /// Piecewise-linear in `|a - b|` through `(distance, cost)` knots. The first
    /// knot must sit at distance 0; queries past the last knot are a domain error.
    Table { knots: Vec<(S, S)> },
}

impl<S: Scalar> CostSpec<S> {
    pub fn linear(kappa: S) -> Self {
        CostSpec::Linear { kappa }
    }

    pub fn quadratic(kappa: S) -> Self {
        CostSpec::Quadratic { kappa }
    }

    pub fn table(knots: Vec<(S, S)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Parameter("cost table needs at least one knot".into()));
        }
        if knots[0].0 != S::zero() {
            return Err(Error::Parameter("cost table must start at distance 0".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Parameter("cost table distances must be strictly increasing".into()));
        }
        Ok(CostSpec::Table { knots })
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            CostSpec::Zero => "zero",
            CostSpec::Linear { .. } => "linear",
            CostSpec::Quadratic { .. } => "quadratic",
            CostSpec::Table { .. } => "table",
        }
    }

    /// Largest distance the evaluator accepts, `None` when unbounded.
    pub fn max_distance(&self) -> Option<S> {
        match self {
            CostSpec::Table { knots } => knots.last().map(|k| k.0),
            _ => None,
        }
    }

    pub(crate) fn check_parameters(&self) -> Result<()> {
        let negative = |x: &S| *x < S::zero();
        match self {
            CostSpec::Zero => Ok(()),
            CostSpec::Linear { kappa } | CostSpec::Quadratic { kappa } if negative(kappa) => {
                Err(Error::Parameter(format!("cost kappa must be nonnegative, got {kappa}")))
            }
            CostSpec::Table { knots } if knots.iter().any(|k| negative(&k.1)) => {
                Err(Error::Parameter("cost table values must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    /// `c(a, b)`.
    pub fn eval(&self, a: S, b: S) -> Result<S> {
        let d = (a - b).abs();
        match self {
            CostSpec::Zero => Ok(S::zero()),
            CostSpec::Linear { kappa } => Ok(*kappa * d),
            CostSpec::Quadratic { kappa } => Ok(*kappa * d * d),
            CostSpec::Table { knots } => interpolate(knots, d),
        }
    }

    /// Checks the cost assumptions on every pair/triple drawn from the grid of
    /// achievable expected payoffs. Never fails; the outcome is in the report.
    pub fn validate(&self, states: StateSpace) -> CostValidation {
        let grid = achievable_means::<S>(states);
        let anchors: Vec<S> = states.states().map(|i| S::from_int(i as i64)).collect();
        let tol = S::tie_tolerance();

        let eval = |a: S, b: S| self.eval(a, b);
        let fail = |assumption, detail: String| CostValidation {
            violation: Some(CostViolation { assumption, detail }),
        };
        macro_rules! tryc {
            ($e:expr) => {
                match $e {
                    Ok(v) => v,
                    Err(err) => return fail(Assumption::Domain, err.to_string()),
                }
            };
        }

        // nonnegative
        for &a in anchors.iter().chain(grid.iter()) {
            for &b in &grid {
                let c = tryc!(eval(a, b));
                if c < S::zero() {
                    return fail(Assumption::Nonnegative, format!("c({a}, {b}) = {c} < 0"));
                }
            }
        }
        // c(x, x) = 0
        for &a in anchors.iter().chain(grid.iter()) {
            let c = tryc!(eval(a, a));
            if c.abs() > tol {
                return fail(Assumption::ZeroOnDiagonal, format!("c({a}, {a}) = {c}"));
            }
        }
        // weakly increasing in |a - b| for each truthful anchor
        for &a in &anchors {
            let mut by_distance: Vec<(S, S)> = Vec::with_capacity(grid.len());
            for &b in &grid {
                by_distance.push(((a - b).abs(), tryc!(eval(a, b))));
            }
            by_distance.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite distances"));
            let mut ceiling: Option<S> = None;
            let mut k = 0;
            while k < by_distance.len() {
                let d = by_distance[k].0;
                let mut group_min = by_distance[k].1;
                let mut group_max = by_distance[k].1;
                let mut end = k;
                while end < by_distance.len() && by_distance[end].0 == d {
                    group_min = group_min.min_of(by_distance[end].1);
                    group_max = group_max.max_of(by_distance[end].1);
                    end += 1;
                }
                if let Some(prev) = ceiling {
                    if group_min + tol < prev {
                        return fail(
                            Assumption::Monotone,
                            format!("c({a}, .) drops to {group_min} at distance {d} after reaching {prev}"),
                        );
                    }
                }
                ceiling = Some(ceiling.map_or(group_max, |c| c.max_of(group_max)));
                k = end;
            }
        }
        // c(x, x + 1) < 1
        for &a in &anchors {
            let c = tryc!(eval(a, a + S::one()));
            if c >= S::one() {
                return fail(Assumption::UnitStepBelowOne, format!("c({a}, {}) = {c} >= 1", a + S::one()));
            }
        }
        // c(a, x) + c(x, y) >= c(a, y)
        for &a in &anchors {
            let row: Vec<S> = match grid.iter().map(|&x| eval(a, x)).collect::<Result<Vec<_>>>() {
                Ok(r) => r,
                Err(err) => return fail(Assumption::Domain, err.to_string()),
            };
            for (xi, &x) in grid.iter().enumerate() {
                for (yi, &y) in grid.iter().enumerate() {
                    let via = row[xi] + tryc!(eval(x, y));
                    if via + tol < row[yi] {
                        return fail(
                            Assumption::Triangle,
                            format!("c({a}, {x}) + c({x}, {y}) = {via} < c({a}, {y}) = {}", row[yi]),
                        );
                    }
                }
            }
        }
        CostValidation { violation: None }
    }
}

impl<S: Scalar> fmt::Display for CostSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostSpec::Zero => write!(f, "zero"),
            CostSpec::Linear { kappa } => write!(f, "linear({kappa})"),
            CostSpec::Quadratic { kappa } => write!(f, "quadratic({kappa})"),
            CostSpec::Table { knots } => write!(f, "table({} knots)", knots.len()),
        }
    }
}

fn interpolate<S: Scalar>(knots: &[(S, S)], d: S) -> Result<S> {
    let last = knots[knots.len() - 1];
    if d > last.0 {
        return Err(Error::CostDomain { distance: d.to_f64_lossy(), max: last.0.to_f64_lossy() });
    }
    for w in knots.windows(2) {
        let (d0, c0) = w[0];
        let (d1, c1) = w[1];
        if d <= d1 {
            return Ok(c0 + (c1 - c0) * (d - d0) / (d1 - d0));
        }
    }
    Ok(last.1)
}

/// The assumption a cost function can violate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assumption {
    /// `c >= 0`
    Nonnegative,
    /// `c(x, x) = 0`
    ZeroOnDiagonal,
    /// weakly increasing in the size of the lie
    Monotone,
    /// `c(x, x + 1) < 1`
    UnitStepBelowOne,
    /// triangle inequality
    Triangle,
    /// The evaluator rejected a point of the grid (table too short).
    Domain,
}

impl Assumption {
    pub fn label(&self) -> &'static str {
        match self {
            Assumption::Nonnegative => "nonnegativity",
            Assumption::ZeroOnDiagonal => "zero cost of truth",
            Assumption::Monotone => "monotonicity",
            Assumption::UnitStepBelowOne => "unit step below one",
            Assumption::Triangle => "triangle inequality",
            Assumption::Domain => "domain",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostViolation {
    pub assumption: Assumption,
    pub detail: String,
}

/// Outcome of [`CostSpec::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct CostValidation {
    pub violation: Option<CostViolation>,
}

impl CostValidation {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }

    pub fn failed_assumption(&self) -> Option<Assumption> {
        self.violation.as_ref().map(|v| v.assumption)
    }
}

/// Largest state space for which the grid is the exact set of subset means.
pub const EXACT_GRID_LIMIT: usize = 12;

/// Every distinct expected payoff a message can have, ascending. Exact for
/// `n <= 12`; above that, states, half-states and interval means.
pub fn achievable_means<S: Scalar>(states: StateSpace) -> Vec<S> {
    let n = states.n();
    let mut fractions: BTreeSet<(u64, u64)> = BTreeSet::new();
    let mut push = |sum: u64, len: u64| {
        let g = gcd(sum, len);
        fractions.insert((sum / g, len / g));
    };
    if n <= EXACT_GRID_LIMIT {
        for bits in 1u64..(1u64 << n) {
            let mut sum = 0u64;
            let mut b = bits;
            while b != 0 {
                sum += b.trailing_zeros() as u64 + 1;
                b &= b - 1;
            }
            push(sum, bits.count_ones() as u64);
        }
    } else {
        for lo in 1..=n as u64 {
            push(2 * lo, 2);
            if lo < n as u64 {
                push(2 * lo + 1, 2);
            }
            for hi in lo..=n as u64 {
                push((lo + hi) * (hi - lo + 1) / 2, hi - lo + 1);
            }
        }
    }
    let mut grid: Vec<S> = fractions.into_iter().map(|(s, l)| S::ratio(s as i64, l as i64)).collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
    grid
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
