use crate::error::Result;
use crate::message_space::{best_lie_in, ovm};
use crate::model::{Environment, ModelParams, Restriction};
use crate::scalar::Scalar;

use super::grid::TGrid;
use super::profile::StrategyProfile;

/// Anonymous, precise messages only: type `(i, t)` reports its most valuable
/// precise lie `j` when `(j - i) - c(i, j) > t`, and `{i}` otherwise.
pub fn solve_anonymous_restricted<S: Scalar>(params: &ModelParams<S>, grid: &TGrid<S>) -> Result<StrategyProfile<S>> {
    let states = params.states;
    let mut plan = Vec::with_capacity(states.n());
    for i in states.states() {
        let (lie, value) = best_lie_in(i, params, Restriction::Restricted)?;
        plan.push((lie, value - S::from_int(i as i64)));
    }
    StrategyProfile::pure(Environment::A_R, states, grid.resolution(), |i, c| {
        let (lie, threshold) = plan[i - 1];
        if threshold > grid.mid(c) {
            lie
        } else {
            crate::model::Message::singleton(i)
        }
    })
}

/// Anonymous, all messages: type `(i, t)` reports the optimal vague message
/// unless the best lie, net of `t`, is strictly better.
pub fn solve_anonymous_unrestricted<S: Scalar>(params: &ModelParams<S>, grid: &TGrid<S>) -> Result<StrategyProfile<S>> {
    let states = params.states;
    let mut plan = Vec::with_capacity(states.n());
    for i in states.states() {
        let truthful = ovm(i, states);
        let (lie, value) = best_lie_in(i, params, Restriction::Unrestricted)?;
        plan.push((truthful, truthful.expected_payoff::<S>(), lie, value));
    }
    StrategyProfile::pure(Environment::A_UR, states, grid.resolution(), |i, c| {
        let (truthful, honest, lie, value) = plan[i - 1];
        if honest >= value - grid.mid(c) {
            truthful
        } else {
            lie
        }
    })
}

/// Aversion below which an observer of `i` lies in the anonymous restricted
/// environment; negative when no lie pays.
pub fn restricted_threshold<S: Scalar>(i: usize, params: &ModelParams<S>) -> Result<S> {
    let (_, value) = best_lie_in(i, params, Restriction::Restricted)?;
    Ok(value - S::from_int(i as i64))
}

/// The same for the unrestricted environment: best lie minus the payoff of the
/// optimal vague message.
pub fn unrestricted_threshold<S: Scalar>(i: usize, params: &ModelParams<S>) -> Result<S> {
    let (_, value) = best_lie_in(i, params, Restriction::Unrestricted)?;
    Ok(value - ovm(i, params.states).expected_payoff::<S>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::profile::{expected_earnings, liar_set};
    use crate::model::Message;
    use num_rational::Rational64;

    fn setup() -> (ModelParams<f64>, TGrid<f64>) {
        let p = ModelParams::default();
        let g = TGrid::midpoint(&p.dist, 400).unwrap();
        (p, g)
    }

    fn report(p: &StrategyProfile<f64>, g: &TGrid<f64>, i: usize, t: f64) -> Message {
        p.row(i, g.locate(t))[0].0
    }

    #[test]
    fn restricted_examples() {
        let (p, g) = setup();
        let prof = solve_anonymous_restricted(&p, &g).unwrap();
        assert_eq!(report(&prof, &g, 3, 5.0), Message::singleton(10));
        assert_eq!(report(&prof, &g, 3, 6.5), Message::singleton(3));
        for c in 0..400 {
            assert_eq!(prof.row(10, c)[0].0, Message::singleton(10));
        }
        assert!((restricted_threshold(3, &p).unwrap() - 6.3).abs() < 1e-12);
    }

    #[test]
    fn unrestricted_examples() {
        let (p, g) = setup();
        let prof = solve_anonymous_unrestricted(&p, &g).unwrap();
        let ovm3 = Message::new([3, 8, 9, 10], p.states).unwrap();
        assert_eq!(report(&prof, &g, 3, 2.0), ovm3);
        assert_eq!(report(&prof, &g, 3, 1.0), Message::singleton(10));
        assert_eq!(report(&prof, &g, 10, 0.0), Message::singleton(10));
        assert!((unrestricted_threshold(3, &p).unwrap() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn liar_sets_and_earnings_order() {
        let (p, g) = setup();
        let r = solve_anonymous_restricted(&p, &g).unwrap();
        let u = solve_anonymous_unrestricted(&p, &g).unwrap();
        let (lr, lu) = (liar_set(&r), liar_set(&u));
        assert!(lu.is_subset(&lr));
        assert!(lu.len() < lr.len());
        assert!(expected_earnings(&u, &g).unwrap() > expected_earnings(&r, &g).unwrap());
    }

    #[test]
    fn exact_thresholds() {
        let p = ModelParams::<Rational64>::with_defaults(10, Rational64::from_integer(2)).unwrap();
        assert_eq!(restricted_threshold(3, &p).unwrap(), Rational64::new(63, 10));
        assert_eq!(unrestricted_threshold(3, &p).unwrap(), Rational64::new(18, 10));
        assert_eq!(restricted_threshold(10, &p).unwrap(), Rational64::new(-11, 10));
    }
}
