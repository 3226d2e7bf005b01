//! Primitive types of the reporting game and the payoff, cost and utility
//! evaluators every other module builds on.

pub mod cost;
pub mod dist;
pub mod message;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cost::{achievable_means, Assumption, CostSpec, CostValidation, CostViolation};
pub use dist::TypeDistribution;
pub use message::{expected_payoff, is_precise, is_truthful, is_vague, Message, StateSpace};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anonymity {
    Anonymous,
    NonAnonymous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    /// Precise messages only.
    Restricted,
    /// The whole message lattice.
    Unrestricted,
}

impl Anonymity {
    pub fn token(&self) -> &'static str {
        match self {
            Anonymity::Anonymous => "anonymous",
            Anonymity::NonAnonymous => "non_anonymous",
        }
    }
}

impl Restriction {
    pub fn token(&self) -> &'static str {
        match self {
            Restriction::Restricted => "restricted",
            Restriction::Unrestricted => "unrestricted",
        }
    }
}

impl FromStr for Anonymity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anonymous" => Ok(Anonymity::Anonymous),
            "non_anonymous" => Ok(Anonymity::NonAnonymous),
            other => Err(Error::Parameter(format!("unknown environment '{other}'"))),
        }
    }
}

impl FromStr for Restriction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "restricted" => Ok(Restriction::Restricted),
            "unrestricted" => Ok(Restriction::Unrestricted),
            other => Err(Error::Parameter(format!("unknown stage '{other}'"))),
        }
    }
}

/// One of the four reporting environments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Environment {
    pub anonymity: Anonymity,
    pub restriction: Restriction,
}

impl Environment {
    pub const NA_R: Environment =
        Environment { anonymity: Anonymity::NonAnonymous, restriction: Restriction::Restricted };
    pub const NA_UR: Environment =
        Environment { anonymity: Anonymity::NonAnonymous, restriction: Restriction::Unrestricted };
    pub const A_R: Environment =
        Environment { anonymity: Anonymity::Anonymous, restriction: Restriction::Restricted };
    pub const A_UR: Environment =
        Environment { anonymity: Anonymity::Anonymous, restriction: Restriction::Unrestricted };

    pub const ALL: [Environment; 4] =
        [Environment::NA_R, Environment::NA_UR, Environment::A_R, Environment::A_UR];

    pub fn is_anonymous(&self) -> bool {
        self.anonymity == Anonymity::Anonymous
    }

    pub fn is_restricted(&self) -> bool {
        self.restriction == Restriction::Restricted
    }

    /// Whether `message` may be sent in this environment.
    pub fn allows(&self, message: &Message) -> bool {
        !self.is_restricted() || message.is_precise()
    }

    pub fn short_name(&self) -> &'static str {
        match (self.anonymity, self.restriction) {
            (Anonymity::NonAnonymous, Restriction::Restricted) => "na-r",
            (Anonymity::NonAnonymous, Restriction::Unrestricted) => "na-ur",
            (Anonymity::Anonymous, Restriction::Restricted) => "a-r",
            (Anonymity::Anonymous, Restriction::Unrestricted) => "a-ur",
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "na-r" => Ok(Environment::NA_R),
            "na-ur" => Ok(Environment::NA_UR),
            "a-r" => Ok(Environment::A_R),
            "a-ur" => Ok(Environment::A_UR),
            _ => Err(Error::Parameter(format!("unknown environment '{s}' (expected na-r, na-ur, a-r or a-ur)"))),
        }
    }
}

/// An agent who observed `state` and has intrinsic lying aversion `aversion`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentType<S> {
    pub state: usize,
    pub aversion: S,
}

impl<S: Scalar> AgentType<S> {
    pub fn new(state: usize, aversion: S, params: &ModelParams<S>) -> Result<Self> {
        params.states.check_state(state)?;
        if aversion < S::zero() || aversion > params.t_max() {
            return Err(Error::Parameter(format!("aversion {aversion} outside [0, {}]", params.t_max())));
        }
        Ok(Self { state, aversion })
    }
}

/// Model constants: state space, social-identity weight, cost and type
/// distribution. Construction enforces `N + gamma < T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S> {
    pub states: StateSpace,
    pub gamma: S,
    pub cost: CostSpec<S>,
    pub dist: TypeDistribution<S>,
}

impl<S: Scalar> ModelParams<S> {
    pub fn new(states: StateSpace, gamma: S, cost: CostSpec<S>, dist: TypeDistribution<S>) -> Result<Self> {
        if gamma < S::zero() {
            return Err(Error::Parameter(format!("gamma must be nonnegative, got {gamma}")));
        }
        cost.check_parameters()?;
        dist.check()?;
        let n = S::from_int(states.n() as i64);
        let t_max = dist.t_max();
        if n + gamma >= t_max {
            return Err(Error::Validation(format!(
                "N + gamma < T is required (N = {}, gamma = {gamma}, T = {t_max})",
                states.n()
            )));
        }
        if let Some(reach) = cost.max_distance() {
            let needed = S::from_int(states.n() as i64 - 1);
            if reach < needed {
                return Err(Error::Validation(format!(
                    "cost table ends at distance {reach} but lies can reach {needed}"
                )));
            }
        }
        Ok(Self { states, gamma, cost, dist })
    }

    /// `n` states, weight `gamma`, linear cost with `kappa = 1/10` and
    /// uniform aversion on `[0, n + gamma + 1]`.
    pub fn with_defaults(n: usize, gamma: S) -> Result<Self> {
        let states = StateSpace::new(n)?;
        let t_max = S::from_int(n as i64) + gamma + S::one();
        Self::new(states, gamma, CostSpec::linear(S::ratio(1, 10)), TypeDistribution::uniform(t_max)?)
    }

    pub fn n(&self) -> usize {
        self.states.n()
    }

    pub fn t_max(&self) -> S {
        self.dist.t_max()
    }

    /// `c(i, b)`. The constructor guarantees the evaluator covers every
    /// distance between a state and a message mean.
    pub fn variable_cost(&self, i: usize, mean: S) -> S {
        self.cost
            .eval(S::from_int(i as i64), mean)
            .expect("cost domain covers all state-to-mean distances")
    }

    /// Monetary payoff net of the variable cost: the part of the utility that
    /// depends on neither `t` nor beliefs.
    pub fn material_value(&self, i: usize, message: &Message) -> S {
        let mean: S = message.expected_payoff();
        if message.contains(i) {
            mean
        } else {
            mean - self.variable_cost(i, mean)
        }
    }

    /// Utility when the audience can attribute the message to its sender.
    pub fn utility(&self, i: usize, message: &Message, t: S, rho: S) -> S {
        self.utility_anonymous(i, message, t) + self.gamma * rho
    }

    /// Utility without the social-identity term.
    pub fn utility_anonymous(&self, i: usize, message: &Message, t: S) -> S {
        let value = self.material_value(i, message);
        if message.contains(i) {
            value
        } else {
            value - t
        }
    }

    /// Utility in `env`; the belief is ignored in anonymous environments.
    pub fn utility_in(&self, env: Environment, i: usize, message: &Message, t: S, rho: S) -> S {
        if env.is_anonymous() {
            self.utility_anonymous(i, message, t)
        } else {
            self.utility(i, message, t, rho)
        }
    }
}

impl Default for ModelParams<f64> {
    fn default() -> Self {
        Self::with_defaults(10, 2.0).expect("default parameters are valid")
    }
}
