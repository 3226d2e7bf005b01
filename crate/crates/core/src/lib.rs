//! Solver, simulator and analysis toolkit for the cheating game with vague
//! messages.
//!
//! Agents observe a state `i` in `1..=N` and report a nonempty subset of
//! states. A report is a lie when it excludes `i`; liars pay an intrinsic cost
//! `t` plus a variable cost, and in non-anonymous settings everyone values the
//! audience's posterior that their message was truthful.

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod message_space;
pub mod model;
pub mod scalar;
pub mod simulation;

use num_rational::Rational64;

pub use error::{Error, Result};
pub use message_space::{
    best_lie, best_lie_in, classify_message, enumerate_messages, is_interval, ovm, ovm_bruteforce, MessageKind,
    MessageLabel,
};
pub use model::{
    AgentType, Anonymity, CostSpec, Environment, Message, ModelParams, Restriction, StateSpace, TypeDistribution,
};
pub use scalar::{Real, Scalar};

pub type Params = ModelParams<f64>;
pub type ParamsF32 = ModelParams<f32>;
pub type ExactParams = ModelParams<Rational64>;
pub type Cost = CostSpec<f64>;
pub type ExactCost = CostSpec<Rational64>;
