//! The message lattice: enumeration, optimal vague messages, best lies and the
//! message taxonomy used to tabulate reports.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Environment, Message, ModelParams, Restriction, StateSpace};
use crate::scalar::Scalar;

/// Largest state space [`enumerate_messages`] will materialize.
pub const ENUMERATION_LIMIT: usize = 20;
/// Largest state space the exhaustive OVM oracle accepts.
pub const ORACLE_LIMIT: usize = 16;

/// All `2^n - 1` messages, ascending by bit pattern.
pub fn enumerate_messages(states: StateSpace) -> Result<Vec<Message>> {
    let n = states.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::Capacity { n, limit: ENUMERATION_LIMIT, what: "message enumeration" });
    }
    Ok((1u64..(1u64 << n)).map(Message).collect())
}

/// Messages an agent may send in the given environment, in canonical order.
pub fn message_set(restriction: Restriction, states: StateSpace) -> Result<Vec<Message>> {
    match restriction {
        Restriction::Restricted => Ok(states.states().map(Message::singleton).collect()),
        Restriction::Unrestricted => enumerate_messages(states),
    }
}

pub fn environment_messages(env: Environment, states: StateSpace) -> Result<Vec<Message>> {
    message_set(env.restriction, states)
}

/// The closed-form tail start `ceil((N + 2) - sqrt(2N - 2i + 3))`, evaluated
/// with an integer square root.
///
/// This comes from a continuous relaxation and can miss the discrete optimum
/// by one (e.g. `N = 10, i = 4`); [`ovm`] uses it only as a starting point.
pub fn ovm_threshold_closed_form(i: usize, n: usize) -> usize {
    assert!(i >= 1 && i <= n, "state {i} outside 1..={n}");
    let radicand = (2 * n + 3 - 2 * i) as u64;
    n + 2 - isqrt(radicand) as usize
}

/// Tail start of the optimal vague message: the largest `x` maximizing the
/// mean of `{i} ∪ {x, ..., N}`. `x = N + 1` means an empty tail.
pub fn ovm_threshold(i: usize, states: StateSpace) -> usize {
    let n = states.n();
    let lo = i + 1;
    let hi = n + 1;
    let mut x = ovm_threshold_closed_form(i, n).clamp(lo, hi);
    while x > lo && cmp_fraction(tail_mean(i, x - 1, n), tail_mean(i, x, n)) == Ordering::Greater {
        x -= 1;
    }
    while x < hi && cmp_fraction(tail_mean(i, x + 1, n), tail_mean(i, x, n)) != Ordering::Less {
        x += 1;
    }
    x
}

/// The optimal vague message `{i} ∪ {x*, ..., N}`: the payoff-maximizing
/// message that still contains the true state.
pub fn ovm(i: usize, states: StateSpace) -> Message {
    let n = states.n();
    assert!(states.contains(i), "state {i} outside 1..={n}");
    let x = ovm_threshold(i, states);
    let tail = if x > n { None } else { Some(Message::interval(x.max(i), n)) };
    match tail {
        Some(t) => t.with(i),
        None => Message::singleton(i),
    }
}

/// Exhaustive oracle over every message containing `i`: the best expected
/// payoff and all messages attaining it (canonical order).
pub fn ovm_bruteforce<S: Scalar>(i: usize, states: StateSpace) -> Result<(S, Vec<Message>)> {
    let n = states.n();
    if n > ORACLE_LIMIT {
        return Err(Error::Capacity { n, limit: ORACLE_LIMIT, what: "the OVM oracle" });
    }
    states.check_state(i)?;
    let own = 1u64 << (i - 1);
    let mut best: Option<(u64, u64)> = None;
    let mut argmax = Vec::new();
    for bits in 1u64..(1u64 << n) {
        if bits & own == 0 {
            continue;
        }
        let mut sum = 0u64;
        let mut rest = bits;
        while rest != 0 {
            sum += rest.trailing_zeros() as u64 + 1;
            rest &= rest - 1;
        }
        let mean = (sum, bits.count_ones() as u64);
        match best.map(|b| cmp_fraction(mean, b)) {
            None | Some(Ordering::Greater) => {
                best = Some(mean);
                argmax.clear();
                argmax.push(Message(bits));
            }
            Some(Ordering::Equal) => argmax.push(Message(bits)),
            Some(Ordering::Less) => {}
        }
    }
    let (sum, len) = best.expect("the singleton {i} is always a candidate");
    Ok((S::ratio(sum as i64, len as i64), argmax))
}

/// Best lie net of the variable cost: argmax over messages without `i` of
/// `mean(J) - c(i, mean(J))`. Ties go to the larger mean, then to the earlier
/// message in canonical order.
pub fn best_lie<S: Scalar>(i: usize, params: &ModelParams<S>) -> Result<(Message, S)> {
    best_lie_in(i, params, Restriction::Unrestricted)
}

/// [`best_lie`] over the messages available under `restriction`.
pub fn best_lie_in<S: Scalar>(i: usize, params: &ModelParams<S>, restriction: Restriction) -> Result<(Message, S)> {
    params.states.check_state(i)?;
    let candidates = message_set(restriction, params.states)?;
    let tol = S::tie_tolerance();
    let mut best: Option<(Message, S, S)> = None;
    for m in candidates.into_iter().filter(|m| !m.contains(i)) {
        let value = params.material_value(i, &m);
        let mean: S = m.expected_payoff();
        let better = match &best {
            None => true,
            Some((_, v, bm)) => value > *v + tol || ((value - *v).abs() <= tol && mean > *bm),
        };
        if better {
            best = Some((m, value, mean));
        }
    }
    let (m, v, _) = best.expect("N >= 2 leaves at least one lie");
    Ok((m, v))
}

/// Whether the message is a run of consecutive states with at least two members.
pub fn is_interval(message: &Message) -> bool {
    message.is_interval()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    PreciseTruthful,
    PreciseLie,
    /// Precise report whose truth cannot be checked.
    PreciseUnknownTruth,
    /// The OVM of the known true state.
    Optimal,
    /// Would be the OVM if its smallest member were the true state.
    PseudoOptimal,
    Pair,
    OtherVague,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::PreciseTruthful,
        MessageKind::PreciseLie,
        MessageKind::PreciseUnknownTruth,
        MessageKind::Optimal,
        MessageKind::PseudoOptimal,
        MessageKind::Pair,
        MessageKind::OtherVague,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::PreciseTruthful => "precise_truthful",
            MessageKind::PreciseLie => "precise_lie",
            MessageKind::PreciseUnknownTruth => "precise",
            MessageKind::Optimal => "optimal",
            MessageKind::PseudoOptimal => "pseudo_optimal",
            MessageKind::Pair => "pair",
            MessageKind::OtherVague => "other",
        }
    }

    pub fn is_vague(&self) -> bool {
        matches!(self, MessageKind::Optimal | MessageKind::PseudoOptimal | MessageKind::Pair | MessageKind::OtherVague)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown message label '{s}'")))
    }
}

impl Serialize for MessageKind {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MessageKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Category of a report plus whether it is an interval. The flag is
/// orthogonal to the kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MessageLabel {
    pub kind: MessageKind,
    pub interval_flag: bool,
}

/// Labels a report. With a known true state, precise reports split into
/// truthful and lies and vague ones into optimal, pair `{i, N}` and other;
/// without it, the smallest member stands in for the true state.
pub fn classify_message(message: &Message, true_state: Option<usize>, states: StateSpace) -> MessageLabel {
    let kind = match (message.is_precise(), true_state) {
        (true, Some(i)) if message.contains(i) => MessageKind::PreciseTruthful,
        (true, Some(_)) => MessageKind::PreciseLie,
        (true, None) => MessageKind::PreciseUnknownTruth,
        (false, Some(i)) => {
            if states.contains(i) && *message == ovm(i, states) {
                MessageKind::Optimal
            } else if message.len() == 2 && message.contains(i) && message.contains(states.top()) {
                MessageKind::Pair
            } else {
                MessageKind::OtherVague
            }
        }
        (false, None) => {
            if *message == ovm(message.lowest(), states) {
                MessageKind::PseudoOptimal
            } else if message.len() == 2 {
                MessageKind::Pair
            } else {
                MessageKind::OtherVague
            }
        }
    };
    MessageLabel { kind, interval_flag: message.is_interval() }
}

/// Mean of `{i} ∪ {x, ..., n}` as an unreduced fraction.
fn tail_mean(i: usize, x: usize, n: usize) -> (u64, u64) {
    if x > n {
        return (i as u64, 1);
    }
    let tail_len = (n - x + 1) as u64;
    let tail_sum = (x + n) as u64 * tail_len / 2;
    (i as u64 + tail_sum, tail_len + 1)
}

fn cmp_fraction(a: (u64, u64), b: (u64, u64)) -> Ordering {
    (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
}

fn isqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}
