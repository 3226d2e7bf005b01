use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The state space `{1, ..., n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSpace {
    n: usize,
}

impl StateSpace {
    /// Largest state space a [`Message`] bitmask can hold.
    pub const MAX_STATES: usize = 64;

    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("state space needs at least 2 states, got {n}")));
        }
        if n > Self::MAX_STATES {
            return Err(Error::Capacity { n, limit: Self::MAX_STATES, what: "messages" });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> RangeInclusive<usize> {
        1..=self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        (1..=self.n).contains(&i)
    }

    /// The fully vague message `{1, ..., n}`.
    pub fn full(&self) -> Message {
        Message::interval(1, self.n)
    }

    pub fn top(&self) -> usize {
        self.n
    }

    pub(crate) fn check_state(&self, i: usize) -> Result<()> {
        if self.contains(i) {
            Ok(())
        } else {
            Err(Error::Parameter(format!("state {i} outside 1..={}", self.n)))
        }
    }
}

/// A nonempty subset of the state space, stored as a bitmask where bit `k-1`
/// marks state `k`. The derived ordering compares bit patterns, which is the
/// canonical message order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message(pub(crate) u64);

impl Message {
    pub fn new<I: IntoIterator<Item = usize>>(members: I, states: StateSpace) -> Result<Self> {
        let mut bits = 0u64;
        for m in members {
            if !states.contains(m) {
                return Err(Error::Message(format!("state {m} outside 1..={}", states.n())));
            }
            let bit = 1u64 << (m - 1);
            if bits & bit != 0 {
                return Err(Error::Message(format!("duplicate state {m}")));
            }
            bits |= bit;
        }
        Self::from_bits(bits, states)
    }

    pub fn from_bits(bits: u64, states: StateSpace) -> Result<Self> {
        if bits == 0 {
            return Err(Error::Message("a message must be nonempty".into()));
        }
        if states.n() < 64 && bits >> states.n() != 0 {
            return Err(Error::Message(format!(
                "bit pattern {bits:#x} has states above {}",
                states.n()
            )));
        }
        Ok(Self(bits))
    }

    /// Precise message `{i}`.
    pub fn singleton(i: usize) -> Self {
        assert!((1..=StateSpace::MAX_STATES).contains(&i), "state {i} out of range");
        Self(1u64 << (i - 1))
    }

    /// `{lo, lo+1, ..., hi}`.
    pub fn interval(lo: usize, hi: usize) -> Self {
        assert!(lo >= 1 && lo <= hi && hi <= StateSpace::MAX_STATES, "bad interval [{lo}, {hi}]");
        let width = hi - lo + 1;
        let run = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        Self(run << (lo - 1))
    }

    pub fn bits(&self) -> u64 {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        (1..=64).contains(&i) && self.0 & (1u64 << (i - 1)) != 0
    }

    pub fn lowest(&self) -> usize {
        self.0.trailing_zeros() as usize + 1
    }

    pub fn highest(&self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn members(&self) -> Members {
        Members(self.0)
    }

    pub fn sum(&self) -> u64 {
        self.members().map(|m| m as u64).sum()
    }

    /// Mean of the members: the expected monetary payoff of the message.
    pub fn expected_payoff<S: Scalar>(&self) -> S {
        S::ratio(self.sum() as i64, self.len() as i64)
    }

    pub fn is_precise(&self) -> bool {
        self.len() == 1
    }

    pub fn is_vague(&self) -> bool {
        !self.is_precise()
    }

    /// Consecutive integers with at least two members.
    pub fn is_interval(&self) -> bool {
        self.len() >= 2 && self.highest() - self.lowest() + 1 == self.len()
    }

    pub fn with(&self, i: usize) -> Self {
        Self(self.0 | Message::singleton(i).0)
    }

    /// Parses the `3;8;9;10` wire form. Order does not matter.
    pub fn parse(s: &str, states: StateSpace) -> Result<Self> {
        let mut members = Vec::new();
        for tok in s.split(';') {
            let tok = tok.trim();
            let m: usize = tok
                .parse()
                .map_err(|_| Error::Message(format!("'{tok}' is not a state in '{s}'")))?;
            members.push(m);
        }
        Self::new(members, states)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for m in self.members() {
            if !first {
                f.write_str(";")?;
            }
            write!(f, "{m}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for m in self.members() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
            first = false;
        }
        f.write_str("}")
    }
}

impl Serialize for Message {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Message {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let widest = StateSpace { n: StateSpace::MAX_STATES };
        Message::parse(&s, widest).map_err(serde::de::Error::custom)
    }
}

/// Ascending iterator over the members of a message.
#[derive(Clone, Debug)]
pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let k = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(k + 1)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

/// A message is truthful for an agent who observed `i` iff it contains `i`.
pub fn is_truthful(i: usize, message: &Message) -> bool {
    message.contains(i)
}

pub fn is_precise(message: &Message) -> bool {
    message.is_precise()
}

pub fn is_vague(message: &Message) -> bool {
    message.is_vague()
}

pub fn expected_payoff<S: Scalar>(message: &Message) -> S {
    message.expected_payoff()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn ten() -> StateSpace {
        StateSpace::new(10).unwrap()
    }

    fn msg(members: &[usize]) -> Message {
        Message::new(members.iter().copied(), ten()).unwrap()
    }

    #[test]
    fn expected_payoff_examples() {
        assert_eq!(expected_payoff::<f64>(&msg(&[7])), 7.0);
        assert_eq!(expected_payoff::<f64>(&msg(&[2, 4, 9])), 5.0);
        assert_eq!(expected_payoff::<Rational64>(&msg(&[1, 8, 9, 10])), Rational64::from_integer(7));
    }

    #[test]
    fn truthful_and_precision() {
        assert!(is_truthful(3, &msg(&[3, 5])));
        assert!(!is_truthful(3, &msg(&[4, 5])));
        assert!(is_truthful(10, &msg(&[10])));
        assert!(msg(&[4]).is_precise());
        assert!(msg(&[4, 5]).is_vague());
        assert!(ten().full().is_vague());
        assert_eq!(ten().full().len(), 10);
    }

    #[test]
    fn interval_detection() {
        assert!(msg(&[6, 7, 8]).is_interval());
        assert!(!msg(&[6, 8]).is_interval());
        assert!(msg(&[9, 10]).is_interval());
        assert!(!msg(&[4]).is_interval());
    }

    #[test]
    fn parse_canonicalizes() {
        let m = Message::parse("10;3", ten()).unwrap();
        assert_eq!(m, msg(&[3, 10]));
        assert_eq!(m.to_string(), "3;10");
        assert_eq!(format!("{m:?}"), "{3,10}");
    }

    #[test]
    fn invalid_messages_rejected() {
        assert!(Message::new(Vec::new(), ten()).is_err());
        assert!(Message::new([0], ten()).is_err());
        assert!(Message::new([11], ten()).is_err());
        assert!(Message::new([3, 3], ten()).is_err());
        assert!(Message::parse("3;x", ten()).is_err());
        assert!(Message::from_bits(1 << 10, ten()).is_err());
    }

    #[test]
    fn min_max_members() {
        let m = msg(&[3, 8, 9, 10]);
        assert_eq!(m.lowest(), 3);
        assert_eq!(m.highest(), 10);
        assert_eq!(m.members().collect::<Vec<_>>(), vec![3, 8, 9, 10]);
        assert_eq!(Message::interval(8, 10), msg(&[8, 9, 10]));
        assert_eq!(Message::interval(1, 64).len(), 64);
    }

    #[test]
    fn serde_uses_wire_form() {
        let m = msg(&[3, 8, 9, 10]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "\"3;8;9;10\"");
        let back: Message = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn state_space_bounds() {
        assert!(StateSpace::new(1).is_err());
        assert!(StateSpace::new(65).is_err());
        assert_eq!(StateSpace::new(2).unwrap().states().count(), 2);
    }
}
