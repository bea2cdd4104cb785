// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! High-level plan symbols.
//!
//! [`PlanKind`] is the verb-level abstraction used as a cache key, while
//! [`PlanId`] is a bound instance (verb plus argument) that the environment
//! can compile and execute.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The closed set of plan verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlanKind {
    Explore,
    GoTo,
    GoGrasp,
    PutInto,
    Transport,
    Wait,
}

impl PlanKind {
    pub const ALL: [PlanKind; 6] = [
        PlanKind::Explore,
        PlanKind::GoTo,
        PlanKind::GoGrasp,
        PlanKind::PutInto,
        PlanKind::Transport,
        PlanKind::Wait,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlanKind::Explore => "Explore",
            PlanKind::GoTo => "GoTo",
            PlanKind::GoGrasp => "GoGrasp",
            PlanKind::PutInto => "PutInto",
            PlanKind::Transport => "Transport",
            PlanKind::Wait => "Wait",
        }
    }

    /// Whether an instance of this verb must carry a target argument.
    pub fn takes_target(self) -> bool {
        matches!(
            self,
            PlanKind::Explore | PlanKind::GoTo | PlanKind::GoGrasp | PlanKind::PutInto
        )
    }

    /// Lexicographic order on verb names, used for deterministic tie-breaking.
    pub fn lex_cmp(self, other: PlanKind) -> Ordering {
        self.name().cmp(other.name())
    }

    /// Stable small integer code, shared with the C ABI.
    pub fn code(self) -> u8 {
        match self {
            PlanKind::Explore => 0,
            PlanKind::GoTo => 1,
            PlanKind::GoGrasp => 2,
            PlanKind::PutInto => 3,
            PlanKind::Transport => 4,
            PlanKind::Wait => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<PlanKind> {
        PlanKind::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanParseError {
    #[error("unknown plan verb `{0}`")]
    UnknownVerb(String),
    #[error("plan `{0}` requires a target")]
    MissingTarget(PlanKind),
    #[error("plan `{0}` takes no target")]
    UnexpectedTarget(PlanKind),
    #[error("invalid target `{0}`")]
    BadTarget(String),
}

impl FromStr for PlanKind {
    type Err = PlanParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        PlanKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| PlanParseError::UnknownVerb(s.to_string()))
    }
}

/// A plan instance: verb plus bound argument (a room id or an object id).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PlanIdRepr", into = "PlanIdRepr")]
pub struct PlanId {
    kind: PlanKind,
    target: Option<u32>,
}

impl PlanId {
    pub fn new(kind: PlanKind, target: Option<u32>) -> Result<Self, PlanParseError> {
        match (kind.takes_target(), target) {
            (true, None) => Err(PlanParseError::MissingTarget(kind)),
            (false, Some(_)) => Err(PlanParseError::UnexpectedTarget(kind)),
            _ => Ok(PlanId { kind, target }),
        }
    }

    pub fn with_target(kind: PlanKind, target: u32) -> Self {
        Self::new(kind, Some(target)).expect("verb takes a target")
    }

    pub fn transport() -> Self {
        PlanId { kind: PlanKind::Transport, target: None }
    }

    pub fn wait() -> Self {
        PlanId { kind: PlanKind::Wait, target: None }
    }

    pub fn kind(&self) -> PlanKind {
        self.kind
    }

    pub fn target(&self) -> Option<u32> {
        self.target
    }
}

impl From<PlanId> for PlanKind {
    fn from(p: PlanId) -> Self {
        p.kind
    }
}

impl fmt::Display for PlanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target {
            Some(t) => write!(f, "{}({})", self.kind, t),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Accepts `Verb`, `Verb(7)` and `Verb 7`.
impl FromStr for PlanId {
    type Err = PlanParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (verb, arg) = if let Some(open) = s.find('(') {
            let inner = s[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| PlanParseError::BadTarget(s.to_string()))?;
            (&s[..open], Some(inner.trim()))
        } else if let Some((v, a)) = s.split_once(char::is_whitespace) {
            (v, Some(a.trim()))
        } else {
            (s, None)
        };
        let kind: PlanKind = verb.parse()?;
        let target = arg
            .map(|a| a.parse::<u32>().map_err(|_| PlanParseError::BadTarget(a.to_string())))
            .transpose()?;
        PlanId::new(kind, target)
    }
}

#[derive(Serialize, Deserialize)]
struct PlanIdRepr {
    kind: PlanKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<u32>,
}

impl TryFrom<PlanIdRepr> for PlanId {
    type Error = PlanParseError;

    fn try_from(r: PlanIdRepr) -> Result<Self, Self::Error> {
        PlanId::new(r.kind, r.target)
    }
}

impl From<PlanId> for PlanIdRepr {
    fn from(p: PlanId) -> Self {
        PlanIdRepr { kind: p.kind, target: p.target }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_presence_is_enforced() {
        assert!(PlanId::new(PlanKind::GoGrasp, None).is_err());
        assert!(PlanId::new(PlanKind::Transport, Some(3)).is_err());
        assert!(PlanId::new(PlanKind::Wait, None).is_ok());
    }

    #[test]
    fn parses_both_argument_styles() {
        assert_eq!("GoGrasp(712)".parse::<PlanId>().unwrap(), PlanId::with_target(PlanKind::GoGrasp, 712));
        assert_eq!("goto 3".parse::<PlanId>().unwrap(), PlanId::with_target(PlanKind::GoTo, 3));
        assert_eq!("Transport".parse::<PlanId>().unwrap(), PlanId::transport());
        assert!("Fly".parse::<PlanId>().is_err());
        assert!("GoGrasp(x)".parse::<PlanId>().is_err());
    }

    #[test]
    fn lexicographic_kind_order() {
        assert_eq!(PlanKind::GoGrasp.lex_cmp(PlanKind::GoTo), Ordering::Less);
        assert_eq!(PlanKind::Explore.lex_cmp(PlanKind::Wait), Ordering::Less);
    }

    #[test]
    fn codes_round_trip() {
        for k in PlanKind::ALL {
            assert_eq!(PlanKind::from_code(k.code()), Some(k));
        }
        assert_eq!(PlanKind::from_code(6), None);
    }
}
