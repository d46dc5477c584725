//! Kleene's strong three-valued logic over `{F, U, T}`.
//!
//! The truth values map onto the integers `-1, 0, +1`, which makes
//! conjunction a minimum and disjunction a maximum. That integer image is
//! exactly what the mixed-integer encoder uses for its trit variables.

use std::fmt;
use std::str::FromStr;

/// A truth value of Kleene's strong logic K3, ordered `False < Unknown < True`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ternary {
    False,
    Unknown,
    True,
}

pub use Ternary::{False as TF, True as TT, Unknown as TU};

impl Ternary {
    /// Canonical integer image: F -> -1, U -> 0, T -> +1.
    pub fn as_int(self) -> i8 {
        match self {
            Ternary::False => -1,
            Ternary::Unknown => 0,
            Ternary::True => 1,
        }
    }

    pub fn from_int(v: i8) -> Option<Ternary> {
        match v {
            -1 => Some(Ternary::False),
            0 => Some(Ternary::Unknown),
            1 => Some(Ternary::True),
            _ => None,
        }
    }

    /// K3 negation: flips F/T, fixes U.
    pub fn not(self) -> Ternary {
        match self {
            Ternary::False => Ternary::True,
            Ternary::Unknown => Ternary::Unknown,
            Ternary::True => Ternary::False,
        }
    }

    pub fn and(self, other: Ternary) -> Ternary {
        self.min(other)
    }

    pub fn or(self, other: Ternary) -> Ternary {
        self.max(other)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Ternary::False => "F",
            Ternary::Unknown => "U",
            Ternary::True => "T",
        }
    }
}

/// Fold of K3 conjunction; the empty fold is `T`, the identity of `min`.
pub fn t_and<I: IntoIterator<Item = Ternary>>(vs: I) -> Ternary {
    vs.into_iter().fold(Ternary::True, Ternary::and)
}

/// Fold of K3 disjunction; the empty fold is `F`, the identity of `max`.
pub fn t_or<I: IntoIterator<Item = Ternary>>(vs: I) -> Ternary {
    vs.into_iter().fold(Ternary::False, Ternary::or)
}

pub fn t_not(v: Ternary) -> Ternary {
    v.not()
}

impl fmt::Display for Ternary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a ternary truth value: {0:?}")]
pub struct ParseTernaryError(String);

impl FromStr for Ternary {
    type Err = ParseTernaryError;

    /// Accepts both the symbolic rendering `F`/`U`/`T` and the integer
    /// rendering `-1`/`0`/`+1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "F" | "-1" | "\u{2212}1" => Ok(Ternary::False),
            "U" | "0" => Ok(Ternary::Unknown),
            "T" | "+1" | "1" => Ok(Ternary::True),
            other => Err(ParseTernaryError(other.to_string())),
        }
    }
}

pub const ALL: [Ternary; 3] = [Ternary::False, Ternary::Unknown, Ternary::True];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_table() {
        assert_eq!(TT.not(), TF);
        assert_eq!(TU.not(), TU);
        assert_eq!(TF.not(), TT);
    }

    #[test]
    fn conjunction_table() {
        let expect = [
            ((TF, TF), TF),
            ((TF, TU), TF),
            ((TF, TT), TF),
            ((TU, TF), TF),
            ((TU, TU), TU),
            ((TU, TT), TU),
            ((TT, TF), TF),
            ((TT, TU), TU),
            ((TT, TT), TT),
        ];
        for ((x, y), z) in expect {
            assert_eq!(x.and(y), z, "{x} and {y}");
        }
    }

    #[test]
    fn disjunction_table() {
        let expect = [
            ((TF, TF), TF),
            ((TF, TU), TU),
            ((TF, TT), TT),
            ((TU, TF), TU),
            ((TU, TU), TU),
            ((TU, TT), TT),
            ((TT, TF), TT),
            ((TT, TU), TT),
            ((TT, TT), TT),
        ];
        for ((x, y), z) in expect {
            assert_eq!(x.or(y), z, "{x} or {y}");
        }
    }

    #[test]
    fn folds_and_identities() {
        assert_eq!(t_and([TT, TU]), TU);
        assert_eq!(t_and([TF, TU]), TF);
        assert_eq!(t_and([]), TT);
        assert_eq!(t_or([TU, TU]), TU);
        assert_eq!(t_or([TU, TT]), TT);
        assert_eq!(t_or([]), TF);
    }

    #[test]
    fn min_max_matches_tables() {
        for x in ALL {
            for y in ALL {
                assert_eq!(x.and(y).as_int(), x.as_int().min(y.as_int()));
                assert_eq!(x.or(y).as_int(), x.as_int().max(y.as_int()));
            }
        }
    }

    #[test]
    fn de_morgan() {
        for x in ALL {
            for y in ALL {
                assert_eq!(x.and(y).not(), x.not().or(y.not()));
                assert_eq!(x.or(y).not(), x.not().and(y.not()));
            }
        }
    }

    #[test]
    fn complement_laws_fail_at_unknown() {
        assert_eq!(TU.and(TU.not()), TU);
        assert_ne!(TU.and(TU.not()), TF);
        assert_eq!(TU.or(TU.not()), TU);
        assert_ne!(TU.or(TU.not()), TT);
    }

    #[test]
    fn parse_both_renderings() {
        for v in ALL {
            assert_eq!(v.symbol().parse::<Ternary>().unwrap(), v);
            let int_text = match v.as_int() {
                0 => "0".to_string(),
                n => format!("{n:+}"),
            };
            assert_eq!(int_text.parse::<Ternary>().unwrap(), v);
        }
        assert!("X".parse::<Ternary>().is_err());
    }
}
