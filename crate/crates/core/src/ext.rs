//! Integers extended with the two sentinels used for edge statistics.
//!
//! `sup ∅ = -inf` and `inf ∅ = +inf` are kept as distinct variants so that
//! comparisons such as `lbar > ubar` stay exact at empty levels.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Serialized as a bare integer or the strings `"-inf"` and `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtInt {
    NegInf,
    Finite(i64),
    PosInf,
}

impl Serialize for ExtInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtInt::Finite(v) => s.serialize_i64(*v),
            ExtInt::NegInf => s.serialize_str("-inf"),
            ExtInt::PosInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(ExtInt::Finite(v)),
            Raw::Text(t) => match t.as_str() {
                "-inf" => Ok(ExtInt::NegInf),
                "inf" | "+inf" => Ok(ExtInt::PosInf),
                other => Err(serde::de::Error::custom(format!("not an extended integer: {other:?}"))),
            },
        }
    }
}

impl ExtInt {
    pub const fn finite(v: i64) -> Self {
        ExtInt::Finite(v)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtInt::Finite(_))
    }

    pub fn as_finite(self) -> Option<i64> {
        match self {
            ExtInt::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Shift by a finite amount; sentinels absorb.
    pub fn shift(self, by: i64) -> Self {
        match self {
            ExtInt::Finite(v) => ExtInt::Finite(v + by),
            other => other,
        }
    }

    /// Sum of two extended integers. `-inf + +inf` has no meaning here and panics.
    pub fn add(self, other: ExtInt) -> Self {
        match (self, other) {
            (ExtInt::Finite(a), ExtInt::Finite(b)) => ExtInt::Finite(a + b),
            (ExtInt::NegInf, ExtInt::PosInf) | (ExtInt::PosInf, ExtInt::NegInf) => {
                panic!("indeterminate sum -inf + inf")
            }
            (ExtInt::NegInf, _) | (_, ExtInt::NegInf) => ExtInt::NegInf,
            _ => ExtInt::PosInf,
        }
    }

    /// Supremum of a set of heights (`-inf` when empty).
    pub fn sup_of<I: IntoIterator<Item = i64>>(it: I) -> Self {
        it.into_iter().max().map_or(ExtInt::NegInf, ExtInt::Finite)
    }

    /// Infimum of a set of heights (`+inf` when empty).
    pub fn inf_of<I: IntoIterator<Item = i64>>(it: I) -> Self {
        it.into_iter().min().map_or(ExtInt::PosInf, ExtInt::Finite)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtInt::NegInf => f64::NEG_INFINITY,
            ExtInt::Finite(v) => v as f64,
            ExtInt::PosInf => f64::INFINITY,
        }
    }

    fn rank(self) -> u8 {
        match self {
            ExtInt::NegInf => 0,
            ExtInt::Finite(_) => 1,
            ExtInt::PosInf => 2,
        }
    }
}

impl Ord for ExtInt {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtInt::Finite(a), ExtInt::Finite(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for ExtInt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for ExtInt {
    fn from(v: i64) -> Self {
        ExtInt::Finite(v)
    }
}

impl fmt::Display for ExtInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtInt::NegInf => f.write_str("-inf"),
            ExtInt::Finite(v) => write!(f, "{v}"),
            ExtInt::PosInf => f.write_str("inf"),
        }
    }
}
