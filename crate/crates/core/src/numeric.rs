//! Exact numbers in configuration documents.
//!
//! A value may be written as an integer (`160`), a float literal (`0.1`, read
//! through its shortest decimal form so it becomes exactly 1/10) or a string
//! holding a decimal or a `p/q` fraction (`"46000/3"`).

use qkd_milp::{format_exact, parse_exact, Rational};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum Raw {
    Int(i64),
    Float(f64),
    Text(String),
}

fn from_raw<E: de::Error>(raw: Raw) -> Result<Rational, E> {
    match raw {
        Raw::Int(i) => Ok(Rational::from_integer(i.into())),
        Raw::Float(f) if f.is_finite() => {
            parse_exact(&f.to_string()).ok_or_else(|| E::custom(format!("cannot read number {f}")))
        }
        Raw::Float(f) => Err(E::custom(format!("non-finite number {f}"))),
        Raw::Text(s) => parse_exact(&s).ok_or_else(|| E::custom(format!("cannot read number `{s}`"))),
    }
}

fn to_raw(v: &Rational) -> Raw {
    if v.is_integer() {
        if let Ok(i) = i64::try_from(v.to_integer()) {
            return Raw::Int(i);
        }
    }
    Raw::Text(format_exact(v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    from_raw(Raw::deserialize(d)?)
}

pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
    to_raw(v).serialize(s)
}

pub mod option {
    use super::*;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<Raw>::deserialize(d)?.map(from_raw).transpose()
    }
}

pub mod vec {
    use super::*;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<Raw>::deserialize(d)?.into_iter().map(from_raw).collect()
    }

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(to_raw).collect::<Vec<_>>().serialize(s)
    }
}

pub mod option_vec {
    use super::*;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Rational>>, D::Error> {
        Option::<Vec<Raw>>::deserialize(d)?
            .map(|v| v.into_iter().map(from_raw).collect())
            .transpose()
    }
}
