//! Exact rational distances.
//!
//! All built-in spaces produce integer distances, and boundary ratios are
//! quotients of point counts, so every metric quantity in the crate is an
//! exact rational.  [`Dist`] wraps `num_rational::Ratio<i64>` with the JSON
//! convention used throughout: rationals serialise as strings, `"4"` for
//! integers and `"3/7"` otherwise, which keeps reports free of binary float
//! noise.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational distance (or ratio of counts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dist(Ratio<i64>);

impl Dist {
    pub const ZERO: Dist = Dist(Ratio::new_raw(0, 1));

    pub fn integer(n: i64) -> Dist {
        Dist(Ratio::from_integer(n))
    }

    pub fn new(numer: i64, denom: i64) -> Dist {
        Dist(Ratio::new(numer, denom))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Dist {
        Dist(self.0.abs())
    }

    pub fn as_f64(&self) -> f64 {
        self.0.to_f64().expect("rational representable as f64")
    }

    /// Largest integer `k` with `k <= self`.
    pub fn floor_int(&self) -> i64 {
        self.0.floor().to_integer()
    }

    /// Smallest integer `k` with `k >= self`.
    pub fn ceil_int(&self) -> i64 {
        self.0.ceil().to_integer()
    }
}

impl From<i64> for Dist {
    fn from(n: i64) -> Dist {
        Dist::integer(n)
    }
}

impl Add for Dist {
    type Output = Dist;
    fn add(self, rhs: Dist) -> Dist {
        Dist(self.0 + rhs.0)
    }
}

impl Sub for Dist {
    type Output = Dist;
    fn sub(self, rhs: Dist) -> Dist {
        Dist(self.0 - rhs.0)
    }
}

impl Mul for Dist {
    type Output = Dist;
    fn mul(self, rhs: Dist) -> Dist {
        Dist(self.0 * rhs.0)
    }
}

impl Div for Dist {
    type Output = Dist;
    fn div(self, rhs: Dist) -> Dist {
        Dist(self.0 / rhs.0)
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Dist {
    type Err = String;

    /// Accepts integers (`3`), exact fractions (`3/2`), and exact decimal
    /// notation (`0.2` means two tenths, not the nearest float).
    fn from_str(s: &str) -> Result<Dist, String> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|e| format!("bad numerator: {e}"))?;
            let d: i64 = d.trim().parse().map_err(|e| format!("bad denominator: {e}"))?;
            if d == 0 {
                return Err("zero denominator".into());
            }
            return Ok(Dist::new(n, d));
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("bad decimal fraction: {s:?}"));
            }
            if frac_part.len() > 15 {
                return Err("decimal fraction longer than 15 digits".into());
            }
            let negative = int_part.trim_start().starts_with('-');
            let whole: i64 = if int_part == "-" || int_part.is_empty() {
                0
            } else {
                int_part.parse().map_err(|e| format!("bad integer part: {e}"))?
            };
            let frac: i64 = frac_part.parse().map_err(|e| format!("bad fraction: {e}"))?;
            let denom = 10i64.pow(frac_part.len() as u32);
            let signed_frac = if negative { -frac } else { frac };
            return Ok(Dist::new(whole * denom + signed_frac, denom));
        }
        let n: i64 = s.parse().map_err(|e| format!("bad integer: {e}"))?;
        Ok(Dist::integer(n))
    }
}

impl Serialize for Dist {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Dist, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}
