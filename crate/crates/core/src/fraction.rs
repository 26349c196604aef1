//! Exact non-negative rationals for consistency scores and failure rates.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A reduced fraction `numer/denom` with `denom > 0`.
///
/// Serialized as the string `"numer/denom"` so files never carry a rounded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<u64>);

impl Fraction {
    pub const ZERO: Fraction = Fraction(Ratio::new_raw(0, 1));
    pub const ONE: Fraction = Fraction(Ratio::new_raw(1, 1));
    pub const HALF: Fraction = Fraction(Ratio::new_raw(1, 2));

    /// Panics if `denom == 0`.
    pub fn new(numer: u64, denom: u64) -> Self {
        assert!(denom > 0, "fraction with zero denominator");
        Fraction(Ratio::new(numer, denom))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// Percentage with two decimals, rounded half up: `3/10` renders `30.00%`.
    pub fn percent(&self) -> String {
        let n = self.numer() as u128;
        let d = self.denom() as u128;
        let hundredths = (n * 10_000 * 2 + d) / (2 * d);
        format!("{}.{:02}%", hundredths / 100, hundredths % 100)
    }

    /// Nearest fraction with denominator 10^9 to a finite non-negative float.
    ///
    /// Used to turn configured fractions such as `0.2` into exact rationals
    /// before multiplying, so `ceil(0.2 * 15)` is 3 and not 4.
    pub fn from_f64_approx(value: f64) -> Option<Self> {
        if !value.is_finite() || value < 0.0 {
            return None;
        }
        let scaled = libm::round(value * 1e9);
        if scaled > u64::MAX as f64 {
            return None;
        }
        Some(Fraction::new(scaled as u64, 1_000_000_000))
    }

    /// `ceil(self * n)`.
    pub fn ceil_mul(&self, n: usize) -> usize {
        let num = self.numer() as u128 * n as u128;
        let d = self.denom() as u128;
        num.div_ceil(d) as usize
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Fraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: u64 = n.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: u64 = d.parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Fraction::new(n, d))
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_orders() {
        assert_eq!(Fraction::new(2, 4), Fraction::HALF);
        assert!(Fraction::new(3, 5) > Fraction::HALF);
        assert!(Fraction::new(4, 5) < Fraction::ONE);
        assert_eq!(Fraction::new(0, 7), Fraction::ZERO);
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(Fraction::new(3, 10).percent(), "30.00%");
        assert_eq!(Fraction::new(1, 3).percent(), "33.33%");
        assert_eq!(Fraction::new(2, 3).percent(), "66.67%");
        assert_eq!(Fraction::new(1, 8).percent(), "12.50%");
        assert_eq!(Fraction::ONE.percent(), "100.00%");
        assert_eq!(Fraction::new(1, 80_000).percent(), "0.00%");
    }

    #[test]
    fn ceil_mul_is_exact() {
        let f = Fraction::from_f64_approx(0.2).unwrap();
        assert_eq!(f.ceil_mul(10), 2);
        assert_eq!(f.ceil_mul(15), 3);
        assert_eq!(f.ceil_mul(1), 1);
        assert_eq!(f.ceil_mul(0), 0);
        assert_eq!(Fraction::ONE.ceil_mul(7), 7);
    }

    #[test]
    fn string_round_trip() {
        let f: Fraction = "6/10".parse().unwrap();
        assert_eq!(f.to_string(), "3/5");
        assert!("1/0".parse::<Fraction>().is_err());
        assert_eq!("2".parse::<Fraction>().unwrap(), Fraction::new(2, 1));
    }
}
