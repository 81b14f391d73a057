//! Exact decimal numbers for table cells and answers.
//!
//! Cells compare with exact equality, so numbers are kept as reduced
//! rationals rather than floats. Only terminating decimals and `p/q`
//! fractions are accepted on input.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Decimal(Rational64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not an exact decimal: {0:?}")]
pub struct ParseDecimalError(pub String);

impl Decimal {
    pub fn from_int(n: i64) -> Self {
        Decimal(Rational64::from_integer(n))
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_i64(&self) -> Option<i64> {
        if self.is_integer() {
            Some(*self.0.numer())
        } else {
            None
        }
    }

    /// Digits after the decimal point in the terminating expansion, if any.
    fn terminating_scale(&self) -> Option<u32> {
        let mut den = *self.0.denom();
        let (mut twos, mut fives) = (0u32, 0u32);
        while den % 2 == 0 {
            den /= 2;
            twos += 1;
        }
        while den % 5 == 0 {
            den /= 5;
            fives += 1;
        }
        (den == 1).then_some(twos.max(fives))
    }
}

impl From<i64> for Decimal {
    fn from(n: i64) -> Self {
        Decimal::from_int(n)
    }
}

impl FromStr for Decimal {
    type Err = ParseDecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDecimalError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| err())?;
            let d: i64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Decimal(Rational64::new(n, d)));
        }
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || (body.contains('.') && frac_part.is_empty())
        {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let mut numer: i64 = digits.parse().map_err(|_| err())?;
        let denom = 10i64
            .checked_pow(frac_part.len() as u32)
            .ok_or_else(err)?;
        if neg {
            numer = -numer;
        }
        Ok(Decimal(Rational64::new(numer, denom)))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            return write!(f, "{}", self.0.numer());
        }
        match self.terminating_scale() {
            Some(scale) if scale <= 18 => {
                let scaled = self.0 * Rational64::from_integer(10i64.pow(scale));
                let n = scaled.to_integer();
                let sign = if n < 0 { "-" } else { "" };
                let abs = n.unsigned_abs();
                let pow = 10u64.pow(scale);
                write!(f, "{sign}{}.{:0width$}", abs / pow, abs % pow, width = scale as usize)
            }
            _ => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Decimal {
    pub fn cmp_value(&self, other: &Decimal) -> Ordering {
        self.0.cmp(&other.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl serde::Serialize for Decimal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.as_i64() {
            Some(n) => s.serialize_i64(n),
            None => s.serialize_f64(self.to_f64()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_terminating_decimals() {
        for s in ["0", "7", "-12", "3.25", "-0.5", "2007", "0.125"] {
            let d: Decimal = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert_eq!("3.50".parse::<Decimal>().unwrap().to_string(), "3.5");
        assert_eq!("1/3".parse::<Decimal>().unwrap().to_string(), "1/3");
    }

    #[test]
    fn equality_is_exact() {
        let a: Decimal = "0.1".parse().unwrap();
        let b: Decimal = "1/10".parse().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, "0.10000001".parse().unwrap());
        assert!(Decimal::from_int(2) < "2.5".parse().unwrap());
    }

    #[test]
    fn rejects_non_numbers() {
        for s in ["", "abc", "1.2.3", "$5", "1,000", "5.", "-", "1/0"] {
            assert!(s.parse::<Decimal>().is_err(), "{s}");
        }
    }
}
