//! Nonnegative rational orders, used both for moment orders `alpha` and for
//! the powers appearing in surface polynomials.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, RapError};

/// A reduced nonnegative fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Order {
    num: u32,
    den: u32,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Order {
    pub const ZERO: Order = Order { num: 0, den: 1 };
    pub const HALF: Order = Order { num: 1, den: 2 };
    pub const ONE: Order = Order { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Self {
        assert!(den > 0, "order denominator must be positive");
        let g = gcd(num, den).max(1);
        Order {
            num: num / g,
            den: den / g,
        }
    }

    pub const fn int(n: u32) -> Self {
        Order { num: n, den: 1 }
    }

    pub fn half_int(twice: u32) -> Self {
        Order::new(twice, 2)
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn add(&self, other: Order) -> Order {
        Order::new(
            self.num * other.den + other.num * self.den,
            self.den * other.den,
        )
    }

    /// `r^self` with exact fast paths for integers and half-integers.
    #[inline]
    pub fn pow(&self, r: f64) -> f64 {
        match self.den {
            1 => r.powi(self.num as i32),
            2 => r.powi((self.num / 2) as i32) * r.sqrt(),
            _ => r.powf(self.value()),
        }
    }
}

impl PartialOrd for Order {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Order {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u64 * other.den as u64).cmp(&(other.num as u64 * self.den as u64))
    }
}

impl fmt::Display for Order {
    /// Decimal form for integers and half-integers (`"1"`, `"0.5"`, `"1.5"`),
    /// `num/den` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.den {
            1 => write!(f, "{}", self.num),
            2 => write!(f, "{}.5", self.num / 2),
            _ => write!(f, "{}/{}", self.num, self.den),
        }
    }
}

impl FromStr for Order {
    type Err = RapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let num: u32 = n.trim().parse().map_err(|_| domain!("bad order {s:?}"))?;
            let den: u32 = d.trim().parse().map_err(|_| domain!("bad order {s:?}"))?;
            if den == 0 {
                return Err(domain!("order {s:?} has zero denominator"));
            }
            return Ok(Order::new(num, den));
        }
        if s.starts_with('-') {
            return Err(domain!("order must be nonnegative, got {s:?}"));
        }
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        let int_part = if int_part.is_empty() { "0" } else { int_part };
        let whole: u32 = int_part.parse().map_err(|_| domain!("bad order {s:?}"))?;
        let frac = frac_part.trim_end_matches('0');
        if frac.is_empty() {
            return Ok(Order::int(whole));
        }
        if frac.len() > 6 {
            return Err(domain!("order {s:?} has too many decimals; use num/den"));
        }
        let den = 10u32.pow(frac.len() as u32);
        let num: u32 = frac.parse().map_err(|_| domain!("bad order {s:?}"))?;
        Ok(Order::new(whole * den + num, den))
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a comma-separated list such as `"0.5,1,3/2"`.
pub fn parse_orders(list: &str) -> Result<Vec<Order>, RapError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}
