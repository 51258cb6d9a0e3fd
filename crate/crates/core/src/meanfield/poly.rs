use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::order::Order;

/// `sum_beta c_beta r^beta` with distinct nonnegative rational powers, sorted
/// ascending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExponentPolynomial {
    terms: Vec<(Order, f64)>,
}

impl ExponentPolynomial {
    /// Sorts the terms and merges equal powers. Coefficients must be finite.
    pub fn new(terms: impl IntoIterator<Item = (Order, f64)>) -> Result<Self> {
        let mut terms: Vec<(Order, f64)> = terms.into_iter().collect();
        if let Some((p, c)) = terms.iter().find(|(_, c)| !c.is_finite()) {
            return Err(domain!("coefficient of r^{p} is not finite ({c})"));
        }
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(Order, f64)> = Vec::with_capacity(terms.len());
        for (p, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += c,
                _ => merged.push((p, c)),
            }
        }
        Ok(ExponentPolynomial { terms: merged })
    }

    pub fn terms(&self) -> &[(Order, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, power: Order) -> f64 {
        self.terms
            .iter()
            .find(|t| t.0 == power)
            .map_or(0.0, |t| t.1)
    }

    /// Highest power with a nonzero coefficient.
    pub fn leading(&self) -> Option<(Order, f64)> {
        self.terms.iter().rev().find(|t| t.1 != 0.0).copied()
    }

    pub fn max_power(&self) -> Option<Order> {
        self.terms.last().map(|t| t.0)
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|(p, c)| c * p.pow(r)).sum()
    }

    /// `sum c_beta r^(beta+1) / (beta+1)`, the antiderivative vanishing at 0.
    pub fn integral(&self) -> ExponentPolynomial {
        ExponentPolynomial {
            terms: self
                .terms
                .iter()
                .map(|&(p, c)| {
                    let q = p.add(Order::ONE);
                    (q, c / q.value())
                })
                .collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> ExponentPolynomial {
        ExponentPolynomial {
            terms: self.terms.iter().map(|&(p, c)| (p, c * factor)).collect(),
        }
    }

    /// `P(s r)` as a polynomial in `r`.
    pub fn rescale_argument(&self, s: f64) -> ExponentPolynomial {
        ExponentPolynomial {
            terms: self.terms.iter().map(|&(p, c)| (p, c * p.pow(s))).collect(),
        }
    }
}

impl fmt::Display for ExponentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (p, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*r^{p}")?;
        }
        Ok(())
    }
}
