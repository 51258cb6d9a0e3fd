use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use libm::tgamma as gamma;
use serde::{Deserialize, Serialize};

use crate::error::{domain, RapError, Result};
use crate::geometry::unit_ball_volume;
use crate::order::Order;

use super::poly::ExponentPolynomial;

/// How the free surface `S_n(r)` is estimated from the moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurfaceModelKind {
    /// Every sphere contributes its full dilated surface.
    #[serde(rename = "UD")]
    UniformDistribution,
    /// Uniform surface minus the caps hidden by a touching twin.
    #[serde(rename = "IT")]
    IdenticalTwins,
    /// Constant surface with a hard cutoff.
    #[serde(rename = "affine")]
    AffineRef22,
}

impl SurfaceModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            SurfaceModelKind::UniformDistribution => "UD",
            SurfaceModelKind::IdenticalTwins => "IT",
            SurfaceModelKind::AffineRef22 => "affine",
        }
    }
}

impl fmt::Display for SurfaceModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SurfaceModelKind {
    type Err = RapError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ud" | "uniform" => Ok(SurfaceModelKind::UniformDistribution),
            "it" | "twins" => Ok(SurfaceModelKind::IdenticalTwins),
            "affine" | "ref22" => Ok(SurfaceModelKind::AffineRef22),
            _ => Err(domain!(
                "unknown surface model {s:?} (expected UD, IT or affine)"
            )),
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficient of `r^((d-1)/2) M_((d-1)/2)` removed by the twin caps.
pub fn twin_coefficient(d: u32) -> f64 {
    let h = (d as f64 - 1.0) / 2.0;
    (2.0 * PI).powf(h) / gamma(h + 1.0)
}

/// Moment orders a surface model reads, besides `M_0 = n`.
pub fn required_orders(model: SurfaceModelKind, d: u32) -> Vec<Order> {
    let mut orders: Vec<Order> = match model {
        SurfaceModelKind::AffineRef22 => vec![Order::int(d - 1)],
        _ => (1..d).map(Order::int).collect(),
    };
    if model == SurfaceModelKind::IdenticalTwins {
        orders.push(Order::half_int(d - 1));
    }
    orders.sort();
    orders.dedup();
    orders
}

/// `S_n(r) = sum_beta s_beta r^beta` for the given model.
pub fn surface_coefficients(
    model: SurfaceModelKind,
    d: u32,
    moments: &BTreeMap<Order, f64>,
    n: u64,
) -> Result<ExponentPolynomial> {
    if d < 2 {
        return Err(domain!("dimension must be at least 2, got {d}"));
    }
    let moment = |order: Order| -> Result<f64> {
        if order == Order::ZERO {
            return Ok(n as f64);
        }
        moments
            .get(&order)
            .copied()
            .ok_or_else(|| RapError::Precondition(format!("surface model {model} needs M_{order}")))
    };
    let area = d as f64 * unit_ball_volume(d)?;
    let mut terms = Vec::with_capacity(d as usize + 1);
    match model {
        SurfaceModelKind::AffineRef22 => {
            terms.push((Order::ZERO, area * moment(Order::int(d - 1))?));
        }
        SurfaceModelKind::UniformDistribution | SurfaceModelKind::IdenticalTwins => {
            for k in 0..d {
                let m = moment(Order::int(d - 1 - k))?;
                terms.push((Order::int(k), area * binomial(d - 1, k) * m));
            }
            if model == SurfaceModelKind::IdenticalTwins {
                let half = Order::half_int(d - 1);
                terms.push((half, -twin_coefficient(d) * moment(half)?));
            }
        }
    }
    ExponentPolynomial::new(terms)
}

/// `P_n(r' > r) = exp(-int_0^r S / pore)`.
pub fn insertion_cdf(surface: &ExponentPolynomial, pore: f64, r: f64) -> Result<f64> {
    if !(pore > 0.0 && pore.is_finite()) {
        return Err(domain!("pore volume must be positive, got {pore}"));
    }
    if !(r >= 0.0) {
        return Err(domain!("radius must be nonnegative, got {r}"));
    }
    let exponent = surface.integral().eval(r) / pore;
    if exponent < 0.0 {
        return Err(RapError::ModelValidity(format!(
            "integrated surface is negative at r={r} (exponent {exponent}); the CDF would exceed 1"
        )));
    }
    Ok((-exponent).exp())
}

/// `max(0, 1 - s0 r / pore)`.
pub fn insertion_cdf_affine(s0: f64, pore: f64, r: f64) -> f64 {
    (1.0 - s0 * r / pore).max(0.0)
}

/// Insertion-CDF exponent in the scaling variable `x = r n^(1-lambda_1)`:
/// the model surface built from amplitudes `m_alpha` (with `m_0 = 1`),
/// integrated, and divided by the pore amplitude `V_d m_d`.
pub fn scaled_exponent(
    model: SurfaceModelKind,
    d: u32,
    amplitudes: &BTreeMap<Order, f64>,
) -> Result<ExponentPolynomial> {
    let m_d = amplitudes
        .get(&Order::int(d))
        .copied()
        .ok_or_else(|| RapError::Precondition(format!("scaled exponent needs m_{d}")))?;
    let surface = surface_coefficients(model, d, amplitudes, 1)?;
    Ok(surface.integral().scale(1.0 / (unit_ball_volume(d)? * m_d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cap_area;
    use proptest::prelude::*;

    fn moments(pairs: &[(Order, f64)]) -> BTreeMap<Order, f64> {
        pairs.iter().copied().collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn plane_uniform_surface_is_sum_of_perimeters() {
        let m = moments(&[(Order::ONE, 3.5)]);
        let s = surface_coefficients(SurfaceModelKind::UniformDistribution, 2, &m, 10).unwrap();
        assert_eq!(s.terms().len(), 2);
        assert!(rel(s.coefficient(Order::ZERO), 2.0 * PI * 3.5) < 1e-15);
        assert!(rel(s.coefficient(Order::ONE), 2.0 * PI * 10.0) < 1e-15);
    }

    #[test]
    fn twin_coefficients() {
        let m = moments(&[(Order::ONE, 2.0), (Order::int(2), 5.0)]);
        let s = surface_coefficients(SurfaceModelKind::IdenticalTwins, 3, &m, 7).unwrap();
        assert!(rel(s.coefficient(Order::ONE), 6.0 * PI * 2.0) < 1e-14);
        assert!(rel(s.coefficient(Order::ZERO), 4.0 * PI * 5.0) < 1e-14);
        assert_eq!(s.terms().len(), 3);

        let m = moments(&[
            (Order::ONE, 1.0),
            (Order::int(2), 1.0),
            (Order::int(3), 1.0),
            (Order::new(3, 2), 2.0),
        ]);
        let s = surface_coefficients(SurfaceModelKind::IdenticalTwins, 4, &m, 1).unwrap();
        let v4 = PI * PI / 2.0;
        let expected = -(16.0 * 2f64.sqrt() / (3.0 * PI)) * v4 * 2.0;
        assert!(rel(s.coefficient(Order::new(3, 2)), expected) < 1e-14);

        let m = moments(&[(Order::ONE, 1.0), (Order::HALF, 1.0)]);
        let s = surface_coefficients(SurfaceModelKind::IdenticalTwins, 2, &m, 1).unwrap();
        assert!(rel(s.coefficient(Order::HALF), -2.0 * 2f64.sqrt()) < 1e-14);
    }

    #[test]
    fn missing_moment_is_a_precondition_error() {
        let m = moments(&[(Order::ONE, 1.0)]);
        let err = surface_coefficients(SurfaceModelKind::IdenticalTwins, 2, &m, 1).unwrap_err();
        assert!(matches!(err, RapError::Precondition(_)));
        let err =
            surface_coefficients(SurfaceModelKind::UniformDistribution, 3, &m, 1).unwrap_err();
        assert!(matches!(err, RapError::Precondition(_)));
    }

    #[test]
    fn affine_keeps_only_the_constant() {
        let m = moments(&[(Order::ONE, 4.0), (Order::int(2), 9.0)]);
        let s = surface_coefficients(SurfaceModelKind::AffineRef22, 3, &m, 100).unwrap();
        assert_eq!(s.terms().len(), 1);
        assert!(rel(s.coefficient(Order::ZERO), 4.0 * PI * 9.0) < 1e-15);
        let (s0, pore) = (3.0, 12.0);
        assert_eq!(insertion_cdf_affine(s0, pore, 0.0), 1.0);
        assert_eq!(insertion_cdf_affine(s0, pore, pore / s0), 0.0);
        assert_eq!(insertion_cdf_affine(s0, pore, 10.0), 0.0);
        // First-order agreement with the exponential CDF.
        let single = ExponentPolynomial::new([(Order::ZERO, s0)]).unwrap();
        let r = 1e-5;
        let exp_cdf = insertion_cdf(&single, pore, r).unwrap();
        assert!((exp_cdf - insertion_cdf_affine(s0, pore, r)).abs() < (s0 * r / pore).powi(2));
        assert!(rel(exp_cdf, (-s0 * r / pore).exp()) < 1e-15);
    }

    #[test]
    fn cdf_domain_and_validity() {
        let s = ExponentPolynomial::new([(Order::ZERO, 1.0), (Order::HALF, -10.0)]).unwrap();
        assert_eq!(insertion_cdf(&s, 1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            insertion_cdf(&s, 1.0, 0.5),
            Err(RapError::ModelValidity(_))
        ));
        assert!(insertion_cdf(&s, 0.0, 0.5).is_err());
        assert!(insertion_cdf(&s, 1.0, -0.5).is_err());
    }

    /// Classical RK4 on `dP/dr = -S(r) P / pore`.
    fn rk4_cdf(s: &ExponentPolynomial, pore: f64, r: f64, steps: usize) -> f64 {
        let h = r / steps as f64;
        let rhs = |x: f64, p: f64| -s.eval(x) * p / pore;
        let mut p = 1.0;
        for k in 0..steps {
            let x = k as f64 * h;
            let k1 = rhs(x, p);
            let k2 = rhs(x + h / 2.0, p + h / 2.0 * k1);
            let k3 = rhs(x + h / 2.0, p + h / 2.0 * k2);
            let k4 = rhs(x + h, p + h * k3);
            p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        p
    }

    #[test]
    fn plane_uniform_cdf_matches_ode() {
        for (n, m1, pore) in [(10u64, 2.5, 40.0), (1000, 80.0, 3.0), (3, 0.2, 100.0)] {
            let m = moments(&[(Order::ONE, m1)]);
            let s = surface_coefficients(SurfaceModelKind::UniformDistribution, 2, &m, n).unwrap();
            for k in 1..=10 {
                let r = k as f64 * 0.05 * (pore / s.coefficient(Order::ZERO)).min(1.0);
                let exact = insertion_cdf(&s, pore, r).unwrap();
                let ode = rk4_cdf(&s, pore, r, 2000);
                assert!((exact - ode).abs() < 1e-10, "n={n} r={r}: {exact} vs {ode}");
            }
        }
    }

    #[test]
    fn cdf_is_normalized() {
        use crate::meanfield::quadrature::{integrate, Tolerance};
        let cases = [
            (
                SurfaceModelKind::UniformDistribution,
                2,
                vec![(Order::ONE, 5.0)],
                20u64,
                7.0,
            ),
            (
                SurfaceModelKind::UniformDistribution,
                3,
                vec![(Order::ONE, 5.0), (Order::int(2), 2.0)],
                20,
                30.0,
            ),
            (
                SurfaceModelKind::IdenticalTwins,
                2,
                vec![(Order::ONE, 5.0), (Order::HALF, 6.0)],
                20,
                7.0,
            ),
            (
                SurfaceModelKind::IdenticalTwins,
                4,
                vec![
                    (Order::ONE, 5.0),
                    (Order::int(2), 2.0),
                    (Order::int(3), 1.0),
                    (Order::new(3, 2), 3.0),
                ],
                20,
                5.0,
            ),
        ];
        for (model, d, pairs, n, pore) in cases {
            let s = surface_coefficients(model, d, &moments(&pairs), n).unwrap();
            let big = s.integral();
            // Upper limit where the exponent passes 50.
            let mut hi = 1.0;
            while big.eval(hi) / pore < 50.0 {
                hi *= 2.0;
            }
            let density = |r: f64| s.eval(r) / pore * insertion_cdf(&s, pore, r).unwrap();
            let mass = integrate(density, 0.0, hi, Tolerance::default())
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-10, "{model} d={d}: {mass}");
        }
    }

    #[test]
    fn twin_term_is_the_small_gap_cap_area() {
        // Cap of a sphere of radius r' hidden by a touching twin, seen from a
        // site at distance r: cos(phi) = r' / (r + r'). For r << r' the cap
        // area r'^(d-1) Omega(phi) approaches c_d (r r')^((d-1)/2).
        for d in 2..=4u32 {
            let rp: f64 = 1.0;
            let r: f64 = 1e-10;
            let phi = (rp / (r + rp)).acos();
            let cap = rp.powi(d as i32 - 1) * cap_area(phi, d).unwrap();
            let h = (d as f64 - 1.0) / 2.0;
            assert!(
                rel(cap / (r * rp).powf(h), twin_coefficient(d)) < 1e-6,
                "d={d}"
            );
        }
    }

    #[test]
    fn generic_builder_reproduces_transcribed_exponents() {
        let (m1, m2) = (1.3, 2.7);
        let m3 = 3.0 * m1 * m2;
        let amps = moments(&[(Order::ONE, m1), (Order::int(2), m2), (Order::int(3), m3)]);
        let q = scaled_exponent(SurfaceModelKind::UniformDistribution, 3, &amps).unwrap();
        let expected = [
            (Order::ONE, 3.0 * m2 / m3),
            (Order::int(2), 3.0 * m1 / m3),
            (Order::int(3), 1.0 / m3),
        ];
        assert_eq!(q.terms().len(), 3);
        for ((p, c), (ep, ec)) in q.terms().iter().zip(expected) {
            assert_eq!(*p, ep);
            assert!(rel(*c, ec) < 1e-14, "power {p}");
        }

        let (mh, m2) = (0.8, 0.9);
        let amps = moments(&[(Order::HALF, mh), (Order::ONE, 1.0), (Order::int(2), m2)]);
        let q = scaled_exponent(SurfaceModelKind::IdenticalTwins, 2, &amps).unwrap();
        let c = 4.0 * 2f64.sqrt() / (3.0 * PI);
        assert!(rel(q.coefficient(Order::ONE), 2.0 / m2) < 1e-14);
        assert!(rel(q.coefficient(Order::new(3, 2)), -c * mh / m2) < 1e-14);
        assert!(rel(q.coefficient(Order::int(2)), 1.0 / m2) < 1e-14);

        let amps = moments(&[
            (Order::ONE, 1.1),
            (Order::int(2), 2.0),
            (Order::int(3), 5.0),
        ]);
        let q = scaled_exponent(SurfaceModelKind::IdenticalTwins, 3, &amps).unwrap();
        assert!(rel(q.coefficient(Order::int(2)), 9.0 * 1.1 / 4.0 / 5.0) < 1e-14);

        let amps = moments(&[
            (Order::ONE, 1.0),
            (Order::new(3, 2), 1.2),
            (Order::int(2), 1.6),
            (Order::int(3), 4.8),
            (Order::int(4), 26.0),
        ]);
        let q = scaled_exponent(SurfaceModelKind::IdenticalTwins, 4, &amps).unwrap();
        let c = 32.0 * 2f64.sqrt() / (15.0 * PI);
        assert!(rel(q.coefficient(Order::new(5, 2)), -c * 1.2 / 26.0) < 1e-14);
        assert!(rel(q.coefficient(Order::ONE), 4.0 * 4.8 / 26.0) < 1e-14);
    }

    proptest! {
        #[test]
        fn uniform_cdf_is_monotone(
            d in 2u32..=4,
            m in proptest::collection::vec(0.01f64..100.0, 3),
            n in 1u64..10_000,
            pore in 0.1f64..100.0,
            r1 in 0.0f64..5.0,
            dr in 0.0f64..5.0,
        ) {
            let pairs: BTreeMap<Order, f64> = (1..d).map(|k| (Order::int(k), m[k as usize - 1])).collect();
            let s = surface_coefficients(SurfaceModelKind::UniformDistribution, d, &pairs, n).unwrap();
            let a = insertion_cdf(&s, pore, r1).unwrap();
            let b = insertion_cdf(&s, pore, r1 + dr).unwrap();
            prop_assert!(b <= a);
            prop_assert!(a <= 1.0);
        }
    }
}
