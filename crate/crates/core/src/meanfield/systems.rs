use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{domain, RapError, Result};
use crate::order::Order;

use super::newton::{damped_newton, NewtonOptions};
use super::poly::ExponentPolynomial;
use super::quadrature::moment_integral;
use super::surface::SurfaceModelKind;

/// Maximal residual accepted for a reported solution.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

/// `lambda_alpha = alpha lambda_1 - (alpha - 1)`.
pub fn lambda_alpha(alpha: Order, lambda1: f64) -> f64 {
    let a = alpha.value();
    a * lambda1 - (a - 1.0)
}

/// `gamma = 1 + alpha / (1 - lambda_alpha)`.
pub fn fractal_dimension(lambda_alpha: f64, alpha: Order) -> Result<f64> {
    if !(lambda_alpha < 1.0) {
        return Err(domain!("lambda_{alpha} = {lambda_alpha} must be below 1"));
    }
    Ok(1.0 + alpha.value() / (1.0 - lambda_alpha))
}

/// Fractal dimensions of the ballistic-growth formula and of the affine
/// surface model, for comparison.
pub fn reference_gammas(d: u32) -> (f64, f64) {
    let d = d as f64;
    let abk = d + 1.0 - d * (2.0 * (d - 2f64.powf(d + 1.0) + 3.0) / (d + 2.0)).exp();
    let affine = d + (d + 1.0) / (d + 2.0);
    (abk, affine)
}

/// `lambda_1` of the plane uniform model in closed form.
pub fn plane_uniform_lambda1() -> f64 {
    E * PI.sqrt() / 2.0 * erfc(1.0)
}

/// One of the six closed exponent systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExponentSystem {
    Ud2,
    Ud3,
    Ud4,
    It2,
    It3,
    It4,
}

impl ExponentSystem {
    pub const ALL: [ExponentSystem; 6] = [
        ExponentSystem::Ud2,
        ExponentSystem::Ud3,
        ExponentSystem::Ud4,
        ExponentSystem::It2,
        ExponentSystem::It3,
        ExponentSystem::It4,
    ];

    pub fn new(model: SurfaceModelKind, d: u32) -> Result<Self> {
        use SurfaceModelKind::*;
        Ok(match (model, d) {
            (UniformDistribution, 2) => ExponentSystem::Ud2,
            (UniformDistribution, 3) => ExponentSystem::Ud3,
            (UniformDistribution, 4) => ExponentSystem::Ud4,
            (IdenticalTwins, 2) => ExponentSystem::It2,
            (IdenticalTwins, 3) => ExponentSystem::It3,
            (IdenticalTwins, 4) => ExponentSystem::It4,
            (AffineRef22, _) => return Err(domain!("the affine model has no exponent system")),
            _ => {
                return Err(domain!(
                    "exponent systems exist for d = 2, 3, 4 only, got {d}"
                ))
            }
        })
    }

    pub fn model(&self) -> SurfaceModelKind {
        match self {
            ExponentSystem::Ud2 | ExponentSystem::Ud3 | ExponentSystem::Ud4 => {
                SurfaceModelKind::UniformDistribution
            }
            _ => SurfaceModelKind::IdenticalTwins,
        }
    }

    pub fn dim(&self) -> u32 {
        match self {
            ExponentSystem::Ud2 | ExponentSystem::It2 => 2,
            ExponentSystem::Ud3 | ExponentSystem::It3 => 3,
            ExponentSystem::Ud4 | ExponentSystem::It4 => 4,
        }
    }

    /// Amplitude unknowns besides `lambda_1` (`m_1` is the gauge).
    pub fn unknowns(&self) -> Vec<Order> {
        let o = |n, d| Order::new(n, d);
        match self {
            ExponentSystem::Ud2 | ExponentSystem::Ud3 => vec![o(2, 1)],
            ExponentSystem::Ud4 => vec![o(2, 1), o(3, 1)],
            ExponentSystem::It2 => vec![o(1, 2), o(2, 1)],
            ExponentSystem::It3 => vec![o(2, 1), o(3, 1)],
            ExponentSystem::It4 => vec![o(3, 2), o(2, 1), o(3, 1), o(4, 1)],
        }
    }

    /// Moment orders of the equations, one per unknown (including `lambda_1`).
    pub fn equation_orders(&self) -> Vec<Order> {
        let o = |n, d| Order::new(n, d);
        match self {
            ExponentSystem::Ud2 | ExponentSystem::Ud3 => vec![o(1, 1), o(2, 1)],
            ExponentSystem::Ud4 | ExponentSystem::It3 => vec![o(1, 1), o(2, 1), o(3, 1)],
            ExponentSystem::It2 => vec![o(1, 2), o(1, 1), o(2, 1)],
            ExponentSystem::It4 => vec![o(1, 1), o(3, 2), o(2, 1), o(3, 1), o(4, 1)],
        }
    }

    /// Amplitudes fixed by the others: `m_3 = 3 m_1 m_2` for the uniform
    /// three-dimensional system.
    pub fn derived(&self, amps: &BTreeMap<Order, f64>) -> Vec<(Order, f64)> {
        match self {
            ExponentSystem::Ud3 => vec![(
                Order::int(3),
                3.0 * amps[&Order::ONE] * amps[&Order::int(2)],
            )],
            _ => Vec::new(),
        }
    }

    /// The exponent `Q(x)` of the moment integrals, as written for each system.
    pub fn exponent(&self, amps: &BTreeMap<Order, f64>) -> Result<ExponentPolynomial> {
        let m = |n: u32, d: u32| -> f64 {
            amps.get(&Order::new(n, d))
                .copied()
                .unwrap_or_else(|| panic!("amplitude m_{} missing", Order::new(n, d)))
        };
        let o = |n, d| Order::new(n, d);
        let terms: Vec<(Order, f64)> = match self {
            ExponentSystem::Ud2 => {
                let den = m(2, 1);
                vec![(o(1, 1), 2.0 * m(1, 1) / den), (o(2, 1), 1.0 / den)]
            }
            ExponentSystem::Ud3 => {
                let den = 3.0 * m(1, 1) * m(2, 1);
                vec![
                    (o(1, 1), 3.0 * m(2, 1) / den),
                    (o(2, 1), 3.0 * m(1, 1) / den),
                    (o(3, 1), 1.0 / den),
                ]
            }
            ExponentSystem::Ud4 => {
                let den = 4.0 * m(1, 1) * m(3, 1) + 3.0 * m(2, 1).powi(2);
                vec![
                    (o(1, 1), 4.0 * m(3, 1) / den),
                    (o(2, 1), 6.0 * m(2, 1) / den),
                    (o(3, 1), 4.0 * m(1, 1) / den),
                    (o(4, 1), 1.0 / den),
                ]
            }
            ExponentSystem::It2 => {
                let den = m(2, 1);
                let c = 4.0 * 2f64.sqrt() / (3.0 * PI);
                vec![
                    (o(1, 1), 2.0 * m(1, 1) / den),
                    (o(3, 2), -c * m(1, 2) / den),
                    (o(2, 1), 1.0 / den),
                ]
            }
            ExponentSystem::It3 => {
                let den = m(3, 1);
                vec![
                    (o(1, 1), 3.0 * m(2, 1) / den),
                    (o(2, 1), 9.0 * m(1, 1) / (4.0 * den)),
                    (o(3, 1), 1.0 / den),
                ]
            }
            ExponentSystem::It4 => {
                let den = m(4, 1);
                let c = 32.0 * 2f64.sqrt() / (15.0 * PI);
                vec![
                    (o(1, 1), 4.0 * m(3, 1) / den),
                    (o(2, 1), 6.0 * m(2, 1) / den),
                    (o(5, 2), -c * m(3, 2) / den),
                    (o(3, 1), 4.0 * m(1, 1) / den),
                    (o(4, 1), 1.0 / den),
                ]
            }
        };
        ExponentPolynomial::new(terms)
    }

    /// Full amplitude map from `m_1` and the unknowns, in the order of
    /// [`ExponentSystem::unknowns`].
    pub fn amplitudes(&self, m1: f64, unknowns: &[f64]) -> BTreeMap<Order, f64> {
        let mut amps: BTreeMap<Order, f64> = self
            .unknowns()
            .into_iter()
            .zip(unknowns.iter().copied())
            .collect();
        amps.insert(Order::ONE, m1);
        let derived = self.derived(&amps);
        amps.extend(derived);
        amps
    }

    /// Equation residuals `(m_alpha |lambda_alpha| - I_alpha) / m_1^alpha`.
    ///
    /// The pore equation (`alpha = d`) uses `-lambda_d`, which equals
    /// `|lambda_d|` on the valid domain and stays smooth across its edge.
    pub fn residuals(&self, lambda1: f64, amps: &BTreeMap<Order, f64>) -> Result<Vec<f64>> {
        let q = self.exponent(amps)?;
        let m1 = amps[&Order::ONE];
        let d = Order::int(self.dim());
        self.equation_orders()
            .into_iter()
            .map(|alpha| {
                let lam = lambda_alpha(alpha, lambda1);
                let factor = if alpha == d { -lam } else { lam.abs() };
                let m = amps[&alpha];
                let integral = moment_integral(alpha, &q)?;
                Ok((m * factor - integral) / alpha.pow(m1))
            })
            .collect()
    }

    /// Starting point `lambda_1 = 1 - 1/d`, all amplitude ratios 1.
    pub fn default_guess(&self) -> Guess {
        Guess {
            lambda1: 1.0 - 1.0 / self.dim() as f64,
            amplitudes: self.amplitudes(1.0, &vec![1.0; self.unknowns().len()]),
        }
    }
}

/// Initial point for the root finder; `amplitudes` must contain `m_1` and
/// every unknown of the system, in any gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct Guess {
    pub lambda1: f64,
    pub amplitudes: BTreeMap<Order, f64>,
}

/// Exponents and amplitude ratios solving one closed system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    pub model: SurfaceModelKind,
    pub d: u32,
    pub lambda1: f64,
    /// `lambda_alpha` for `alpha = 0..=d` and every amplitude order.
    pub lambdas: BTreeMap<Order, f64>,
    /// `m_alpha / m_1^alpha`.
    pub amplitudes: BTreeMap<Order, f64>,
    pub gamma: f64,
    #[serde(rename = "residual")]
    pub residual_norm: f64,
    #[serde(skip)]
    pub iterations: usize,
}

impl MeanFieldSolution {
    fn assemble(
        system: ExponentSystem,
        lambda1: f64,
        amplitudes: BTreeMap<Order, f64>,
        residual_norm: f64,
        iterations: usize,
    ) -> Result<Self> {
        let d = system.dim();
        if !(lambda1 > 0.0 && lambda1 < (d as f64 - 1.0) / d as f64) {
            return Err(RapError::Validity(format!(
                "lambda_1 = {lambda1} outside (0, {}) for {system:?}",
                (d as f64 - 1.0) / d as f64
            )));
        }
        if !(residual_norm < RESIDUAL_LIMIT) {
            return Err(RapError::Validity(format!(
                "residual {residual_norm:e} above {RESIDUAL_LIMIT:e}"
            )));
        }
        let mut lambdas: BTreeMap<Order, f64> = (0..=d)
            .map(|k| (Order::int(k), lambda_alpha(Order::int(k), lambda1)))
            .collect();
        for &alpha in amplitudes.keys() {
            lambdas.insert(alpha, lambda_alpha(alpha, lambda1));
        }
        Ok(MeanFieldSolution {
            model: system.model(),
            d,
            lambda1,
            lambdas,
            amplitudes,
            gamma: fractal_dimension(lambda1, Order::ONE)?,
            residual_norm,
            iterations,
        })
    }

    pub fn amplitude(&self, alpha: Order) -> Option<f64> {
        self.amplitudes.get(&alpha).copied()
    }
}

/// Solve a system by damped Newton from `guess`, after moving the guess to
/// the gauge `m_1 = 1`.
pub fn solve_system(system: ExponentSystem, guess: &Guess) -> Result<MeanFieldSolution> {
    solve_system_with(system, guess, NewtonOptions::default())
}

pub fn solve_system_with(
    system: ExponentSystem,
    guess: &Guess,
    opts: NewtonOptions,
) -> Result<MeanFieldSolution> {
    let unknowns = system.unknowns();
    let m1 = *guess
        .amplitudes
        .get(&Order::ONE)
        .ok_or_else(|| RapError::Precondition("guess needs m_1".into()))?;
    if !(m1 > 0.0) {
        return Err(RapError::Precondition(format!("guess has m_1 = {m1}")));
    }
    let mut x0 = vec![guess.lambda1];
    for alpha in &unknowns {
        let m = guess
            .amplitudes
            .get(alpha)
            .ok_or_else(|| RapError::Precondition(format!("guess needs m_{alpha}")))?;
        x0.push(m / alpha.pow(m1));
    }
    let residual = |x: &[f64]| system.residuals(x[0], &system.amplitudes(1.0, &x[1..]));
    let admissible = |x: &[f64]| x.iter().all(|&v| v > 0.0);
    let res = damped_newton(residual, admissible, &x0, opts)?;
    let amplitudes = system.amplitudes(1.0, &res.x[1..]);
    MeanFieldSolution::assemble(system, res.x[0], amplitudes, res.residual, res.iterations)
}

/// Relative violation of `m_3 = 3 m_1 m_2 (10 lambda_1 - 3) / (4 (3 lambda_1 - 1))`
/// by a three-dimensional twin solution.
pub fn twin_constraint_violation(sol: &MeanFieldSolution) -> f64 {
    let l = sol.lambda1;
    let m1 = sol.amplitudes[&Order::ONE];
    let m2 = sol.amplitudes[&Order::int(2)];
    let m3 = sol.amplitudes[&Order::int(3)];
    let predicted = 3.0 * m1 * m2 * (10.0 * l - 3.0) / (4.0 * (3.0 * l - 1.0));
    ((m3 - predicted) / predicted).abs()
}

/// Tolerance on [`twin_constraint_violation`].
pub const TWIN_CONSTRAINT_TOL: f64 = 1e-6;

/// Exponents of `model` in dimension `d`, solved from the default guess.
/// The plane uniform case is closed-form.
pub fn solve_exponents(model: SurfaceModelKind, d: u32) -> Result<MeanFieldSolution> {
    let system = ExponentSystem::new(model, d)?;
    let sol = match system {
        ExponentSystem::Ud2 => {
            let lambda1 = plane_uniform_lambda1();
            let amplitudes = system.amplitudes(1.0, &[1.0]);
            let residual = system
                .residuals(lambda1, &amplitudes)?
                .iter()
                .fold(0.0f64, |m, r| m.max(r.abs()));
            MeanFieldSolution::assemble(system, lambda1, amplitudes, residual, 0)?
        }
        _ => solve_system(system, &system.default_guess())?,
    };
    if system == ExponentSystem::It3 {
        let v = twin_constraint_violation(&sol);
        if !(v < TWIN_CONSTRAINT_TOL) {
            return Err(RapError::Validity(format!(
                "twin constraint on m_3 violated by {v:e}"
            )));
        }
    }
    Ok(sol)
}
