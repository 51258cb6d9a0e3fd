use nalgebra::{DMatrix, DVector};

use crate::error::{RapError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Converged once the max-norm of the residual drops below this.
    pub tolerance: f64,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
    /// Smallest damping factor tried before giving up on a step.
    pub min_damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 200,
            tolerance: 1e-12,
            fd_step: 1e-7,
            min_damping: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton iteration with a forward-difference Jacobian.
///
/// Each step is halved until it stays inside `admissible` and lowers the
/// max-norm residual. A residual that fails to evaluate counts as a rejected
/// step.
pub fn damped_newton<F, A>(
    mut f: F,
    admissible: A,
    x0: &[f64],
    opts: NewtonOptions,
) -> Result<NewtonResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
    A: Fn(&[f64]) -> bool,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    if fx.len() != n {
        return Err(RapError::Precondition(format!(
            "{} residuals for {n} unknowns",
            fx.len()
        )));
    }
    let mut norm = max_norm(&fx);
    let mut iterations = 0;
    while norm >= opts.tolerance {
        if iterations == opts.max_iterations || !norm.is_finite() {
            return Err(RapError::Convergence {
                iterations,
                residual: norm,
            });
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = opts.fd_step * x[j].abs().max(1e-3);
            let mut xp = x.clone();
            xp[j] += h;
            let fp = f(&xp)?;
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fx[i]) / h;
            }
        }
        let rhs = -DVector::from_column_slice(&fx);
        let Some(dx) = jac.lu().solve(&rhs) else {
            return Err(RapError::Convergence {
                iterations,
                residual: norm,
            });
        };

        let mut t = 1.0;
        let mut accepted = None;
        while t >= opts.min_damping {
            let trial: Vec<f64> = x
                .iter()
                .zip(dx.iter())
                .map(|(xi, di)| xi + t * di)
                .collect();
            if admissible(&trial) {
                if let Ok(ft) = f(&trial) {
                    let tn = max_norm(&ft);
                    if tn < norm {
                        accepted = Some((trial, ft, tn));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((xn, fxn, nn)) = accepted else {
            return Err(RapError::Convergence {
                iterations,
                residual: norm,
            });
        };
        x = xn;
        fx = fxn;
        norm = nn;
        iterations += 1;
    }
    Ok(NewtonResult {
        x,
        residual: norm,
        iterations,
    })
}
