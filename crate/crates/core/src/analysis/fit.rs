use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{domain, RapError, Result};

/// Weighted least-squares fit of `y(n) = lambda + b (ln n)^c` with `c < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda: f64,
    pub b: f64,
    pub c: f64,
    /// One-sigma uncertainty of `lambda`, inflated by `sqrt(chi2/dof)` when
    /// that exceeds 1.
    pub sigma_lambda: f64,
    pub chi2: f64,
    pub points: usize,
}

impl FitResult {
    pub fn dof(&self) -> usize {
        self.points.saturating_sub(3)
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof().max(1) as f64
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.lambda + self.b * n.ln().powf(self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Scan of `|c|` before refinement, log-spaced.
    pub c_grid: (f64, f64, usize),
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            c_grid: (1e-2, 20.0, 240),
            max_iterations: 500,
        }
    }
}

/// 95% quantile of chi-squared with two degrees of freedom.
const CHI2_2DOF_95: f64 = 5.991;

struct Data {
    logn: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Data {
    fn chi2(&self, lambda: f64, b: f64, c: f64) -> f64 {
        self.logn
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((l, y), w)| {
                let r = y - lambda - b * l.powf(c);
                w * r * r
            })
            .sum()
    }

    /// Best `(lambda, b)` for fixed `c`, by weighted linear least squares.
    fn linear(&self, c: f64) -> Option<(f64, f64, f64)> {
        let mut ata = Matrix2::zeros();
        let mut aty = Vector2::zeros();
        for ((l, y), w) in self.logn.iter().zip(&self.y).zip(&self.w) {
            let g = l.powf(c);
            ata += Matrix2::new(*w, w * g, w * g, w * g * g);
            aty += Vector2::new(w * y, w * g * y);
        }
        let sol = ata.lu().solve(&aty)?;
        Some((sol[0], sol[1], self.chi2(sol[0], sol[1], c)))
    }

    fn constant(&self, c: f64, points: usize) -> FitResult {
        let sw: f64 = self.w.iter().sum();
        let lambda = self.y.iter().zip(&self.w).map(|(y, w)| w * y).sum::<f64>() / sw;
        let chi2 = self.chi2(lambda, 0.0, c);
        let dof = points.saturating_sub(1).max(1) as f64;
        FitResult {
            lambda,
            b: 0.0,
            c,
            sigma_lambda: ((chi2 / dof).max(1.0) / sw).sqrt(),
            chi2,
            points,
        }
    }

    /// `J^T W J` and `J^T W r` in the parameters `(lambda, b, u)`, `c = -e^u`.
    fn normal_equations(&self, p: &[f64; 3]) -> (DMatrix<f64>, DVector<f64>) {
        let c = -p[2].exp();
        let mut jtj = DMatrix::zeros(3, 3);
        let mut jtr = DVector::zeros(3);
        for ((l, y), w) in self.logn.iter().zip(&self.y).zip(&self.w) {
            let g = l.powf(c);
            let jac = [1.0, g, p[1] * g * l.ln() * c];
            let r = y - p[0] - p[1] * g;
            for i in 0..3 {
                jtr[i] += w * jac[i] * r;
                for j in 0..3 {
                    jtj[(i, j)] += w * jac[i] * jac[j];
                }
            }
        }
        (jtj, jtr)
    }
}

/// Fit `lambda + b (ln n)^c`, `c < 0`, to `(n, y)` points with one-sigma
/// errors `sigma`.
///
/// `c` is first profiled on a grid (the other two parameters enter
/// linearly), then all three are refined by Levenberg-Marquardt with `|c|`
/// kept inside the grid range. An optimum at the small-`|c|` end of the
/// range means the correction is not identified; the weighted mean with
/// `b = 0` is returned instead unless the correction lowers chi2
/// significantly.
pub fn fit_asymptote(points: &[(f64, f64)], sigma: &[f64]) -> Result<FitResult> {
    fit_asymptote_with(points, sigma, FitOptions::default())
}

pub fn fit_asymptote_with(points: &[(f64, f64)], sigma: &[f64], opts: FitOptions) -> Result<FitResult> {
    if points.len() < 10 {
        return Err(domain!("fit needs at least 10 points, got {}", points.len()));
    }
    if sigma.len() != points.len() {
        return Err(domain!("{} sigmas for {} points", sigma.len(), points.len()));
    }
    for (i, (&(n, y), &s)) in points.iter().zip(sigma).enumerate() {
        if !(n > 1.0 && n.is_finite() && y.is_finite()) {
            return Err(domain!("point {i} ({n}, {y}) is not usable (need n > 1)"));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(domain!("sigma of point {i} is {s}; must be positive"));
        }
    }
    let data = Data {
        logn: points.iter().map(|p| p.0.ln()).collect(),
        y: points.iter().map(|p| p.1).collect(),
        w: sigma.iter().map(|s| 1.0 / (s * s)).collect(),
    };

    let (lo, hi, count) = opts.c_grid;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 0..count {
        let c = -lo * (hi / lo).powf(k as f64 / (count - 1).max(1) as f64);
        if let Some((lambda, b, chi2)) = data.linear(c) {
            if chi2.is_finite() && best.map_or(true, |bst| chi2 < bst.3) {
                best = Some((lambda, b, c, chi2));
            }
        }
    }
    let Some((lambda, b, c, mut chi2)) = best else {
        return Err(domain!("no admissible starting point for the fit"));
    };

    let (u_lo, u_hi) = (lo.ln(), hi.ln());
    let mut p = [lambda, b, (-c).ln()];
    let mut mu = 1e-3;
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let (jtj, jtr) = data.normal_equations(&p);
        let mut improved = false;
        while mu < 1e12 {
            let mut a = jtj.clone();
            for i in 0..3 {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).clamp(u_lo, u_hi)];
            let trial_chi2 = data.chi2(trial[0], trial[1], -trial[2].exp());
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let small_step = trial.iter().zip(&p).all(|(t, x)| (t - x).abs() <= 1e-12 * (1.0 + x.abs()));
                let small_gain = chi2 - trial_chi2 <= 1e-14 * chi2;
                p = trial;
                chi2 = trial_chi2;
                mu = (mu / 10.0).max(1e-15);
                improved = true;
                converged = small_step || small_gain;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: a (numerical) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let c = -p[2].exp();
    let dof = points.len().saturating_sub(3).max(1) as f64;
    if p[2] <= u_lo + 1e-9 {
        // At c -> 0 the correction is indistinguishable from a shift of
        // lambda. Drop it unless it improves chi2 significantly (two extra
        // parameters, 95% level).
        let flat = data.constant(c, points.len());
        if (flat.chi2 - chi2) / (chi2 / dof).max(1.0) < CHI2_2DOF_95 {
            return Ok(flat);
        }
    }
    if !converged {
        return Err(RapError::FitConvergence {
            lambda: p[0],
            b: p[1],
            c,
            chi2,
        });
    }

    let (jtj, _) = data.normal_equations(&p);
    let var = jtj
        .try_inverse()
        .map(|cov| cov[(0, 0)])
        .filter(|v| v.is_finite() && *v > 0.0)
        .or_else(|| {
            // b ~ 0 leaves c unidentified; fall back to the fixed-c covariance.
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for (l, w) in data.logn.iter().zip(&data.w) {
                let g = l.powf(c);
                s0 += w;
                s1 += w * g;
                s2 += w * g * g;
            }
            let det = s0 * s2 - s1 * s1;
            (det > 0.0).then(|| s2 / det)
        })
        .ok_or_else(|| domain!("fit covariance is singular"))?;
    let inflation = (chi2 / dof).max(1.0);
    Ok(FitResult {
        lambda: p[0],
        b: p[1],
        c,
        sigma_lambda: (var * inflation).sqrt(),
        chi2,
        points: points.len(),
    })
}
