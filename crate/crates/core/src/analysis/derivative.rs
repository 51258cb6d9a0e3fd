use crate::error::{domain, Result};

/// `d ln y / d ln n` by second-order finite differences on the nonuniform
/// `(ln n, ln y)` grid: three-point central differences inside, three-point
/// one-sided differences at both ends.
pub fn log_derivative(series: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if series.len() < 3 {
        return Err(domain!("log_derivative needs at least 3 points, got {}", series.len()));
    }
    for (i, &(n, y)) in series.iter().enumerate() {
        if !(n > 0.0 && y > 0.0) {
            return Err(domain!("point {i} has n={n}, y={y}; both must be positive"));
        }
        if i > 0 && !(n > series[i - 1].0) {
            return Err(domain!("n must be strictly increasing (point {i})"));
        }
    }
    let u: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let v: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let last = u.len() - 1;
    let out = (0..=last)
        .map(|i| {
            let d = if i == 0 {
                let (h1, h2) = (u[1] - u[0], u[2] - u[1]);
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * v[0] + (h1 + h2) / (h1 * h2) * v[1]
                    - h1 / (h2 * (h1 + h2)) * v[2]
            } else if i == last {
                let (h1, h2) = (u[last - 1] - u[last - 2], u[last] - u[last - 1]);
                h2 / (h1 * (h1 + h2)) * v[last - 2] - (h1 + h2) / (h1 * h2) * v[last - 1]
                    + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * v[last]
            } else {
                let (h1, h2) = (u[i] - u[i - 1], u[i + 1] - u[i]);
                -h2 / (h1 * (h1 + h2)) * v[i - 1] + (h2 - h1) / (h1 * h2) * v[i] + h1 / (h2 * (h1 + h2)) * v[i + 1]
            };
            (series[i].0, d)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packer::checkpoint_grid;
    use proptest::prelude::*;

    fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        (0..count)
            .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
            .collect()
    }

    #[test]
    fn power_laws_are_exact() {
        let pts: Vec<(f64, f64)> = log_grid(10.0, 1e6, 50).into_iter().map(|n| (n, n * n)).collect();
        for (_, d) in log_derivative(&pts).unwrap() {
            assert!((d - 2.0).abs() < 1e-10);
        }
        // Quadratic in ln n is differentiated exactly even on an irregular grid.
        let pts: Vec<(f64, f64)> = checkpoint_grid(100_000, 16)
            .into_iter()
            .map(|n| {
                let l = (n as f64).ln();
                (n as f64, (0.3 * l + 0.01 * l * l).exp())
            })
            .collect();
        for (n, d) in log_derivative(&pts).unwrap() {
            assert!((d - (0.3 + 0.02 * n.ln())).abs() < 1e-9, "n={n}: {d}");
        }
    }

    #[test]
    fn log_correction_matches_analytic_derivative() {
        let (lambda, a) = (0.361, 0.7);
        let pts: Vec<(f64, f64)> = log_grid(1e3, 1e7, 2000)
            .into_iter()
            .map(|n| (n, n.powf(lambda) * (1.0 + a / n.ln())))
            .collect();
        for (n, d) in log_derivative(&pts).unwrap() {
            let l = n.ln();
            let exact = lambda - a / (l * (l + a));
            assert!((d - exact).abs() < 1e-6, "n={n}: {d} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(log_derivative(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(log_derivative(&[(1.0, 1.0), (2.0, -2.0), (3.0, 1.0)]).is_err());
        assert!(log_derivative(&[(1.0, 1.0), (1.0, 2.0), (3.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn any_power_law_is_recovered(lambda in -2.0f64..3.0, c in 0.01f64..100.0, count in 3usize..60) {
            let pts: Vec<(f64, f64)> = log_grid(2.0, 1e5, count).into_iter().map(|n| (n, c * n.powf(lambda))).collect();
            for (_, d) in log_derivative(&pts).unwrap() {
                prop_assert!((d - lambda).abs() < 1e-9);
            }
        }
    }
}
