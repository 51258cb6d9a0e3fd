//! Mean-field model of the insertion probability: surface polynomials, the
//! exponential insertion CDF, and the closed systems fixing the exponents.

mod newton;
mod poly;
pub mod quadrature;
mod surface;
mod systems;

pub use newton::{damped_newton, NewtonOptions, NewtonResult};
pub use poly::ExponentPolynomial;
pub use quadrature::{integrate, moment_integral, Integral, Tolerance};
pub use surface::{
    insertion_cdf, insertion_cdf_affine, required_orders, scaled_exponent, surface_coefficients,
    twin_coefficient, SurfaceModelKind,
};
pub use systems::{
    fractal_dimension, lambda_alpha, plane_uniform_lambda1, reference_gammas, solve_exponents,
    solve_system, solve_system_with, twin_constraint_violation, ExponentSystem, Guess,
    MeanFieldSolution, RESIDUAL_LIMIT, TWIN_CONSTRAINT_TOL,
};
