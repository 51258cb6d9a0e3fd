//! Ensemble statistics, exponent fits and fractal-dimension estimates.

mod cdf;
mod compare;
mod derivative;
mod ensemble;
mod fit;
mod likelihood;
mod pipeline;

pub use cdf::{cdf_slope, local_gamma, radius_cdf, SlopeEstimate};
pub use compare::{compare_probe_to_model, DensityRow, ModelCdf, ProbeComparison};
pub use derivative::log_derivative;
pub use ensemble::{EnsembleCdf, EnsembleSeries, MeanSe, SeriesKind};
pub use fit::{fit_asymptote, fit_asymptote_with, FitOptions, FitResult};
pub use likelihood::{gamma_likelihood, gamma_likelihood_from, GammaLikelihood};
pub use pipeline::{exponent_fit, series_kind_for, ExponentFit, DEFAULT_WINDOW_START};
