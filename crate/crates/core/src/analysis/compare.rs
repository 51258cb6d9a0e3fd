use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{RapError, Result};
use crate::meanfield::{insertion_cdf, insertion_cdf_affine, surface_coefficients, ExponentPolynomial, SurfaceModelKind};
use crate::order::Order;
use crate::packer::ProbeResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub ln_r: f64,
    pub empirical: f64,
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeComparison {
    /// `sup_r |P_emp(r' > r) - P_model(r' > r)|`.
    pub ks_distance: f64,
    /// `-dP/d ln r` per `ln r` bin, empirical and model (bin-averaged).
    pub table: Vec<DensityRow>,
}

/// Kolmogorov-Smirnov distance and density table between probe radii and a
/// model survival function `P(r' > r)`.
pub fn compare_probe_to_model<F>(probe: &ProbeResult, model_cdf: F) -> Result<ProbeComparison>
where
    F: Fn(f64) -> Result<f64>,
{
    let radii = &probe.radii;
    if radii.is_empty() {
        return Err(RapError::Precondition("probe has no accepted radii".into()));
    }
    let total = radii.len() as f64;
    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < radii.len() {
        // Step over ties so both one-sided limits are taken at distinct radii.
        let mut j = i;
        while j + 1 < radii.len() && radii[j + 1] == radii[i] {
            j += 1;
        }
        let model = model_cdf(radii[i])?;
        let before = (radii.len() - i) as f64 / total;
        let after = (radii.len() - j - 1) as f64 / total;
        ks = ks.max((model - before).abs()).max((model - after).abs());
        i = j + 1;
    }

    let bins = probe.log_bins(crate::packer::DEFAULT_PROBE_BINS);
    let empirical = probe.density_on(&bins);
    let table = bins
        .iter()
        .zip(empirical)
        .map(|(&(a, b), (center, dens))| {
            let model = (model_cdf(a.exp())? - model_cdf(b.exp())?) / (b - a);
            Ok(DensityRow {
                ln_r: center,
                empirical: dens,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeComparison { ks_distance: ks, table })
}

/// The insertion CDF of `model` built from a packing's actual moments.
pub struct ModelCdf {
    model: SurfaceModelKind,
    surface: ExponentPolynomial,
    pore: f64,
}

impl ModelCdf {
    pub fn new(model: SurfaceModelKind, d: u32, moments: &BTreeMap<Order, f64>, n: u64, pore: f64) -> Result<Self> {
        Ok(ModelCdf {
            model,
            surface: surface_coefficients(model, d, moments, n)?,
            pore,
        })
    }

    pub fn survival(&self, r: f64) -> Result<f64> {
        match self.model {
            SurfaceModelKind::AffineRef22 => Ok(insertion_cdf_affine(self.surface.coefficient(Order::ZERO), self.pore, r)),
            _ => insertion_cdf(&self.surface, self.pore, r),
        }
    }
}
