//! Dimension-generic points, spheres and the box domain.
//!
//! The dimension is a runtime value. Everything here works for any `d >= 2`;
//! configuration layers restrict it to `{2, 3, 4}`.

mod special;

pub use special::{cap_area, regularized_incomplete_beta, unit_ball_volume};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A point in `d`-dimensional Euclidean space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointD(Vec<f64>);

impl PointD {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(domain!("a point needs at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(domain!("non-finite coordinate {bad}"));
        }
        Ok(PointD(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean distance to another point of the same dimension.
    pub fn distance(&self, other: &PointD) -> f64 {
        distance(&self.0, &other.0)
    }
}

impl Deref for PointD {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<PointD> for Vec<f64> {
    fn from(p: PointD) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: PointD,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: PointD, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain!(
                "sphere radius must be positive and finite, got {radius}"
            ));
        }
        Ok(Sphere { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// `d`-dimensional volume of the ball.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim() as u32).unwrap_or(f64::NAN)
            * self.radius.powi(self.dim() as i32)
    }
}

/// The axis-aligned cube `[0, side]^dimension`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    dimension: usize,
    side: f64,
}

impl BoxDomain {
    pub fn new(dimension: usize, side: f64) -> Result<Self> {
        if dimension < 1 {
            return Err(domain!("box dimension must be at least 1"));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(domain!("box side must be positive and finite, got {side}"));
        }
        Ok(BoxDomain { dimension, side })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dimension as i32)
    }

    pub fn center(&self) -> PointD {
        PointD(vec![0.5 * self.side; self.dimension])
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dimension && coords.iter().all(|&x| (0.0..=self.side).contains(&x))
    }
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `|point - center| - radius`, negative iff the point is strictly inside.
///
/// No tolerance is applied; callers decide how to treat values near zero.
#[inline]
pub fn signed_gap(point: &[f64], sphere: &Sphere) -> f64 {
    raw_signed_gap(point, &sphere.center, sphere.radius)
}

#[inline]
pub(crate) fn raw_signed_gap(point: &[f64], center: &[f64], radius: f64) -> f64 {
    distance(point, center) - radius
}

/// Distance from `point` to the nearest wall of the box.
pub fn wall_gap(point: &[f64], domain: &BoxDomain) -> Result<f64> {
    if !domain.contains(point) {
        return Err(domain!(
            "point {point:?} is outside the box [0, {}]^{}",
            domain.side,
            domain.dimension
        ));
    }
    Ok(raw_wall_gap(point, domain.side))
}

#[inline]
pub(crate) fn raw_wall_gap(point: &[f64], side: f64) -> f64 {
    point
        .iter()
        .map(|&x| x.min(side - x))
        .fold(f64::INFINITY, f64::min)
}
