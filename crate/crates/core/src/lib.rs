//! Random Apollonian packings of `d`-dimensional spheres.
//!
//! * [`packer`] grows packings by sequential random insertion and records
//!   moment and pore statistics.
//! * [`spatial_index`] is the bounding-volume tree answering "largest empty
//!   radius at `x`".
//! * [`meanfield`] predicts insertion probabilities and power-law exponents
//!   from surface models of the packing.
//! * [`analysis`] turns ensembles of simulations into exponent fits and
//!   fractal-dimension estimates.
//! * [`io`] holds the on-disk formats.

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod io;
pub mod meanfield;
pub mod order;
pub mod packer;
pub mod spatial_index;

pub use error::{RapError, Result};
pub use order::Order;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/geometry.md")]
    struct Geometry;
    #[doc = include_str!("../../../book/src/packing.md")]
    struct Packing;
    #[doc = include_str!("../../../book/src/meanfield.md")]
    struct Meanfield;
    #[doc = include_str!("../../../book/src/analysis.md")]
    struct Analysis;
}
