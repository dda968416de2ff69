//! Numerical core for mixed-level cosmology sweeps.
//!
//! The crate is layered bottom-up:
//!
//! * [`numerics`]: Romberg quadrature, a semi-infinite transform and a
//!   fixed-step RK4 integrator.
//! * [`parsweep`]: the descending outer grid, static index partitioning and
//!   a deterministic parallel map into a shared output buffer.
//! * [`cosmo`]: Friedmann background (expansion rate, age, distances,
//!   critical density).
//! * [`structure`]: Press-Schechter halo statistics and baryon infall.
//! * [`starform`]: one-zone reservoir model for the cosmic star formation
//!   rate density.
//! * [`gwspec`]: stochastic gravitational-wave background from stellar
//!   collapse to black holes.
//!
//! ```
//! use gravsweep_core::numerics::{romberg, QuadConfig};
//!
//! let x = 20.0;
//! let r = romberg(|k| (x + k).powi(-2), 5.0, 20.0, &QuadConfig::default()).unwrap();
//! assert!((r.value - 0.015).abs() < 1e-10);
//! ```

// `!(x > y)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod cosmo;
mod error;
pub mod gwspec;
pub mod numerics;
pub mod parsweep;
pub mod starform;
pub mod structure;

pub use error::{Error, Result};
