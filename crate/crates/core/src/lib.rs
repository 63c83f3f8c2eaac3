//! Forward solver and source reconstruction for two-dimensional stationary
//! radiative transport with a linearly anisotropic source `f0 + theta . F`
//! on the unit disk.

pub mod aanalytic;
pub mod elliptic;
pub mod error;
pub mod gauge;
pub mod grid;
pub mod io;
pub mod primitives;
pub mod recon;
pub mod transport;

pub use error::{Error, Result};
