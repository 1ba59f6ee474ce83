//! Numerics for hyperbolic Brownian motion on the Poincaré half-space.
//!
//! The crate is `no_std` (it needs `alloc`) and keeps every routine pure:
//! geometry of the half-space model, heat kernels and their two-sided
//! bounds, rate functions and Legendre transforms for the large and
//! moderate deviations of the radial process, closed-form hitting
//! probabilities of hyperbolic balls, and reproducible samplers driven by a
//! counter-based random stream.
//!
//! IO, file formats, the worker pool and the command line live in the `hbm`
//! crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod hitting;
pub mod kernel;
pub mod ldp;
pub mod math;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Dimension, HalfSpacePoint, RadiusTime};
pub use kernel::KernelQuery;
pub use quad::QuadratureConfig;
