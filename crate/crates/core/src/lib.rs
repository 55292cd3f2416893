//! Simulation and verification of super-Brownian motion local times.
//!
//! The crate is organised bottom-up: [`kernels`] and [`quadrature`] are the
//! deterministic layer, [`particles`] simulates the branching approximation,
//! [`localtime`] turns paths into local-time statistics, [`cumulants`] and
//! [`pde`] provide deterministic oracles, and [`experiments`] ties everything
//! into reproducible runs.

// validation writes `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cumulants;
pub mod experiments;
pub mod error;
pub mod kernels;
pub mod localtime;
pub mod particles;
pub mod pde;
pub mod quadrature;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::{Horizon, KernelDescriptor, Potential, SpacePoint};
