//! Solvers and simulators for local coherences bound to hydrodynamic voids.
//!
//! The crate is organised around the continuum large-deviation problems
//! (stationary and aging saddles, Volterra closures) and the microscopic
//! models used to check them (two-replica circuit, ballistic gas, KLS
//! generator).

pub mod aging;
pub mod cloning;
pub mod error;
pub mod fit;
pub mod gas;
pub mod grid;
pub mod kernels;
pub mod mft;
pub mod quad;
pub mod replica;
pub mod rng;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
