//! Lagrangian simulator for the one-dimensional Euler–Poisson free-boundary
//! problem with a physical vacuum, built on a degenerate parabolic
//! regularization solved by weighted sine-Galerkin and Picard iteration.

pub mod config;
pub mod continuation;
pub mod energy;
pub mod error;
pub mod fixedpoint;
pub mod gravity;
pub mod jet;
pub mod linearized;
pub mod profiles;
pub mod quadrature;
pub mod shape;
pub mod spectral;

pub use error::{Error, Result};
