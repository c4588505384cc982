//! Second-order phase oscillator networks on finite graphs and their graphon
//! continuum limits.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, the nonlinearity/forcing catalog and the map from
//!   physical power-grid quantities to the non-dimensional model.
//! - [`graphons`]: analytic difference kernels (small-world type), their
//!   Fourier coefficients and exact cell integrals.
//! - [`graphs`]: finite coupling matrices, Bernoulli sampling and L² kernel
//!   distances.
//! - [`dynamics`]: RK4 integration of the finite second-order system.
//! - [`continuum`]: Nyström and Picard solvers for the continuum equation.
//! - [`stability`]: Fourier-mode eigenvalues of constant steady states.
//! - [`experiments`]: convergence studies with error envelopes.
//! - [`io`]: CSV/JSON readers and writers shared by the CLI.

pub mod continuum;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graphons;
pub mod graphs;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod stability;

pub use error::{Error, Result};
