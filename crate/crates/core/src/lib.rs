//! Regional gradient observability of Riemann–Liouville time-fractional
//! diffusion on `[0,1]` and `[0,1]²`.
//!
//! The crate is organised bottom-up:
//!
//! * [`mlf`]: Mittag-Leffler function, the Wright-type density ψ_α and φ_α.
//! * [`quadrature`]: Gauss–Legendre, tanh-sinh and singular time meshes.
//! * [`spectral`]: Dirichlet-Laplacian eigenbasis, regions, projections, ∇ and ∇*.
//! * [`sensing`]: zone, pointwise and filament sensors; the output operator and its adjoint.
//! * [`dynamics`]: mild solution, sensor output synthesis and Duhamel kernels.
//! * [`observability`]: G-matrices, rank test, kernel test and the regional Gramian.
//! * [`hum`]: the HUM operator Λ, data-side right-hand side and CG reconstruction.
//! * [`cli`]: experiment configuration, presets, file formats and reports.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hum;
pub mod mlf;
pub mod observability;
pub mod quadrature;
pub mod rng;
pub mod sensing;
pub mod spectral;

pub use error::{Error, Result};
