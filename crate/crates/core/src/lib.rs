//! Recovery of hidden common variables shared by two or more observation
//! sets.
//!
//! Given row-aligned sample sets `x_i`, `y_i` (or K sets), the library
//! estimates a Riemannian metric on observation space from local canonical
//! correlation analysis, attenuating directions that are not corroborated by
//! the other set, and feeds that metric into diffusion maps. The resulting
//! embedding parameterizes only the variables the sets have in common.
//!
//! Module map:
//! * [`numerics`] — validated data matrices, covariance, symmetric
//!   eigendecomposition, truncated inverse square roots;
//! * [`cca`] — two-set CCA (sample and population) and attenuation matrices;
//! * [`metric`] — neighborhoods and the midpoint / anchored /
//!   endpoint-averaged / Mahalanobis / Euclidean pairwise metrics;
//! * [`diffusion`] — Gaussian kernels, row-stochastic and landmark
//!   normalizations, spectral embedding;
//! * [`tcca`] — dense tensors, rank-1 ALS, tensor CCA, and the K-set
//!   embedding pipeline;
//! * [`synth`] — synthetic experiment generators (warped square, coupled
//!   pendulum movies, rotating icon movies);
//! * [`analysis`] — spectra, peak picking, and frequency matching for
//!   evaluating recovered coordinates.

pub mod analysis;
pub mod cca;
pub mod diffusion;
pub mod error;
pub mod metric;
pub mod numerics;
pub mod synth;
pub mod tcca;

pub use error::{Error, Result};

/// Re-export of the linear-algebra crate whose types appear throughout the
/// public API, so downstream crates can name them without a separate
/// dependency.
pub use nalgebra;
