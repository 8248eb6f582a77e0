//! Nonparametric learning of radial interaction kernels in linear nonlocal
//! diffusion operators `L_phi[u](x) = int phi(|y-x|) (u(y) - u(x)) dy` from
//! gridded `(u_i, f_i)` function pairs.
//!
//! The pipeline estimates a data-adaptive exploration measure on pairwise
//! distances, extracts the regression data in one pass over the dataset,
//! sweeps a ladder of B-spline hypothesis spaces, and solves the
//! regularized least-squares problem with one of three Tikhonov penalties;
//! the data-adaptive RKHS penalty is built from the generalized
//! eigendecomposition of the normal matrix against the basis Gram matrix.
//! A small wave-dynamics module supports learning kernels from
//! space-time trajectory data.

pub mod assembly;
pub mod basis;
pub mod error;
pub mod explore;
pub mod grid;
pub mod lcurve;
pub mod operator;
pub mod pipeline;
pub mod plot;
pub mod quad;
pub mod solve;
pub mod sweep;
pub mod wave;

pub use error::{Error, Result};
