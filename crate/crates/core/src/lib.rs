//! Energy-space stochastic calculus for fractional Brownian motion on finite
//! time grids.
//!
//! The discrete Cameron–Martin space of a Gaussian process observed on a grid
//! is `R^N` with the Gram matrix `Σ_ij = R(t_i, t_j)` as inner product. On top
//! of that the crate provides the Malliavin derivative of cylindrical
//! functionals, the finite-dimensional Skorokhod divergence, the predictable
//! projection onto adapted subspaces, and a set of seed-deterministic
//! experiments that check the Clark–Ocone factorization
//! `F - E[F] = δ(Π D F)`, the controlled-expansion remainder scaling and the
//! identification of the Gubinelli derivative.
//!
//! ```
//! use roughcalc::gaussian::Method;
//! use roughcalc::malliavin::{functional, predictable_projection};
//! use roughcalc::{AdaptedIndex, CovarianceModel, GramContext, TimeGrid};
//!
//! let ctx = GramContext::new(CovarianceModel::fbm(0.25)?, TimeGrid::uniform(32, 1.0)?)?;
//! let f = functional("two_time", ctx.grid())?;
//! let path = vec![0.0; 32];
//! let h = predictable_projection(&ctx, &f, AdaptedIndex::new(16, &ctx)?, &path, &Method::default())?;
//! assert!(ctx.norm_sq(&h)? > 0.0);
//! # Ok::<(), roughcalc::Error>(())
//! ```

pub mod energy;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod malliavin;
pub mod model;
pub mod par;
pub mod report;
pub mod stats;

pub use energy::{AdaptedIndex, CMElement, GramContext};
pub use error::{Error, Result};
pub use model::{build_gram, CovarianceModel, GramMatrix, Hurst, TimeGrid};
