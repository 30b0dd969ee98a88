//! Gaussian paths on a grid: sampling, exact conditioning on a path prefix,
//! and conditional expectations of nonlinear functions of linear observables.

mod conditioning;
mod export;
mod quadrature;
mod rng;
mod sampling;

pub use conditioning::{
    conditional_expectation, conditional_law, ConditionalLaw, Estimate, Method, ObservablePlan,
    MAX_QUADRATURE_DIM,
};
pub use export::{read_ensemble, write_ensemble, ENSEMBLE_MAGIC, ENSEMBLE_VERSION};
pub use quadrature::{gauss_hermite, GaussHermite, DEFAULT_NODES};
pub use rng::RngStream;
pub use sampling::{
    sample_ensemble, sample_ensemble_circulant, CirculantInfo, PathEnsemble,
};
