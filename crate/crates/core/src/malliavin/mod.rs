//! Cylindrical functionals, the Malliavin derivative, the Skorokhod
//! divergence and the predictable projection on a grid.

pub mod catalog;
mod clark;
mod derivative;
mod divergence;
mod functional;

pub use catalog::{functional, snap, CATALOG};
pub use clark::ClarkIntegrand;
pub use derivative::{derivative, expectation, observables, predictable_projection};
pub(crate) use derivative::{assemble_projection, derivative_from_gradient};
pub use divergence::{
    divergence, terminal_field, test_fields, AffineField, CoefficientRule, DivergencePlan, RuleField,
    VectorField,
};
pub use functional::{
    gradient_check, CylindricalFunctional, GradientCheck, IntegralFunctional, FD_STEP, GRADIENT_TOLERANCE,
};
