//! Reproducible experiments. Each `run_*` function takes a configuration and
//! returns a [`Report`]; nothing is written to disk here.

mod adjointness;
pub(crate) mod common;
pub mod config;
mod factorization;
mod isometry;
mod lemma;
mod mixed;
mod remainder;
mod simulate;
mod verify;

pub use adjointness::{adjointness_core, run_adjointness, AdjointnessRow, CenteredRow};
pub use common::ABS_FLOOR;
pub use config::{ExperimentConfig, MethodChoice, ModelKind, Spacing, MIN_PATHS};
pub use factorization::{factorization_point, run_factorization, FactorizationPoint};
pub use isometry::run_isometry_defect;
pub use lemma::{
    brownian_terminal_gap, lemma_discrepancy, run_increment_identity, run_projection_lemma, INCREMENT_TOLERANCE,
    LEMMA_TOLERANCE,
};
pub use mixed::{run_mixed, DEGENERATE_TOLERANCE};
pub use remainder::{default_offsets, run_gubinelli_compare, run_remainder_scaling};
pub use simulate::{run_simulate, simulate_with_ensemble};
pub use verify::{verify_all, Suite};

use crate::error::{Error, Result};
use crate::report::Report;

/// Experiment names accepted by [`run`], with one-line descriptions.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("simulate", "sample paths with the Cholesky and circulant samplers"),
    ("adjointness", "E[F δ(u)] against E[<DF, u>] for catalog functionals"),
    ("factorize", "Clark–Ocone residual over a grid sweep"),
    ("remainder", "scaling of the martingale expansion remainder"),
    ("gubinelli", "energy pairing against a pathwise regression slope"),
    ("isometry", "isometry defect of the divergence"),
    ("lemma", "energy projection against Gaussian regression"),
    ("increments", "increment-norm identity on random triples"),
    ("mixed", "componentwise checks for αB + βB^H"),
];

/// Runs a single experiment by name.
pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<Report> {
    match name {
        "simulate" => run_simulate(cfg),
        "adjointness" => run_adjointness(cfg),
        "factorize" | "factorization" => run_factorization(cfg),
        "remainder" => run_remainder_scaling(cfg),
        "gubinelli" => run_gubinelli_compare(cfg),
        "isometry" => run_isometry_defect(cfg),
        "lemma" => run_projection_lemma(cfg),
        "increments" => run_increment_identity(cfg),
        "mixed" => run_mixed(cfg),
        other => Err(Error::Config(format!("unknown experiment {other:?}"))),
    }
}
