//! Numerical laboratory for the Rabinovich system as a Hamilton-Poisson
//! field, the leaf perturbations that stabilize or destabilize its periodic
//! orbits, and the machinery that verifies every claimed invariance, decay
//! and stability property by direct computation.
//!
//! Module map:
//!
//! * [`linalg`] — 3-vectors, 3x3 matrices, cubic eigenvalues;
//! * [`field`] — Hamilton-Poisson field algebra and leaf perturbations;
//! * [`rabinovich`] — the concrete system: invariants, equilibria, the
//!   energy-Casimir region atlas, explicit polynomial right-hand sides;
//! * [`integrator`] — adaptive embedded 5(4) Runge-Kutta with dense output,
//!   invariant monitoring and hyperplane-crossing events;
//! * [`orbit`] — fiber points, period detection, mirror orbits, monodromy
//!   matrices and Floquet multipliers;
//! * [`report`] — end-to-end stabilization experiments with quantitative
//!   verdicts.

pub mod field;
pub mod integrator;
pub mod linalg;
pub mod orbit;
pub mod rabinovich;
pub mod report;

pub use field::{
    assemble_rhs, casimir_leaf_perturbation, cross, energy_leaf_perturbation, unperturbed_rhs,
    FieldContext, FieldError, Mode, PerturbationSpec, ScalarField, VectorFieldHandle,
};
pub use linalg::{Matrix3, Vec3};
pub use rabinovich::{LevelPair, SystemParams};
