//! Pilot-wave dynamics of a free real scalar field in 1+1 dimensions.
//!
//! The field lives on periodic lattice leaves embedded in Minkowski space.
//! Wave functionals are finite superpositions of Hermite-type functionals over
//! the vacuum, the Bohm field follows the guidance law, and successive leaves
//! are built from a fixed rule or from the field's own stress-energy flow.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod foliation;
pub mod geometry;
pub mod guidance;
pub mod sim;
pub mod stress_energy;
pub mod wavefunctional;

pub use error::{Error, Result};
pub use foliation::{advance_leaf, lapse_for, next_w, FlowField, FoliationKind, FoliationStrategy, LapseTable};
pub use geometry::{
    build_k_operator, inner, spectral_sqrt, summation_by_parts_residual, FieldConfig, Leaf, LeafId, MinkowskiVector,
    ModeBasis, SiteOperator,
};
pub use guidance::{integrate_stationary, mode_velocity, step_rk4, velocity, StepControl, TrajectoryState};
pub use num_complex::Complex64;
pub use stress_energy::{compute_t, tensor_from_derivatives, timelike_eigenvector, StressEnergyField, StressTensor};
pub use wavefunctional::{
    apply_hamiltonian, eval_term, evaluate, evolve_stationary, guidance_ratio, guidance_ratio_modes, log_vacuum,
    reproject, FunctionalValue, LabelFunction, Term, WaveFunctionalState, MAX_LABELS,
};
