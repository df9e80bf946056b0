//! Sub-Finsler geometry on the Heisenberg group.
//!
//! A left-invariant sub-Finsler structure is fixed by the indicatrix profile
//! `r(θ)` in the horizontal plane. The crate computes the structure invariants,
//! integrates geodesics, locates conjugate points from the Jacobi equation and
//! checks geodesic projections against the isoperimetric problem in the
//! normed plane.

pub mod error;
pub mod geodesics;
pub mod indicatrix;
pub mod invariants;
pub mod jacobi;
mod jet;
pub mod ode;
pub mod oracle;

pub use error::{Error, Result};
pub use geodesics::{
    fiber_period, geodesic_rhs, integrate, limacon_closed_form, projection_closure, randers_closed_form, ClosureReport, GeodesicState,
    GeodesicTrace, IntegratorSettings,
};
pub use indicatrix::{check_strong_convexity, evaluate_profile, finsler_norm, rund_average, IndicatrixProfile};
pub use invariants::{
    constant_i_coframe, heisenberg_coframe, heisenberg_i, heisenberg_table, structure_residual, ConstantICase,
    CoframeSample, InvariantTable,
};
pub use jacobi::{
    conjugate_points, index, jacobi_apply, jacobi_coefficients, reconstruct_variation, ConjugatePoint,
    JacobiCoefficients, VariationField,
};
pub use oracle::{dido_direct_search, dido_stationarity, finsler_length, DiscreteHorizontalPath};
