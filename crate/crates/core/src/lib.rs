//! Phase-field simulator for volume-preserving mean curvature flow on the
//! flat torus `T^d`, `d in {1,2,3}`.
//!
//! The solver evolves an order parameter by the Allen--Cahn equation with a
//! non-local deficit-penalty multiplier (plus the classical mean-reaction
//! variant as a baseline) and ships a diagnostics suite that monitors the
//! quantities controlled by the underlying a-priori estimates: energy
//! dissipation, relaxed mass preservation, discrepancy sign, multiplier
//! bounds, heat-kernel almost-monotonicity, density ratios, and zero-level-set
//! geometry.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod harness;
pub mod initial;
pub mod model;
pub mod stepper;

pub use error::Error;
