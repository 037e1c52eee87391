//! Grid, field containers, boundary geometry, species and physical parameters.

mod boundary;
mod grid;
mod ops;
mod species;

pub use boundary::{segment_mask, BoundarySegment, BoundarySpec, Edge, EdgeData, EdgeMask};
pub use grid::{Grid2D, ScalarField, VectorField};
pub use ops::{
    check_exponent, check_field_exponent, compute_charge_density, compute_tilde_c,
    harmonic_extension, max_exponent, EXP_GUARD,
};
pub use species::{IonSpecies, PhysicalParams, Regime};
