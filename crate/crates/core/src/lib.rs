//! Finite-difference Nernst–Planck–Navier–Stokes solver on a rectangle, with
//! Poisson–Boltzmann steady-state solvers and energy diagnostics.
//!
//! Concentrations, potential and pressure live at cell centers; velocity components
//! live on the faces of a staggered (MAC) grid. See the `examples/` directory for
//! one runnable program per capability.

pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod flow;
pub mod linalg;
pub mod scenario;
pub mod state;
pub mod stencil;
pub mod transport;

pub use error::{NpnsError, Result};
pub use fields::{
    BoundarySegment, BoundarySpec, Edge, Grid2D, IonSpecies, PhysicalParams, Regime, ScalarField,
    VectorField,
};
pub use state::{FlowState, NpnsModel, SimulationState};
