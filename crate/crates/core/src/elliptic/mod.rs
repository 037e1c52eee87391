//! Dirichlet Poisson solves and Poisson–Boltzmann steady states.

pub mod pb;
pub mod pb1d;
pub mod poisson;

pub use pb::{
    apply_l_phi, pb_energy, pb_residual, solve_pb, solve_pb_detailed, BoltzmannState,
    InitialGuess, NewtonConfig, PbProblem, PbSolution, PbSpecies, SpeciesDatum,
};
pub use pb1d::{solve_pb_1d, Pb1dProblem, Pb1dProfile};
pub use poisson::{
    poisson_residual, potential_face_gradient, solve_homogeneous, solve_poisson,
    solve_poisson_from, PoissonProblem,
};
