//! 1D Poisson–Boltzmann profile and its 2D counterpart on a thin strip.
//!
//! ```text
//! cargo run --release --example pb1d_profile -- [eps] [W]
//! ```
//!
//! Prints the semi-analytic profile, then the sup-norm gap between the 2D Newton solve
//! on `[0, 1/4] x [0, 1]` and the profile under grid refinement.

use npns::elliptic::{solve_pb, solve_pb_1d, NewtonConfig, Pb1dProblem, Pb1dProfile, PbProblem, PbSpecies};
use npns::{BoundarySpec, Grid2D, ScalarField};

fn main() -> npns::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let prob = Pb1dProblem {
        eps: args.first().copied().unwrap_or(0.1),
        h_len: 1.0,
        w_val: args.get(1).copied().unwrap_or(1.0),
        species: vec![(1.0, 1.0), (-1.0, 1.0)],
    };
    let profile = Pb1dProfile::build(&prob)?;
    println!("eps = {}, W = {}, alpha = {:.6e}", prob.eps, prob.w_val, profile.alpha);
    for (y, phi) in solve_pb_1d(&prob, 11)? {
        println!("  y = {y:.2}  phi = {phi:.8}");
    }

    let mut prev: Option<f64> = None;
    for ny in [64, 128, 256] {
        let grid = Grid2D::new(ny / 4, ny, 0.25, 1.0)?;
        let w = BoundarySpec::from_fn(grid, |_, y| profile.eval(y));
        let species = prob.species.iter().map(|&(z, zc)| PbSpecies::fixed_z(z, zc)).collect();
        let pb = PbProblem::new(prob.eps, w, species)?;
        let sol = solve_pb(&pb, &NewtonConfig::default())?;
        let err = sol.phi_star.max_abs_diff(&ScalarField::from_fn(grid, |_, y| profile.eval(y)));
        match prev {
            Some(p) => println!("ny = {ny:>4}: error {err:.3e}, ratio {:.3}", p / err),
            None => println!("ny = {ny:>4}: error {err:.3e}"),
        }
        prev = Some(err);
    }
    Ok(())
}
