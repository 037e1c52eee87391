//! A body force that is a discrete gradient is absorbed entirely by the pressure.
//! The fluid stays at rest while the pressure picks up the potential.

use npns::flow::ns_step;
use npns::{FlowState, Grid2D, PhysicalParams, ScalarField, VectorField};

fn main() -> npns::Result<()> {
    let grid = Grid2D::unit_square(64)?;
    let psi = ScalarField::from_fn(grid, |x, y| 40.0 * (3.0 * x).sin() * (2.0 * y).cos() + 25.0 * x * x * y);
    let mut force = VectorField::gradient_of(&psi);
    force.zero_boundary_faces();
    let params = PhysicalParams::new(0.01, 1.0, 1.0)?;
    let dt = 1e-3;
    let mut flow = FlowState::at_rest(grid);
    for step in 1..=5 {
        flow = ns_step(&flow, &force, &params, dt)?;
        println!(
            "step {step}: max|u| = {:.2e}, max|div u| = {:.2e}",
            flow.velocity.max_abs(),
            flow.velocity.divergence().max_abs()
        );
    }
    // Starting from rest each step, the pressure is ψ with its mean removed.
    let mean = psi.integral() / grid.area();
    let worst = flow
        .pressure
        .values
        .iter()
        .zip(&psi.values)
        .map(|(p, q)| (p - (q - mean)).abs())
        .fold(0.0_f64, f64::max);
    println!("sup |p - (psi - mean psi)| = {worst:.2e}");
    Ok(())
}
