//! Second-order convergence of the Dirichlet Poisson solver on a manufactured solution.

use npns::elliptic::{poisson_residual, solve_poisson, PoissonProblem};
use npns::{BoundarySpec, Grid2D, ScalarField};

fn main() -> npns::Result<()> {
    let pi = std::f64::consts::PI;
    let eps = 0.5;
    let exact = |x: f64, y: f64| (pi * x).sin() * (2.0 * pi * y).cos() + x * y;
    let rho = |x: f64, y: f64| eps * 5.0 * pi * pi * (pi * x).sin() * (2.0 * pi * y).cos();

    let mut prev: Option<f64> = None;
    for n in [16, 32, 64, 128, 256] {
        let grid = Grid2D::unit_square(n)?;
        let prob = PoissonProblem::new(eps, ScalarField::from_fn(grid, rho), BoundarySpec::from_fn(grid, exact))?;
        let phi = solve_poisson(&prob)?;
        let err = phi.max_abs_diff(&ScalarField::from_fn(grid, exact));
        let ratio = prev.map(|p| format!("{:.3}", p / err)).unwrap_or_else(|| "-".into());
        println!(
            "n = {n:>3}  sup error {err:.3e}  ratio {ratio:>5}  residual {:.1e}",
            poisson_residual(&prob, &phi)
        );
        prev = Some(err);
    }
    Ok(())
}
