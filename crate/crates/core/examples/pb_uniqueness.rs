//! Newton on a nonneutral Poisson–Boltzmann problem from three different starting points.
//! All three land on the same potential.

use npns::elliptic::{solve_pb_detailed, InitialGuess, NewtonConfig, PbProblem, PbSpecies};
use npns::{BoundarySpec, Grid2D};

fn main() -> npns::Result<()> {
    let grid = Grid2D::unit_square(64)?;
    let w = BoundarySpec::from_fn(grid, |x, _| if x < 0.5 { 0.0 } else { 1.5 });
    let prob = PbProblem::new(
        0.05,
        w,
        vec![PbSpecies::fixed_z(1.0, 1.0), PbSpecies::fixed_z(-1.0, 3.0)],
    )?;
    let guesses = [
        ("zero", InitialGuess::Zero),
        ("harmonic extension", InitialGuess::HarmonicExtension),
        ("perturbed", InitialGuess::SmoothPerturbation { seed: 11, amplitude: 4.0 }),
    ];
    let mut solutions = Vec::new();
    for (label, guess) in guesses {
        let cfg = NewtonConfig {
            residual_tol: 1e-11,
            ..NewtonConfig::default()
        }
        .with_guess(guess);
        let sol = solve_pb_detailed(&prob, &cfg)?;
        println!(
            "{label:>18}: {} Newton steps, {} gradient steps, final residual {:.2e}, energy {:.10}",
            sol.newton_iterations,
            sol.gradient_steps,
            sol.residual_history.last().copied().unwrap_or(f64::NAN),
            sol.energy_history.last().copied().unwrap_or(f64::NAN),
        );
        solutions.push(sol.state.phi_star);
    }
    for a in 0..solutions.len() {
        for b in a + 1..solutions.len() {
            println!("sup |phi_{a} - phi_{b}| = {:.2e}", solutions[a].max_abs_diff(&solutions[b]));
        }
    }
    Ok(())
}
