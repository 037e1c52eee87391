//! Dense and finite-difference checks of the Poisson–Boltzmann energy, residual and
//! linearization.

use nalgebra::{DMatrix, SymmetricEigen};
use npns::elliptic::{apply_l_phi, pb_energy, pb_residual, PbProblem, PbSpecies};
use npns::{BoundarySpec, Grid2D, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixed_problem(n: usize) -> PbProblem {
    let grid = Grid2D::new(n, n, 1.0, 0.8).unwrap();
    let w = BoundarySpec::from_fn(grid, |x, y| 0.6 * x - 0.3 * y * y);
    PbProblem::new(
        0.07,
        w,
        vec![
            PbSpecies::fixed_z(1.0, 1.3),
            PbSpecies::fixed_mass(-1.0, 0.9),
            PbSpecies::fixed_mass(2.0, 0.4),
        ],
    )
    .unwrap()
}

fn random_field(grid: Grid2D, seed: u64, scale: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.n_cells()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_values(grid, values).unwrap()
}

fn dense_l_phi(phi: &ScalarField, prob: &PbProblem) -> DMatrix<f64> {
    let n = phi.grid.n_cells();
    let mut m = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut e = ScalarField::zeros(phi.grid);
        e.values[col] = 1.0;
        let y = apply_l_phi(phi, &e, prob).unwrap();
        for row in 0..n {
            m[(row, col)] = y.values[row];
        }
    }
    m
}

#[test]
fn linearization_is_symmetric_positive_definite() {
    let prob = mixed_problem(8);
    let phi = random_field(prob.grid(), 3, 0.8);
    let m = dense_l_phi(&phi, &prob);
    let asym = (&m - m.transpose()).abs().max();
    assert!(asym <= 1e-12 * m.abs().max(), "asymmetry {asym:e}");
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let min = eig.min();
    // The Dirichlet Laplacian alone bounds the spectrum from below.
    let pure = PbProblem::new(prob.eps, prob.w.clone(), vec![]).unwrap();
    let lap_min = SymmetricEigen::new(dense_l_phi(&phi, &pure)).eigenvalues.min();
    assert!(min >= lap_min * (1.0 - 1e-10), "{min} < {lap_min}");
    assert!(lap_min > 0.0);
}

#[test]
fn residual_is_energy_gradient() {
    let prob = mixed_problem(10);
    let grid = prob.grid();
    let phi = random_field(grid, 5, 0.5);
    let psi = random_field(grid, 6, 1.0);
    let res = pb_residual(&phi, &prob).unwrap();
    let directional: f64 = res.values.iter().zip(&psi.values).map(|(r, p)| r * p).sum::<f64>() * grid.cell_area();
    let shifted = |t: f64| {
        let f = ScalarField::from_values(
            grid,
            phi.values.iter().zip(&psi.values).map(|(a, b)| a + t * b).collect(),
        )
        .unwrap();
        pb_energy(&f, &prob).unwrap()
    };
    let t = 1e-5;
    let fd = (shifted(t) - shifted(-t)) / (2.0 * t);
    assert!((fd - directional).abs() <= 1e-7 * directional.abs().max(1.0), "{fd} vs {directional}");
}

#[test]
fn linearization_is_residual_derivative() {
    let prob = mixed_problem(10);
    let grid = prob.grid();
    let phi = random_field(grid, 8, 0.5);
    let psi = random_field(grid, 9, 1.0);
    let lpsi = apply_l_phi(&phi, &psi, &prob).unwrap();
    let t = 1e-6;
    let shifted = |s: f64| {
        let f = ScalarField::from_values(
            grid,
            phi.values.iter().zip(&psi.values).map(|(a, b)| a + s * b).collect(),
        )
        .unwrap();
        pb_residual(&f, &prob).unwrap()
    };
    let (rp, rm) = (shifted(t), shifted(-t));
    let scale = lpsi.max_abs();
    for k in 0..grid.n_cells() {
        let fd = (rp.values[k] - rm.values[k]) / (2.0 * t);
        assert!((fd - lpsi.values[k]).abs() <= 1e-6 * scale, "cell {k}: {fd} vs {}", lpsi.values[k]);
    }
}
