use super::boundary::BoundarySpec;
use super::grid::{Grid2D, ScalarField};
use super::species::IonSpecies;
use crate::elliptic::poisson::solve_dirichlet;
use crate::error::{NpnsError, Result};
use crate::linalg::CgSettings;

/// Largest admissible `|z * phi|` inside an exponential.
pub const EXP_GUARD: f64 = 60.0;

#[inline]
pub fn check_exponent(arg: f64) -> Result<()> {
    if arg.abs() > EXP_GUARD || !arg.is_finite() {
        return Err(NpnsError::Overflow {
            max_abs: arg.abs(),
            limit: EXP_GUARD,
        });
    }
    Ok(())
}

/// Largest `|z * phi|` over the field.
pub fn max_exponent(z: f64, phi: &ScalarField) -> f64 {
    phi.values.iter().fold(0.0_f64, |m, p| m.max((z * p).abs()))
}

pub fn check_field_exponent(z: f64, phi: &ScalarField) -> Result<()> {
    check_exponent(max_exponent(z, phi))
}

/// ρ = Σ z_i c_i, cell by cell.
pub fn compute_charge_density(c: &[ScalarField], species: &[IonSpecies]) -> Result<ScalarField> {
    if c.len() != species.len() {
        return Err(NpnsError::Shape(format!(
            "{} concentration fields for {} species",
            c.len(),
            species.len()
        )));
    }
    let Some(first) = c.first() else {
        return Err(NpnsError::Shape("no concentration fields".into()));
    };
    let grid = first.grid;
    let mut rho = ScalarField::zeros(grid);
    for (ci, sp) in c.iter().zip(species) {
        grid.check_same(&ci.grid, "charge density")?;
        for (r, v) in rho.values.iter_mut().zip(&ci.values) {
            *r += sp.z * v;
        }
    }
    Ok(rho)
}

/// The auxiliary field `c̃ = c e^{zΦ}`.
pub fn compute_tilde_c(c: &ScalarField, phi: &ScalarField, z: f64) -> Result<ScalarField> {
    c.grid.check_same(&phi.grid, "tilde c")?;
    check_field_exponent(z, phi)?;
    Ok(ScalarField {
        grid: c.grid,
        values: c
            .values
            .iter()
            .zip(&phi.values)
            .map(|(ci, p)| ci * (z * p).exp())
            .collect(),
    })
}

/// Discrete harmonic function with boundary trace `W` on the whole boundary.
pub fn harmonic_extension(w: &BoundarySpec, grid: &Grid2D, eps: f64) -> Result<ScalarField> {
    if !(eps > 0.0) {
        return Err(NpnsError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    grid.check_same(&w.grid, "harmonic extension")?;
    let zero = ScalarField::zeros(*grid);
    solve_dirichlet(
        eps,
        &zero,
        w,
        None,
        &CgSettings::default().with_rel_tol(1e-14),
    )
}
