use crate::error::{NpnsError, Result};
use crate::fields::{BoundarySpec, EdgeMask, ScalarField, VectorField};
use crate::linalg::{conjugate_gradient, CgSettings};
use crate::stencil::{dirichlet_lift, neg_laplacian, ShiftedLaplacian, Shift};

/// `-ε Δ Φ = ρ` in the rectangle with `Φ = W` on the boundary.
#[derive(Debug, Clone)]
pub struct PoissonProblem {
    pub eps: f64,
    pub rho: ScalarField,
    pub w: BoundarySpec,
}

impl PoissonProblem {
    pub fn new(eps: f64, rho: ScalarField, w: BoundarySpec) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(NpnsError::InvalidParameter(format!(
                "eps must be positive, got {eps}"
            )));
        }
        rho.grid.check_same(&w.grid, "Poisson problem")?;
        if !rho.is_finite() {
            return Err(NpnsError::InvalidParameter(
                "charge density must be finite".into(),
            ));
        }
        Ok(Self { eps, rho, w })
    }
}

/// Relative tolerance used for the Dirichlet Poisson solves.
pub const POISSON_REL_TOL: f64 = 1e-12;

pub fn solve_poisson(p: &PoissonProblem) -> Result<ScalarField> {
    solve_poisson_from(p, None)
}

/// Same as [`solve_poisson`], warm-started from `guess`.
pub fn solve_poisson_from(p: &PoissonProblem, guess: Option<&ScalarField>) -> Result<ScalarField> {
    solve_dirichlet(
        p.eps,
        &p.rho,
        &p.w,
        guess,
        &CgSettings::default().with_rel_tol(POISSON_REL_TOL),
    )
}

pub(crate) fn solve_dirichlet(
    eps: f64,
    rho: &ScalarField,
    w: &BoundarySpec,
    guess: Option<&ScalarField>,
    settings: &CgSettings,
) -> Result<ScalarField> {
    let grid = rho.grid;
    let mask = EdgeMask::filled(&grid, true);
    let lift = dirichlet_lift(&grid, &mask, &w.w);
    let b: Vec<f64> = rho
        .values
        .iter()
        .zip(&lift)
        .map(|(r, l)| r + eps * l)
        .collect();
    let op = ShiftedLaplacian {
        grid,
        dirichlet: &mask,
        coef: eps,
        shift: Shift::None,
    };
    let mut x = match guess {
        Some(g) => g.values.clone(),
        None => vec![0.0; grid.n_cells()],
    };
    conjugate_gradient(&op, &b, &mut x, None, settings)?;
    ScalarField::from_values(grid, x)
}

/// Solves `-ε Δ_h ψ = f` with `ψ = 0` on the boundary.
pub fn solve_homogeneous(
    eps: f64,
    f: &ScalarField,
    guess: Option<&ScalarField>,
) -> Result<ScalarField> {
    let w = BoundarySpec::constant(f.grid, 0.0);
    solve_dirichlet(
        eps,
        f,
        &w,
        guess,
        &CgSettings::default().with_rel_tol(POISSON_REL_TOL),
    )
}

/// `-ε Δ_h Φ` including the boundary data `W` through the ghost cells.
pub fn neg_eps_laplacian(eps: f64, phi: &ScalarField, w: &BoundarySpec) -> ScalarField {
    let grid = phi.grid;
    let mask = EdgeMask::filled(&grid, true);
    let mut y = vec![0.0; grid.n_cells()];
    neg_laplacian(&grid, &mask, &phi.values, &mut y);
    let lift = dirichlet_lift(&grid, &mask, &w.w);
    for (yi, l) in y.iter_mut().zip(&lift) {
        *yi = eps * (*yi - l);
    }
    ScalarField { grid, values: y }
}

/// Sup norm of `ε Δ_h Φ + ρ`.
pub fn poisson_residual(p: &PoissonProblem, phi: &ScalarField) -> f64 {
    let lhs = neg_eps_laplacian(p.eps, phi, &p.w);
    lhs.values
        .iter()
        .zip(&p.rho.values)
        .fold(0.0_f64, |m, (l, r)| m.max((l - r).abs()))
}

/// Face-centered gradient of a cell potential whose boundary trace is `W`.
///
/// Boundary faces use the half-cell difference to the trace value.
pub fn potential_face_gradient(phi: &ScalarField, w: &BoundarySpec) -> VectorField {
    let g = phi.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = VectorField::gradient_of(phi);
    for j in 0..g.ny {
        out.u[g.u_idx(0, j)] = (phi.at(0, j) - w.w.left[j]) / (0.5 * hx);
        out.u[g.u_idx(g.nx, j)] = (w.w.right[j] - phi.at(g.nx - 1, j)) / (0.5 * hx);
    }
    for i in 0..g.nx {
        out.v[g.v_idx(i, 0)] = (phi.at(i, 0) - w.w.bottom[i]) / (0.5 * hy);
        out.v[g.v_idx(i, g.ny)] = (w.w.top[i] - phi.at(i, g.ny - 1)) / (0.5 * hy);
    }
    out
}
