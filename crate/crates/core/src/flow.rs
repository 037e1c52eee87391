//! Incompressible Navier–Stokes on the MAC grid with no-slip walls.
//!
//! One step: explicit centered advection, backward-Euler viscosity, body force, then
//! projection onto discretely divergence-free fields through a Neumann pressure solve.
//! The force is added after the viscous solve so that discrete gradient forces are
//! removed exactly by the projection.

use crate::error::{NpnsError, Result};
use crate::fields::{EdgeData, Grid2D, IonSpecies, PhysicalParams, ScalarField, VectorField};
use crate::linalg::{conjugate_gradient, dot, CgSettings, LinearOperator};
use crate::state::FlowState;
use crate::stencil::{log_mean, Shift, ShiftedLaplacian};
use crate::transport::CFL_SAFETY;

/// Electric body force `-k_BT ρ ∇Φ` on interior faces, `ρ` interpolated arithmetically.
/// Boundary faces are zero.
pub fn compute_force(rho: &ScalarField, phi: &ScalarField, kbt: f64) -> Result<VectorField> {
    rho.grid.check_same(&phi.grid, "force potential")?;
    let g = rho.grid;
    let mut f = VectorField::gradient_of(phi);
    for j in 0..g.ny {
        for i in 1..g.nx {
            let k = g.u_idx(i, j);
            f.u[k] *= -kbt * 0.5 * (rho.at(i - 1, j) + rho.at(i, j));
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let k = g.v_idx(i, j);
            f.v[k] *= -kbt * 0.5 * (rho.at(i, j - 1) + rho.at(i, j));
        }
    }
    Ok(f)
}

/// Same force with the face charge `Σ z_i LM(c_i)` built from logarithmic means, the
/// interpolation the transport fluxes use. At a Boltzmann state this is an exact
/// discrete gradient, `k_BT ∇_h Σ c_i`.
pub fn compute_species_force(
    c: &[ScalarField],
    species: &[IonSpecies],
    phi: &ScalarField,
    kbt: f64,
) -> Result<VectorField> {
    if c.len() != species.len() {
        return Err(NpnsError::Shape(format!(
            "{} concentration fields for {} species",
            c.len(),
            species.len()
        )));
    }
    for ci in c {
        ci.grid.check_same(&phi.grid, "force concentration")?;
    }
    let g = phi.grid;
    let face_charge = |a: usize, b: usize| -> f64 {
        c.iter()
            .zip(species)
            .map(|(ci, s)| s.z * log_mean(ci.values[a], ci.values[b]))
            .sum()
    };
    let mut f = VectorField::gradient_of(phi);
    for j in 0..g.ny {
        for i in 1..g.nx {
            let k = g.u_idx(i, j);
            f.u[k] *= -kbt * face_charge(g.idx(i - 1, j), g.idx(i, j));
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let k = g.v_idx(i, j);
            f.v[k] *= -kbt * face_charge(g.idx(i, j - 1), g.idx(i, j));
        }
    }
    Ok(f)
}

/// What lies beyond the last unknown of a face array in one direction.
#[derive(Clone, Copy)]
enum Wall {
    /// The neighbor is a wall face with value zero.
    Node,
    /// The wall sits half a spacing away; the ghost value is `-x`.
    Reflect,
}

/// `x + coef * (-Δ_h x)` on one velocity component's interior faces.
struct ComponentOperator {
    na: usize,
    nb: usize,
    ha: f64,
    hb: f64,
    wall_a: Wall,
    wall_b: Wall,
    coef: f64,
    shift: f64,
}

impl ComponentOperator {
    fn for_u(g: &Grid2D, coef: f64, shift: f64) -> Self {
        Self {
            na: g.nx - 1,
            nb: g.ny,
            ha: g.hx(),
            hb: g.hy(),
            wall_a: Wall::Node,
            wall_b: Wall::Reflect,
            coef,
            shift,
        }
    }

    fn for_v(g: &Grid2D, coef: f64, shift: f64) -> Self {
        Self {
            na: g.nx,
            nb: g.ny - 1,
            ha: g.hx(),
            hb: g.hy(),
            wall_a: Wall::Reflect,
            wall_b: Wall::Node,
            coef,
            shift,
        }
    }

    fn end_weight(w: Wall) -> f64 {
        match w {
            Wall::Node => 2.0,
            Wall::Reflect => 3.0,
        }
    }

    fn diag(&self, a: usize, b: usize) -> f64 {
        let (ia, ib) = (1.0 / (self.ha * self.ha), 1.0 / (self.hb * self.hb));
        let da = if self.na == 1 {
            2.0 * Self::end_weight(self.wall_a) - 2.0
        } else if a == 0 || a + 1 == self.na {
            Self::end_weight(self.wall_a)
        } else {
            2.0
        };
        let db = if self.nb == 1 {
            2.0 * Self::end_weight(self.wall_b) - 2.0
        } else if b == 0 || b + 1 == self.nb {
            Self::end_weight(self.wall_b)
        } else {
            2.0
        };
        da * ia + db * ib
    }

    fn inverse_diagonal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.na * self.nb);
        for b in 0..self.nb {
            for a in 0..self.na {
                out.push(1.0 / (self.shift + self.coef * self.diag(a, b)));
            }
        }
        out
    }
}

impl LinearOperator for ComponentOperator {
    fn dim(&self) -> usize {
        self.na * self.nb
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (ia, ib) = (1.0 / (self.ha * self.ha), 1.0 / (self.hb * self.hb));
        let na = self.na;
        for b in 0..self.nb {
            for a in 0..na {
                let k = b * na + a;
                let mut off = 0.0;
                if a > 0 {
                    off += x[k - 1] * ia;
                }
                if a + 1 < na {
                    off += x[k + 1] * ia;
                }
                if b > 0 {
                    off += x[k - na] * ib;
                }
                if b + 1 < self.nb {
                    off += x[k + na] * ib;
                }
                y[k] = self.shift * x[k] + self.coef * (self.diag(a, b) * x[k] - off);
            }
        }
    }
}

fn gather_u(g: &Grid2D, u: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity((g.nx - 1) * g.ny);
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.push(u[g.u_idx(i, j)]);
        }
    }
    out
}

fn scatter_u(g: &Grid2D, x: &[f64], u: &mut [f64]) {
    for j in 0..g.ny {
        for i in 1..g.nx {
            u[g.u_idx(i, j)] = x[j * (g.nx - 1) + i - 1];
        }
    }
}

fn gather_v(g: &Grid2D, v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.nx * (g.ny - 1));
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.push(v[g.v_idx(i, j)]);
        }
    }
    out
}

fn scatter_v(g: &Grid2D, x: &[f64], v: &mut [f64]) {
    for j in 1..g.ny {
        for i in 0..g.nx {
            v[g.v_idx(i, j)] = x[(j - 1) * g.nx + i];
        }
    }
}

/// Centered divergence-form `(u·∇)u` on interior faces.
fn advection(vel: &VectorField) -> VectorField {
    let g = vel.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let (u, v) = (&vel.u, &vel.v);
    let mut out = VectorField::zeros(g);
    // Face value at the corner (i, j) between cells (i-1, j-1) and (i, j).
    let u_corner = |i: usize, j: usize| {
        if j == 0 || j == g.ny {
            0.0
        } else {
            0.5 * (u[g.u_idx(i, j - 1)] + u[g.u_idx(i, j)])
        }
    };
    let v_corner = |i: usize, j: usize| {
        if i == 0 || i == g.nx {
            0.0
        } else {
            0.5 * (v[g.v_idx(i - 1, j)] + v[g.v_idx(i, j)])
        }
    };
    let u_cell = |i: usize, j: usize| 0.5 * (u[g.u_idx(i, j)] + u[g.u_idx(i + 1, j)]);
    let v_cell = |i: usize, j: usize| 0.5 * (v[g.v_idx(i, j)] + v[g.v_idx(i, j + 1)]);

    for j in 0..g.ny {
        for i in 1..g.nx {
            let duu = (u_cell(i, j).powi(2) - u_cell(i - 1, j).powi(2)) / hx;
            let duv = (u_corner(i, j + 1) * v_corner(i, j + 1) - u_corner(i, j) * v_corner(i, j)) / hy;
            out.u[g.u_idx(i, j)] = duu + duv;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let dvv = (v_cell(i, j).powi(2) - v_cell(i, j - 1).powi(2)) / hy;
            let duv = (u_corner(i + 1, j) * v_corner(i + 1, j) - u_corner(i, j) * v_corner(i, j)) / hx;
            out.v[g.v_idx(i, j)] = dvv + duv;
        }
    }
    out
}

/// Largest advective step `safety * h / max|u|`.
pub fn advective_cfl_limit(flow: &FlowState, safety: f64) -> f64 {
    let m = flow.velocity.max_abs();
    if m > 0.0 {
        safety * flow.velocity.grid.h_min() / m
    } else {
        f64::INFINITY
    }
}

fn viscous_settings() -> CgSettings {
    CgSettings::default().with_rel_tol(1e-14).with_abs_tol(1e-300)
}

/// Removes the discrete gradient part of `vel` in place and returns the pressure
/// `p` (mean zero) with `vel_out = vel - dt ∇_h p`.
fn project(vel: &mut VectorField, dt: f64, guess: &ScalarField) -> Result<ScalarField> {
    let g = vel.grid;
    let neumann = EdgeData::filled(&g, false);
    let op = ShiftedLaplacian {
        grid: g,
        dirichlet: &neumann,
        coef: 1.0,
        shift: Shift::None,
    };
    // -Δ_N p = -div(u*) / dt
    let b: Vec<f64> = vel.divergence().values.iter().map(|d| -d / dt).collect();
    let mut p = guess.values.clone();
    let inv_diag = op.inverse_diagonal();
    conjugate_gradient(
        &op,
        &b,
        &mut p,
        Some(&inv_diag),
        &CgSettings::default()
            .with_rel_tol(1e-14)
            .with_abs_tol(1e-300)
            .singular(),
    )?;
    let p = ScalarField::from_values(g, p)?;
    let grad = VectorField::gradient_of(&p);
    for (ui, gi) in vel.u.iter_mut().zip(&grad.u) {
        *ui -= dt * gi;
    }
    for (vi, gi) in vel.v.iter_mut().zip(&grad.v) {
        *vi -= dt * gi;
    }
    Ok(p)
}

/// Discretely divergence-free part of `vel` (boundary faces are zeroed first).
pub fn project_velocity(mut vel: VectorField) -> Result<VectorField> {
    vel.zero_boundary_faces();
    let zero = ScalarField::zeros(vel.grid);
    project(&mut vel, 1.0, &zero)?;
    Ok(vel)
}

/// Advances the flow by `dt` under the face force `force`.
pub fn ns_step(
    flow: &FlowState,
    force: &VectorField,
    params: &PhysicalParams,
    dt: f64,
) -> Result<FlowState> {
    let g = flow.velocity.grid;
    g.check_same(&force.grid, "flow force")?;
    g.check_same(&flow.pressure.grid, "flow pressure")?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NpnsError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let admissible = advective_cfl_limit(flow, CFL_SAFETY);
    if dt > admissible * (1.0 + 1e-12) {
        return Err(NpnsError::Cfl { dt, admissible });
    }

    let adv = advection(&flow.velocity);
    let mut vel = VectorField::zeros(g);
    let coef = dt * params.nu;

    let op_u = ComponentOperator::for_u(&g, coef, 1.0);
    let rhs_u: Vec<f64> = gather_u(&g, &flow.velocity.u)
        .iter()
        .zip(gather_u(&g, &adv.u))
        .map(|(u, a)| u - dt * a)
        .collect();
    let mut xu = gather_u(&g, &flow.velocity.u);
    conjugate_gradient(&op_u, &rhs_u, &mut xu, Some(&op_u.inverse_diagonal()), &viscous_settings())?;
    scatter_u(&g, &xu, &mut vel.u);

    let op_v = ComponentOperator::for_v(&g, coef, 1.0);
    let rhs_v: Vec<f64> = gather_v(&g, &flow.velocity.v)
        .iter()
        .zip(gather_v(&g, &adv.v))
        .map(|(v, a)| v - dt * a)
        .collect();
    let mut xv = gather_v(&g, &flow.velocity.v);
    conjugate_gradient(&op_v, &rhs_v, &mut xv, Some(&op_v.inverse_diagonal()), &viscous_settings())?;
    scatter_v(&g, &xv, &mut vel.v);

    for (ui, fi) in vel.u.iter_mut().zip(&force.u) {
        *ui += dt * fi;
    }
    for (vi, fi) in vel.v.iter_mut().zip(&force.v) {
        *vi += dt * fi;
    }
    vel.zero_boundary_faces();
    let pressure = project(&mut vel, dt, &flow.pressure)?;
    if !vel.is_finite() {
        return Err(NpnsError::SolverDivergence {
            solver: "navier-stokes step",
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok(FlowState {
        velocity: vel,
        pressure,
    })
}

/// `(1 / 2k_BT) Σ |u|² h_x h_y` over all faces.
pub fn kinetic_energy(flow: &FlowState, kbt: f64) -> f64 {
    let v = &flow.velocity;
    let a = v.grid.cell_area();
    (dot(&v.u, &v.u) + dot(&v.v, &v.v)) * a / (2.0 * kbt)
}

/// `(ν / k_BT) Σ u·(-Δ_h u) h_x h_y`, the discrete `(ν/k_BT) ∫|∇u|²` with no-slip walls.
pub fn viscous_dissipation(flow: &FlowState, params: &PhysicalParams) -> f64 {
    let g = flow.velocity.grid;
    let mut total = 0.0;
    let op_u = ComponentOperator::for_u(&g, 1.0, 0.0);
    let xu = gather_u(&g, &flow.velocity.u);
    let mut yu = vec![0.0; xu.len()];
    op_u.apply(&xu, &mut yu);
    total += dot(&xu, &yu);
    let op_v = ComponentOperator::for_v(&g, 1.0, 0.0);
    let xv = gather_v(&g, &flow.velocity.v);
    let mut yv = vec![0.0; xv.len()];
    op_v.apply(&xv, &mut yv);
    total += dot(&xv, &yv);
    params.nu / params.kbt * total * g.cell_area()
}
