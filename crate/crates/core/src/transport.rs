//! Nernst–Planck transport in conservative flux form.
//!
//! Face fluxes are `j = u c - D (∇c + z c_f ∇Φ)` with `c_f` the logarithmic mean of
//! the two adjacent concentrations, so that `c_f ∇log c = ∇c` holds exactly and
//! discrete Boltzmann profiles carry zero flux. Diffusion is backward Euler; advection
//! and drift are explicit.

use rayon::prelude::*;

use crate::elliptic::potential_face_gradient;
use crate::error::{NpnsError, Result};
use crate::fields::{EdgeData, EdgeMask, IonSpecies, ScalarField, VectorField};
use crate::linalg::{conjugate_gradient, CgSettings, LinearOperator};
use crate::state::{NpnsModel, SimulationState};
use crate::stencil::{dirichlet_lift, log_mean, Shift, ShiftedLaplacian};

/// Safety factor of the explicit advection/drift CFL rule.
pub const CFL_SAFETY: f64 = 0.4;

/// Concentrations below this are a positivity failure.
pub const POSITIVITY_FLOOR: f64 = -1e-12;

/// Face-centered fluxes, one staggered field per species.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxSet {
    pub species: Vec<VectorField>,
}

/// Which parts of the flux to assemble.
#[derive(Clone, Copy)]
struct FluxParts {
    diffusive: bool,
}

fn species_flux(
    c: &ScalarField,
    grad_phi: &VectorField,
    velocity: &VectorField,
    sp: &IonSpecies,
    pinned: &EdgeMask,
    parts: FluxParts,
) -> VectorField {
    let g = c.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let (d, z) = (sp.d, sp.z);
    let gamma = sp.gamma().unwrap_or(0.0);
    let mut out = VectorField::zeros(g);

    let interior = |a: f64, b: f64, vel: f64, grad: f64, h: f64| {
        let mut f = vel * 0.5 * (a + b) - d * z * log_mean(a, b) * grad;
        if parts.diffusive {
            f -= d * (b - a) / h;
        }
        f
    };
    // Pinned boundary face; `outward` is +1 on the right/top edges and -1 on left/bottom.
    let pinned_face = |cin: f64, vel: f64, grad: f64, h: f64, outward: f64| {
        let mut f = vel * gamma - d * z * log_mean(cin, gamma) * grad;
        if parts.diffusive {
            f -= d * outward * (gamma - cin) / (0.5 * h);
        }
        f
    };

    for j in 0..g.ny {
        for i in 1..g.nx {
            let k = g.u_idx(i, j);
            out.u[k] = interior(c.at(i - 1, j), c.at(i, j), velocity.u[k], grad_phi.u[k], hx);
        }
        if pinned.left[j] {
            let k = g.u_idx(0, j);
            out.u[k] = pinned_face(c.at(0, j), velocity.u[k], grad_phi.u[k], hx, -1.0);
        }
        if pinned.right[j] {
            let k = g.u_idx(g.nx, j);
            out.u[k] = pinned_face(c.at(g.nx - 1, j), velocity.u[k], grad_phi.u[k], hx, 1.0);
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            let k = g.v_idx(i, j);
            out.v[k] = interior(c.at(i, j - 1), c.at(i, j), velocity.v[k], grad_phi.v[k], hy);
        }
        if pinned.bottom[i] {
            let k = g.v_idx(i, 0);
            out.v[k] = pinned_face(c.at(i, 0), velocity.v[k], grad_phi.v[k], hy, -1.0);
        }
        if pinned.top[i] {
            let k = g.v_idx(i, g.ny);
            out.v[k] = pinned_face(c.at(i, g.ny - 1), velocity.v[k], grad_phi.v[k], hy, 1.0);
        }
    }
    out
}

/// Full explicit fluxes (advective, diffusive and drift) of the current state.
pub fn compute_fluxes(state: &SimulationState, model: &NpnsModel) -> Result<FluxSet> {
    model.check_state(state)?;
    let grad_phi = potential_face_gradient(&state.phi, &model.boundary);
    let species = state
        .c
        .iter()
        .zip(&model.species)
        .zip(&model.pinned)
        .map(|((c, sp), pinned)| {
            species_flux(
                c,
                &grad_phi,
                &state.flow.velocity,
                sp,
                pinned,
                FluxParts { diffusive: true },
            )
        })
        .collect();
    Ok(FluxSet { species })
}

/// Largest admissible step: `safety * h / max(|u|, max_i D_i |z_i| |∇Φ|)` over faces.
pub fn cfl_limit(state: &SimulationState, model: &NpnsModel, safety: f64) -> f64 {
    let grad_phi = potential_face_gradient(&state.phi, &model.boundary);
    let drift = model
        .species
        .iter()
        .map(|s| s.d * s.z.abs())
        .fold(0.0_f64, f64::max)
        * grad_phi.max_abs();
    let speed = state.flow.velocity.max_abs().max(drift);
    if speed > 0.0 {
        safety * model.grid.h_min() / speed
    } else {
        f64::INFINITY
    }
}

/// Advances all concentrations by `dt`. `state.phi` must be the potential of `state.c`.
///
/// Returns the new concentrations without touching `state`.
pub fn np_step(state: &SimulationState, model: &NpnsModel, dt: f64) -> Result<Vec<ScalarField>> {
    model.check_state(state)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NpnsError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let admissible = cfl_limit(state, model, CFL_SAFETY);
    if dt > admissible * (1.0 + 1e-12) {
        return Err(NpnsError::Cfl { dt, admissible });
    }
    let grad_phi = potential_face_gradient(&state.phi, &model.boundary);
    let grid = model.grid;

    let updated: Vec<ScalarField> = (0..model.species.len())
        .into_par_iter()
        .map(|s| {
            let sp = &model.species[s];
            let pinned = &model.pinned[s];
            let c = &state.c[s];
            let flux = species_flux(
                c,
                &grad_phi,
                &state.flow.velocity,
                sp,
                pinned,
                FluxParts { diffusive: false },
            );
            let div = flux.divergence();
            let gamma = EdgeData::filled(&grid, sp.gamma().unwrap_or(0.0));
            let lift = dirichlet_lift(&grid, pinned, &gamma);
            let b: Vec<f64> = c
                .values
                .iter()
                .zip(&div.values)
                .zip(&lift)
                .map(|((ci, dv), l)| ci - dt * dv + dt * sp.d * l)
                .collect();
            let op = ShiftedLaplacian {
                grid,
                dirichlet: pinned,
                coef: dt * sp.d,
                shift: Shift::Uniform(1.0),
            };
            let mut x = c.values.clone();
            let inv_diag = op.inverse_diagonal();
            conjugate_gradient(
                &op,
                &b,
                &mut x,
                Some(&inv_diag),
                &CgSettings::default().with_rel_tol(1e-14).with_abs_tol(1e-300),
            )?;
            if sp.is_blocking() {
                // The operator maps constants to themselves, so shifting by the mean
                // residual makes the discrete mass balance exact.
                let mut ax = vec![0.0; x.len()];
                op.apply(&x, &mut ax);
                let mean_r =
                    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).sum::<f64>() / x.len() as f64;
                x.iter_mut().for_each(|v| *v += mean_r);
            }
            let out = ScalarField::from_values(grid, x)?;
            let report = positivity_of(&out);
            if report.0 < POSITIVITY_FLOOR {
                return Err(NpnsError::Positivity {
                    species: s,
                    min: report.0,
                    cell: report.1,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(updated)
}

fn positivity_of(c: &ScalarField) -> (f64, usize) {
    c.values
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |(m, k), (i, &v)| if v < m { (v, i) } else { (m, k) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub min: f64,
    pub species: usize,
    pub cell: usize,
    pub passed: bool,
}

/// Minimum concentration over species and cells, flagged below `-1e-12`.
pub fn check_positivity(state: &SimulationState) -> PositivityReport {
    let mut report = PositivityReport {
        min: f64::INFINITY,
        species: 0,
        cell: 0,
        passed: true,
    };
    for (s, c) in state.c.iter().enumerate() {
        let (m, k) = positivity_of(c);
        if m < report.min {
            report.min = m;
            report.species = s;
            report.cell = k;
        }
    }
    report.passed = report.min >= POSITIVITY_FLOOR;
    report
}

/// Value of species `s` on the boundary faces it is pinned on (average of the
/// adjacent cell and its ghost).
pub fn pinned_face_values(c: &ScalarField, sp: &IonSpecies, pinned: &EdgeMask) -> Vec<f64> {
    let Some(gamma) = sp.gamma() else {
        return Vec::new();
    };
    pinned
        .iter()
        .filter(|(_, _, on)| **on)
        .map(|(edge, k, _)| {
            let cin = c.values[edge.adjacent_cell(&c.grid, k)];
            let ghost = 2.0 * gamma - cin;
            0.5 * (ghost + cin)
        })
        .collect()
}
