//! Nonlinear Poisson–Boltzmann steady states.
//!
//! One problem type covers the local equation (every species carries a fixed
//! constant `Z_i`), the nonlocal blocking equation (every species carries a fixed
//! mass `I_i^0`) and the mixed equation in between. Solutions minimise
//!
//! ```text
//! E(Φ) = ε/2 ∫|∇Φ|² + Σ_{fixed Z} ∫ Z_i⁻¹ e^{-z_i Φ} + Σ_{fixed mass} I_i⁰ log ∫ e^{-z_i Φ}
//! ```
//!
//! and are computed by damped Newton on the nonlocal linearization `L_Φ`,
//! globalised by a backtracking line search on `E`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::poisson::neg_eps_laplacian;
use crate::error::{NpnsError, Result};
use crate::fields::{
    check_exponent, harmonic_extension, max_exponent, BoundarySpec, EdgeMask, Grid2D, ScalarField,
};
use crate::linalg::{conjugate_gradient, dot, CgSettings, LinearOperator};
use crate::stencil::{neg_laplacian, neg_laplacian_diagonal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeciesDatum {
    /// Dirichlet-type species: `c* = Z⁻¹ e^{-zΦ}` with `Z` given.
    FixedZ(f64),
    /// Blocking-type species: total mass `∫ c* = I⁰` given, `Z` follows from `Φ`.
    FixedMass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbSpecies {
    pub z: f64,
    pub datum: SpeciesDatum,
}

impl PbSpecies {
    pub fn fixed_z(z: f64, z_const: f64) -> Self {
        Self {
            z,
            datum: SpeciesDatum::FixedZ(z_const),
        }
    }

    pub fn fixed_mass(z: f64, mass: f64) -> Self {
        Self {
            z,
            datum: SpeciesDatum::FixedMass(mass),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PbProblem {
    pub eps: f64,
    pub w: BoundarySpec,
    pub species: Vec<PbSpecies>,
}

impl PbProblem {
    pub fn new(eps: f64, w: BoundarySpec, species: Vec<PbSpecies>) -> Result<Self> {
        let p = Self { eps, w, species };
        p.validate()?;
        Ok(p)
    }

    pub fn grid(&self) -> Grid2D {
        self.w.grid
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(NpnsError::InvalidParameter(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        for (i, s) in self.species.iter().enumerate() {
            let v = match s.datum {
                SpeciesDatum::FixedZ(v) | SpeciesDatum::FixedMass(v) => v,
            };
            if !(v.is_finite() && v > 0.0) || !s.z.is_finite() {
                return Err(NpnsError::InvalidParameter(format!(
                    "species {i}: Z / mass must be positive and valence finite"
                )));
            }
        }
        Ok(())
    }

    /// Number of fixed-`Z` species (`M`).
    pub fn n_fixed_z(&self) -> usize {
        self.species
            .iter()
            .filter(|s| matches!(s.datum, SpeciesDatum::FixedZ(_)))
            .count()
    }
}

/// Per-species Boltzmann profile at a given potential.
struct SpeciesProfile {
    /// `c_i(x) = Z_i⁻¹ e^{-z_i Φ(x)}` for fixed Z, `I_i⁰ p_i(x)` for fixed mass.
    c: Vec<f64>,
    /// `log ∫ e^{-z_i Φ}` (fixed-mass species only).
    log_integral: f64,
    /// `p_i = e^{-z_i Φ} / ∫ e^{-z_i Φ}` (fixed-mass species only).
    p: Option<Vec<f64>>,
}

fn profiles(prob: &PbProblem, phi: &ScalarField) -> Result<Vec<SpeciesProfile>> {
    let area = phi.grid.cell_area();
    prob.species
        .iter()
        .map(|s| {
            check_exponent(max_exponent(s.z, phi))?;
            match s.datum {
                SpeciesDatum::FixedZ(zc) => Ok(SpeciesProfile {
                    c: phi.values.iter().map(|p| (-s.z * p).exp() / zc).collect(),
                    log_integral: f64::NAN,
                    p: None,
                }),
                SpeciesDatum::FixedMass(mass) => {
                    let shift = phi
                        .values
                        .iter()
                        .map(|p| -s.z * p)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = phi.values.iter().map(|p| (-s.z * p - shift).exp()).collect();
                    let total = e.iter().sum::<f64>() * area;
                    let p: Vec<f64> = e.iter().map(|v| v / total).collect();
                    Ok(SpeciesProfile {
                        c: p.iter().map(|v| mass * v).collect(),
                        log_integral: shift + total.ln(),
                        p: Some(p),
                    })
                }
            }
        })
        .collect()
}

/// `ε/2 ∫|∇_h Φ|²`, including the half-cell gradients to the boundary data.
fn gradient_energy(eps: f64, phi: &ScalarField, w: &BoundarySpec) -> f64 {
    let g = phi.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let (rx, ry) = (hy / hx, hx / hy);
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = phi.at(i, j);
            if i + 1 < g.nx {
                let d = phi.at(i + 1, j) - c;
                s += rx * d * d;
            }
            if j + 1 < g.ny {
                let d = phi.at(i, j + 1) - c;
                s += ry * d * d;
            }
        }
    }
    for j in 0..g.ny {
        let dl = phi.at(0, j) - w.w.left[j];
        let dr = phi.at(g.nx - 1, j) - w.w.right[j];
        s += 2.0 * rx * (dl * dl + dr * dr);
    }
    for i in 0..g.nx {
        let db = phi.at(i, 0) - w.w.bottom[i];
        let dt = phi.at(i, g.ny - 1) - w.w.top[i];
        s += 2.0 * ry * (db * db + dt * dt);
    }
    0.5 * eps * s
}

fn energy_from_profiles(prob: &PbProblem, phi: &ScalarField, prof: &[SpeciesProfile]) -> f64 {
    let area = phi.grid.cell_area();
    let mut e = gradient_energy(prob.eps, phi, &prob.w);
    for (s, pr) in prob.species.iter().zip(prof) {
        e += match s.datum {
            SpeciesDatum::FixedZ(_) => pr.c.iter().sum::<f64>() * area,
            SpeciesDatum::FixedMass(mass) => mass * pr.log_integral,
        };
    }
    e
}

/// Discrete variational energy of the (mixed) Poisson–Boltzmann problem.
pub fn pb_energy(phi: &ScalarField, prob: &PbProblem) -> Result<f64> {
    prob.grid().check_same(&phi.grid, "pb_energy")?;
    let prof = profiles(prob, phi)?;
    Ok(energy_from_profiles(prob, phi, &prof))
}

fn charge_from_profiles(prob: &PbProblem, grid: Grid2D, prof: &[SpeciesProfile]) -> ScalarField {
    let mut rho = ScalarField::zeros(grid);
    for (s, pr) in prob.species.iter().zip(prof) {
        for (r, c) in rho.values.iter_mut().zip(&pr.c) {
            *r += s.z * c;
        }
    }
    rho
}

/// Residual `-ε Δ_h Φ - ρ*(Φ)`; it equals the energy gradient divided by the cell area.
pub fn pb_residual(phi: &ScalarField, prob: &PbProblem) -> Result<ScalarField> {
    let prof = profiles(prob, phi)?;
    Ok(residual_from_profiles(prob, phi, &prof).0)
}

fn residual_from_profiles(
    prob: &PbProblem,
    phi: &ScalarField,
    prof: &[SpeciesProfile],
) -> (ScalarField, f64) {
    let rho = charge_from_profiles(prob, phi.grid, prof);
    let mut r = neg_eps_laplacian(prob.eps, phi, &prob.w);
    for (ri, q) in r.values.iter_mut().zip(&rho.values) {
        *ri -= q;
    }
    (r, rho.max_abs())
}

/// The linearization `L_Φ` as a matrix-free operator on zero-trace cell fields.
struct Linearization {
    grid: Grid2D,
    eps: f64,
    mask: EdgeMask,
    /// `G''(Φ) = Σ_{fixed Z} z_i² c_i`.
    local: Vec<f64>,
    /// `(z_i² I_i⁰, p_i)` for the fixed-mass species.
    nonlocal: Vec<(f64, Vec<f64>)>,
}

impl Linearization {
    fn new(prob: &PbProblem, phi: &ScalarField, prof: &[SpeciesProfile]) -> Self {
        let grid = phi.grid;
        let mut local = vec![0.0; grid.n_cells()];
        let mut nonlocal = Vec::new();
        for (s, pr) in prob.species.iter().zip(prof) {
            match s.datum {
                SpeciesDatum::FixedZ(_) => {
                    for (l, c) in local.iter_mut().zip(&pr.c) {
                        *l += s.z * s.z * c;
                    }
                }
                SpeciesDatum::FixedMass(mass) => {
                    nonlocal.push((s.z * s.z * mass, pr.p.clone().unwrap_or_default()));
                }
            }
        }
        Self {
            grid,
            eps: prob.eps,
            mask: EdgeMask::filled(&grid, true),
            local,
            nonlocal,
        }
    }

    fn inverse_diagonal(&self) -> Vec<f64> {
        let area = self.grid.cell_area();
        let mut d = neg_laplacian_diagonal(&self.grid, &self.mask);
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = self.eps * *dk + self.local[k];
            for (coef, p) in &self.nonlocal {
                *dk += coef * p[k] * (1.0 - p[k] * area);
            }
            *dk = 1.0 / *dk;
        }
        d
    }
}

impl LinearOperator for Linearization {
    fn dim(&self) -> usize {
        self.grid.n_cells()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let area = self.grid.cell_area();
        neg_laplacian(&self.grid, &self.mask, x, y);
        for ((yi, xi), l) in y.iter_mut().zip(x).zip(&self.local) {
            *yi = self.eps * *yi + l * xi;
        }
        for (coef, p) in &self.nonlocal {
            let mean = dot(x, p) * area;
            for ((yi, xi), pi) in y.iter_mut().zip(x).zip(p) {
                *yi += coef * (xi - mean) * pi;
            }
        }
    }
}

/// Applies `L_Φ ψ = -εΔψ + G''(Φ)ψ + Σ z_i² I_i⁰ (ψ - (ψ, p_i)) p_i` to a zero-trace `ψ`.
pub fn apply_l_phi(phi: &ScalarField, psi: &ScalarField, prob: &PbProblem) -> Result<ScalarField> {
    prob.grid().check_same(&phi.grid, "apply_l_phi")?;
    phi.grid.check_same(&psi.grid, "apply_l_phi")?;
    let prof = profiles(prob, phi)?;
    let op = Linearization::new(prob, phi, &prof);
    let mut y = vec![0.0; phi.grid.n_cells()];
    op.apply(&psi.values, &mut y);
    ScalarField::from_values(phi.grid, y)
}

/// A Boltzmann state `c_i* = Z_i⁻¹ e^{-z_i Φ*}` with its potential and charge.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannState {
    pub phi_star: ScalarField,
    pub c_star: Vec<ScalarField>,
    /// The constants `Z_i` actually used.
    pub z_const: Vec<f64>,
    pub rho_star: ScalarField,
}

impl BoltzmannState {
    /// Boltzmann profiles induced by `phi`; fixed-mass species get `Z_i = ∫e^{-z_iΦ} / I_i⁰`.
    pub fn from_potential(prob: &PbProblem, phi: ScalarField) -> Result<Self> {
        let prof = profiles(prob, &phi)?;
        let grid = phi.grid;
        let rho_star = charge_from_profiles(prob, grid, &prof);
        let z_const = prob
            .species
            .iter()
            .zip(&prof)
            .map(|(s, pr)| match s.datum {
                SpeciesDatum::FixedZ(zc) => zc,
                SpeciesDatum::FixedMass(mass) => pr.log_integral.exp() / mass,
            })
            .collect();
        let c_star = prof
            .into_iter()
            .map(|pr| ScalarField { grid, values: pr.c })
            .collect();
        Ok(Self {
            phi_star: phi,
            c_star,
            z_const,
            rho_star,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.phi_star.grid
    }

    pub fn masses(&self) -> Vec<f64> {
        self.c_star.iter().map(|c| c.integral()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Zero,
    HarmonicExtension,
    /// Harmonic extension plus a random combination of low sine modes.
    SmoothPerturbation { seed: u64, amplitude: f64 },
    Field(ScalarField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub max_iters: usize,
    pub residual_tol: f64,
    pub line_search_shrink: f64,
    pub initial_guess: InitialGuess,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            residual_tol: 1e-9,
            line_search_shrink: 0.5,
            initial_guess: InitialGuess::HarmonicExtension,
        }
    }
}

impl NewtonConfig {
    pub fn with_guess(mut self, guess: InitialGuess) -> Self {
        self.initial_guess = guess;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(NpnsError::InvalidParameter("residual_tol must be positive".into()));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(NpnsError::InvalidParameter(
                "line_search_shrink must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Converged state plus the iteration record.
#[derive(Debug, Clone)]
pub struct PbSolution {
    pub state: BoltzmannState,
    pub newton_iterations: usize,
    pub gradient_steps: usize,
    /// Sup-norm residual at the start of each iteration (and at exit).
    pub residual_history: Vec<f64>,
    /// Energy of each accepted iterate.
    pub energy_history: Vec<f64>,
}

fn smooth_perturbation(grid: Grid2D, seed: u64, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::new();
    for m in 1..=3 {
        for n in 1..=3 {
            coeffs.push((m as f64, n as f64, rng.gen_range(-1.0..1.0) / (m * n) as f64));
        }
    }
    ScalarField::from_fn(grid, |x, y| {
        let (sx, sy) = (x / grid.lx, y / grid.ly);
        amplitude
            * coeffs
                .iter()
                .map(|(m, n, a)| a * (std::f64::consts::PI * m * sx).sin() * (std::f64::consts::PI * n * sy).sin())
                .sum::<f64>()
    })
}

fn initial_field(prob: &PbProblem, guess: &InitialGuess) -> Result<ScalarField> {
    let grid = prob.grid();
    match guess {
        InitialGuess::Zero => Ok(ScalarField::zeros(grid)),
        InitialGuess::HarmonicExtension => harmonic_extension(&prob.w, &grid, prob.eps),
        InitialGuess::SmoothPerturbation { seed, amplitude } => {
            let mut base = harmonic_extension(&prob.w, &grid, prob.eps)?;
            let pert = smooth_perturbation(grid, *seed, *amplitude);
            for (b, p) in base.values.iter_mut().zip(&pert.values) {
                *b += p;
            }
            Ok(base)
        }
        InitialGuess::Field(f) => {
            grid.check_same(&f.grid, "initial guess")?;
            Ok(f.clone())
        }
    }
}

/// Solves the Poisson–Boltzmann problem; see [`solve_pb_detailed`].
pub fn solve_pb(prob: &PbProblem, cfg: &NewtonConfig) -> Result<BoltzmannState> {
    solve_pb_detailed(prob, cfg).map(|s| s.state)
}

struct Iterate {
    phi: ScalarField,
    prof: Vec<SpeciesProfile>,
    energy: f64,
    residual: ScalarField,
    res_norm: f64,
    rho_norm: f64,
}

fn evaluate(prob: &PbProblem, phi: ScalarField) -> Result<Iterate> {
    let prof = profiles(prob, &phi)?;
    let energy = energy_from_profiles(prob, &phi, &prof);
    let (residual, rho_norm) = residual_from_profiles(prob, &phi, &prof);
    let res_norm = residual.max_abs();
    Ok(Iterate {
        phi,
        prof,
        energy,
        residual,
        res_norm,
        rho_norm,
    })
}

fn axpy(base: &ScalarField, step: f64, dir: &[f64]) -> ScalarField {
    ScalarField {
        grid: base.grid,
        values: base.values.iter().zip(dir).map(|(b, d)| b + step * d).collect(),
    }
}

/// Backtracking on the energy. A trial is accepted on strict energy decrease, or,
/// once energy differences are below rounding, on residual decrease.
fn line_search(
    prob: &PbProblem,
    cur: &Iterate,
    dir: &[f64],
    initial_step: f64,
    shrink: f64,
    max_trials: usize,
) -> Option<Iterate> {
    let noise = 1e-13 * cur.energy.abs().max(1.0);
    let mut step = initial_step;
    for _ in 0..max_trials {
        if let Ok(trial) = evaluate(prob, axpy(&cur.phi, step, dir)) {
            if trial.energy < cur.energy
                || (trial.energy <= cur.energy + noise && trial.res_norm < cur.res_norm)
            {
                return Some(trial);
            }
        }
        step *= shrink;
    }
    None
}

/// Damped Newton for the (mixed, nonlocal) Poisson–Boltzmann equation.
///
/// Each step solves `L_Φ δ = -R(Φ)` by conjugate gradients and backtracks on the
/// energy. If the line search stalls, up to 50 steepest-descent steps are taken
/// before Newton resumes.
pub fn solve_pb_detailed(prob: &PbProblem, cfg: &NewtonConfig) -> Result<PbSolution> {
    prob.validate()?;
    cfg.validate()?;
    let grid = prob.grid();
    let phi0 = initial_field(prob, &cfg.initial_guess)?;
    let mut cur = evaluate(prob, phi0)?;
    let mut residual_history = Vec::new();
    let mut energy_history = vec![cur.energy];
    let mut gradient_steps = 0;
    let cg = CgSettings::default().with_rel_tol(1e-10);

    for it in 0..cfg.max_iters {
        residual_history.push(cur.res_norm);
        if cur.res_norm <= cfg.residual_tol * (1.0 + cur.rho_norm) {
            return Ok(PbSolution {
                state: BoltzmannState::from_potential(prob, cur.phi)?,
                newton_iterations: it,
                gradient_steps,
                residual_history,
                energy_history,
            });
        }
        let op = Linearization::new(prob, &cur.phi, &cur.prof);
        let inv_diag = op.inverse_diagonal();
        let rhs: Vec<f64> = cur.residual.values.iter().map(|r| -r).collect();
        let mut delta = vec![0.0; grid.n_cells()];
        conjugate_gradient(&op, &rhs, &mut delta, Some(&inv_diag), &cg)?;

        match line_search(prob, &cur, &delta, 1.0, cfg.line_search_shrink, 60) {
            Some(next) => cur = next,
            None => {
                // Steepest descent on E: the gradient is the residual times the cell area.
                let step0 = inv_diag.iter().copied().fold(f64::INFINITY, f64::min);
                let mut progressed = false;
                for _ in 0..50 {
                    let dir: Vec<f64> = cur.residual.values.iter().map(|r| -r).collect();
                    match line_search(prob, &cur, &dir, step0, cfg.line_search_shrink, 60) {
                        Some(next) => {
                            cur = next;
                            gradient_steps += 1;
                            progressed = true;
                            energy_history.push(cur.energy);
                        }
                        None => break,
                    }
                }
                if !progressed {
                    return Err(NpnsError::Newton {
                        message: format!(
                            "line search and gradient fallback exhausted at iteration {it}"
                        ),
                        history: residual_history,
                    });
                }
                continue;
            }
        }
        energy_history.push(cur.energy);
    }
    residual_history.push(cur.res_norm);
    if cur.res_norm <= cfg.residual_tol * (1.0 + cur.rho_norm) {
        return Ok(PbSolution {
            state: BoltzmannState::from_potential(prob, cur.phi)?,
            newton_iterations: cfg.max_iters,
            gradient_steps,
            residual_history,
            energy_history,
        });
    }
    Err(NpnsError::Newton {
        message: format!("no convergence after {} iterations", cfg.max_iters),
        history: residual_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;

    fn grid(n: usize) -> Grid2D {
        Grid2D::unit_square(n).unwrap()
    }

    #[test]
    fn energy_of_zero_potential_local() {
        let g = grid(8);
        let prob = PbProblem::new(1.0, BoundarySpec::constant(g, 0.0), vec![PbSpecies::fixed_z(1.0, 1.0)]).unwrap();
        let e = pb_energy(&ScalarField::zeros(g), &prob).unwrap();
        assert!((e - 1.0).abs() < 1e-14);
    }

    #[test]
    fn energy_of_zero_potential_nonlocal() {
        let g = Grid2D::new(8, 6, 2.0, 1.5).unwrap();
        let prob = PbProblem::new(1.0, BoundarySpec::constant(g, 0.0), vec![PbSpecies::fixed_mass(1.0, 2.0)]).unwrap();
        let e = pb_energy(&ScalarField::zeros(g), &prob).unwrap();
        assert!((e - 2.0 * 3.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn l_phi_without_species_is_laplacian() {
        let g = grid(8);
        let prob = PbProblem::new(0.5, BoundarySpec::constant(g, 1.0), vec![]).unwrap();
        let phi = ScalarField::from_fn(g, |x, y| x + y);
        let psi = ScalarField::from_fn(g, |x, y| x * (1.0 - x) * y * (1.0 - y));
        let l = apply_l_phi(&phi, &psi, &prob).unwrap();
        let lap = neg_eps_laplacian(0.5, &psi, &BoundarySpec::constant(g, 0.0));
        assert!(l.max_abs_diff(&lap) < 1e-12);
    }

    #[test]
    fn symmetric_blocking_problem_has_zero_potential() {
        let g = grid(16);
        let prob = PbProblem::new(
            0.1,
            BoundarySpec::constant(g, 0.0),
            vec![PbSpecies::fixed_mass(1.0, 0.8), PbSpecies::fixed_mass(-1.0, 0.8)],
        )
        .unwrap();
        let st = solve_pb(&prob, &NewtonConfig::default()).unwrap();
        assert!(st.phi_star.max_abs() < 1e-12);
        for c in &st.c_star {
            assert!(c.values.iter().all(|v| (v - 0.8).abs() < 1e-12));
        }
    }

    #[test]
    fn neutral_masses_with_constant_boundary_give_constant_potential() {
        let g = grid(12);
        let w = 0.7;
        let prob = PbProblem::new(
            0.05,
            BoundarySpec::constant(g, w),
            vec![PbSpecies::fixed_mass(2.0, 0.5), PbSpecies::fixed_mass(-1.0, 1.0)],
        )
        .unwrap();
        let cfg = NewtonConfig::default().with_guess(InitialGuess::Zero);
        let st = solve_pb(&prob, &cfg).unwrap();
        assert!(st.phi_star.values.iter().all(|v| (v - w).abs() < 1e-9));
        let r = pb_residual(&st.phi_star, &prob).unwrap();
        assert!(r.max_abs() <= cfg.residual_tol * (1.0 + st.rho_star.max_abs()));
    }

    #[test]
    fn blocking_solution_reproduces_masses_and_z() {
        let g = grid(16);
        let w = BoundarySpec::from_fn(g, |x, y| x - 0.5 * y);
        let masses = [0.6, 1.1];
        let prob = PbProblem::new(
            0.02,
            w,
            vec![PbSpecies::fixed_mass(1.0, masses[0]), PbSpecies::fixed_mass(-1.0, masses[1])],
        )
        .unwrap();
        let st = solve_pb(&prob, &NewtonConfig::default()).unwrap();
        for (i, c) in st.c_star.iter().enumerate() {
            assert!((c.integral() - masses[i]).abs() <= 1e-10 * masses[i]);
            let z = prob.species[i].z;
            let zi = st.phi_star.values.iter().map(|p| (-z * p).exp()).sum::<f64>() * g.cell_area() / masses[i];
            assert!((st.z_const[i] - zi).abs() <= 1e-12 * zi);
        }
    }

    #[test]
    fn newton_energy_is_monotone() {
        let g = grid(16);
        let w = BoundarySpec::from_fn(g, |x, _| if x < 0.5 { 2.0 } else { -1.0 });
        let prob = PbProblem::new(
            0.05,
            w,
            vec![PbSpecies::fixed_z(1.0, 1.0), PbSpecies::fixed_mass(-2.0, 0.4)],
        )
        .unwrap();
        let sol = solve_pb_detailed(&prob, &NewtonConfig::default().with_guess(InitialGuess::Zero)).unwrap();
        for w in sol.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{w:?}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        let g = grid(4);
        let prob = PbProblem::new(1.0, BoundarySpec::constant(g, 0.0), vec![]).unwrap();
        let cfg = NewtonConfig {
            line_search_shrink: 1.5,
            ..NewtonConfig::default()
        };
        assert!(solve_pb(&prob, &cfg).is_err());
        assert!(PbProblem::new(1.0, BoundarySpec::constant(g, 0.0), vec![PbSpecies::fixed_z(1.0, -1.0)]).is_err());
    }

    #[test]
    fn iteration_limit_reports_history() {
        let g = grid(8);
        let w = BoundarySpec::from_fn(g, |x, _| 3.0 * x);
        let prob = PbProblem::new(0.01, w, vec![PbSpecies::fixed_z(1.0, 1.0), PbSpecies::fixed_z(-1.0, 1.0)]).unwrap();
        let cfg = NewtonConfig {
            max_iters: 1,
            residual_tol: 1e-14,
            ..NewtonConfig::default()
        };
        match solve_pb(&prob, &cfg).unwrap_err() {
            NpnsError::Newton { history, .. } => assert!(!history.is_empty()),
            e => panic!("unexpected {e}"),
        }
    }
}
