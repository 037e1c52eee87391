//! Energy, entropy and dissipation functionals relative to a Boltzmann state, and the
//! checks built on them.

use crate::elliptic::{solve_homogeneous, BoltzmannState};
use crate::error::{NpnsError, Result};
use crate::fields::{compute_tilde_c, harmonic_extension, BoundarySpec, Edge, ScalarField, VectorField};
use crate::flow::{kinetic_energy, viscous_dissipation};
use crate::state::{NpnsModel, SimulationState};
use crate::stencil::log_mean;

/// Concentrations below this are treated as zero inside logarithms.
pub const CONCENTRATION_FLOOR: f64 = 1e-300;

/// Per-step energy tolerance factor: increases above `1e-8 (1 + |E|)` are violations.
pub const DECAY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub time: f64,
    /// Relative entropies plus potential term plus kinetic energy.
    pub total_energy: f64,
    pub relative_entropies: Vec<f64>,
    /// `½ Σ (ρ - ρ*)(Φ - Φ*) h²`.
    pub potential_term: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    pub viscous_dissipation: f64,
    pub masses: Vec<f64>,
    pub modified_energy: Option<f64>,
}

impl EnergyReport {
    /// The energy without the kinetic part.
    pub fn free_energy(&self) -> f64 {
        self.total_energy - self.kinetic
    }
}

/// `Σ (c log(c/c*) - c + c*) h²`, with `0 log 0 = 0`.
pub fn relative_entropy(c: &ScalarField, c_star: &ScalarField) -> f64 {
    let sum: f64 = c
        .values
        .iter()
        .zip(&c_star.values)
        .map(|(&ci, &si)| {
            if ci <= 0.0 {
                si - ci
            } else {
                ci * (ci.max(CONCENTRATION_FLOOR) / si).ln() - ci + si
            }
        })
        .sum();
    sum * c.grid.cell_area()
}

/// Computes energy reports, reusing the previous potential-difference solve as the
/// initial guess of the next.
#[derive(Debug, Clone, Default)]
pub struct EnergyEvaluator {
    last_psi: Option<ScalarField>,
}

impl EnergyEvaluator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn evaluate(
        &mut self,
        state: &SimulationState,
        reference: &BoltzmannState,
        model: &NpnsModel,
    ) -> Result<EnergyReport> {
        check_reference(state, reference)?;
        let relative_entropies: Vec<f64> = state
            .c
            .iter()
            .zip(&reference.c_star)
            .map(|(c, s)| relative_entropy(c, s))
            .collect();
        let rho = model.charge_density(&state.c)?;
        let diff = rho.sub(&reference.rho_star)?;
        let psi = solve_homogeneous(model.params.eps, &diff, self.last_psi.as_ref())?;
        let potential_term = 0.5
            * diff.values.iter().zip(&psi.values).map(|(a, b)| a * b).sum::<f64>()
            * state.grid().cell_area();
        self.last_psi = Some(psi);
        let kinetic = kinetic_energy(&state.flow, model.params.kbt);
        Ok(EnergyReport {
            time: state.t,
            total_energy: relative_entropies.iter().sum::<f64>() + potential_term + kinetic,
            relative_entropies,
            potential_term,
            kinetic,
            dissipation: compute_dissipation(state, model)?,
            viscous_dissipation: viscous_dissipation(&state.flow, &model.params),
            masses: state.masses(),
            modified_energy: None,
        })
    }
}

fn check_reference(state: &SimulationState, reference: &BoltzmannState) -> Result<()> {
    if state.c.len() != reference.c_star.len() {
        return Err(NpnsError::Shape(format!(
            "state has {} species, reference has {}",
            state.c.len(),
            reference.c_star.len()
        )));
    }
    state.grid().check_same(&reference.grid(), "reference state")
}

/// Energy of `state` relative to `reference`.
pub fn compute_energy(
    state: &SimulationState,
    reference: &BoltzmannState,
    model: &NpnsModel,
) -> Result<EnergyReport> {
    EnergyEvaluator::new().evaluate(state, reference, model)
}

/// `Σ_i D_i ∫ c_i |∇(log c_i + z_i Φ)|²` by face quadrature.
///
/// Interior faces use the logarithmic mean of the two cells. Boundary faces carry
/// half weight (trapezoid rule across the wall strip): where a species is pinned they
/// use the half-cell difference to the boundary value `log γ + z W`, elsewhere the
/// integrand is extrapolated linearly from the two nearest interior faces.
pub fn compute_dissipation(state: &SimulationState, model: &NpnsModel) -> Result<f64> {
    model.check_state(state)?;
    let g = model.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let phi = &state.phi;
    let w = &model.boundary.w;
    let mut total = 0.0;
    for ((c, sp), pinned) in state.c.iter().zip(&model.species).zip(&model.pinned) {
        let mu = |k: usize| c.values[k].max(CONCENTRATION_FLOOR).ln() + sp.z * phi.values[k];
        let face = |a: usize, b: usize, h: f64| {
            let cf = log_mean(c.values[a], c.values[b]);
            if cf <= CONCENTRATION_FLOOR {
                0.0
            } else {
                cf * ((mu(b) - mu(a)) / h).powi(2)
            }
        };
        let wall = |edge: Edge, k: usize, inner1: f64, inner2: f64| -> f64 {
            match sp.gamma() {
                Some(gamma) if pinned.edge(edge)[k] => {
                    let cell = edge.adjacent_cell(&g, k);
                    let h = match edge {
                        Edge::Left | Edge::Right => hx,
                        Edge::Bottom | Edge::Top => hy,
                    };
                    let cf = log_mean(c.values[cell], gamma);
                    if cf <= CONCENTRATION_FLOOR {
                        return 0.0;
                    }
                    let mu_b = gamma.ln() + sp.z * w.edge(edge)[k];
                    cf * ((mu_b - mu(cell)) / (0.5 * h)).powi(2)
                }
                _ => (2.0 * inner1 - inner2).max(0.0),
            }
        };
        let mut s = 0.0;
        let mut line = Vec::with_capacity(g.nx.max(g.ny));
        for j in 0..g.ny {
            line.clear();
            line.extend((1..g.nx).map(|i| face(g.idx(i - 1, j), g.idx(i, j), hx)));
            s += line.iter().sum::<f64>();
            let n = line.len();
            s += 0.5 * wall(Edge::Left, j, line[0], line[1]);
            s += 0.5 * wall(Edge::Right, j, line[n - 1], line[n - 2]);
        }
        for i in 0..g.nx {
            line.clear();
            line.extend((1..g.ny).map(|j| face(g.idx(i, j - 1), g.idx(i, j), hy)));
            s += line.iter().sum::<f64>();
            let n = line.len();
            s += 0.5 * wall(Edge::Bottom, i, line[0], line[1]);
            s += 0.5 * wall(Edge::Top, i, line[n - 1], line[n - 2]);
        }
        total += sp.d * s * g.cell_area();
    }
    Ok(total)
}

/// `ℱ = ℰ + kinetic - Σ ρ W̃ h²`.
pub fn compute_modified_energy(
    state: &SimulationState,
    reference: &BoltzmannState,
    w_tilde: &ScalarField,
    model: &NpnsModel,
) -> Result<f64> {
    let report = compute_energy(state, reference, model)?;
    modified_from_report(&report, state, w_tilde, model)
}

/// `ℱ` from an already computed report of the same state.
pub fn modified_from_report(
    report: &EnergyReport,
    state: &SimulationState,
    w_tilde: &ScalarField,
    model: &NpnsModel,
) -> Result<f64> {
    state.grid().check_same(&w_tilde.grid, "W tilde")?;
    let rho = model.charge_density(&state.c)?;
    let coupling: f64 = rho.values.iter().zip(&w_tilde.values).map(|(r, w)| r * w).sum();
    Ok(report.total_energy - coupling * state.grid().cell_area())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub passed: bool,
    /// Indices `k` where `E[k] > E[k-1] + tol`.
    pub violations: Vec<usize>,
    /// Largest increase `E[k] - E[k-1]` seen (negative if strictly decreasing).
    pub max_increase: f64,
    /// Largest relative mismatch between `-ΔE/Δt` and the averaged dissipation, over
    /// steps where the dissipation is resolved.
    pub rate_mismatch: f64,
    pub rate_consistent: bool,
}

/// Flags every step whose total energy grows by more than `1e-8 (1 + |E|)`, and
/// compares the discrete decay rate against `𝒟 + viscous dissipation` (20%).
pub fn check_decay(history: &[EnergyReport]) -> DecayReport {
    let mut violations = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    let mut rate_mismatch: f64 = 0.0;
    let d_max = history
        .iter()
        .map(|r| r.dissipation + r.viscous_dissipation)
        .fold(0.0_f64, f64::max);
    for k in 1..history.len() {
        let (prev, cur) = (&history[k - 1], &history[k]);
        let inc = cur.total_energy - prev.total_energy;
        max_increase = max_increase.max(inc);
        if inc > DECAY_TOL * (1.0 + prev.total_energy.abs()) {
            violations.push(k);
        }
        let dt = cur.time - prev.time;
        let d_prev = prev.dissipation + prev.viscous_dissipation;
        let d_cur = cur.dissipation + cur.viscous_dissipation;
        let d_avg = 0.5 * (d_prev + d_cur);
        // Only where the dissipation is well above rounding and changes slowly.
        if dt > 0.0 && d_avg > 1e-3 * d_max && (d_prev - d_cur).abs() <= 0.5 * d_avg {
            let rate = -inc / dt;
            rate_mismatch = rate_mismatch.max((rate - d_avg).abs() / d_avg);
        }
    }
    if history.len() < 2 {
        max_increase = 0.0;
    }
    DecayReport {
        passed: violations.is_empty(),
        violations,
        max_increase,
        rate_mismatch,
        rate_consistent: rate_mismatch <= 0.2,
    }
}

/// `Σ_i log(Z_A,i / Z_B,i) ∫c_i + ∫K*`, the predicted value of `ℰ_A - ℰ_B`.
///
/// `K*` collects the time-independent part: `Σ(c*_A - c*_B) + ½ρ*_A(Φ*_A - Φ_W)
/// - ½ρ*_B(Φ*_B - Φ_W)` with `Φ_W` the harmonic extension of `W`.
pub fn reference_difference(
    masses: &[f64],
    ref_a: &BoltzmannState,
    ref_b: &BoltzmannState,
    w: &BoundarySpec,
    eps: f64,
) -> Result<f64> {
    let g = ref_a.grid();
    g.check_same(&ref_b.grid(), "reference pair")?;
    let phi_w = harmonic_extension(w, &g, eps)?;
    let log_part: f64 = masses
        .iter()
        .zip(ref_a.z_const.iter().zip(&ref_b.z_const))
        .map(|(m, (za, zb))| (za / zb).ln() * m)
        .sum();
    let mut k = 0.0;
    for (ca, cb) in ref_a.c_star.iter().zip(&ref_b.c_star) {
        k += ca.values.iter().zip(&cb.values).map(|(a, b)| a - b).sum::<f64>();
    }
    for cell in 0..g.n_cells() {
        k += 0.5 * ref_a.rho_star.values[cell] * (ref_a.phi_star.values[cell] - phi_w.values[cell]);
        k -= 0.5 * ref_b.rho_star.values[cell] * (ref_b.phi_star.values[cell] - phi_w.values[cell]);
    }
    Ok(log_part + k * g.cell_area())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub passed: bool,
    /// `ℰ_A - ℰ_B` per snapshot.
    pub differences: Vec<f64>,
    /// `max_t |Δ(t) - Δ(0)| / max(|Δ(0)|, 1)`.
    pub relative_drift: f64,
    /// The closed-form prediction for `Δ` at the first snapshot.
    pub predicted: f64,
}

/// Checks that `ℰ_A(t) - ℰ_B(t)` stays constant (to `tol` relative) along `history`.
pub fn reference_invariance_check(
    history: &[SimulationState],
    ref_a: &BoltzmannState,
    ref_b: &BoltzmannState,
    model: &NpnsModel,
    tol: f64,
) -> Result<InvarianceReport> {
    for (s, sp) in model.species.iter().enumerate() {
        if !sp.is_blocking() {
            let (za, zb) = (ref_a.z_const[s], ref_b.z_const[s]);
            if ((za - zb) / za).abs() > 1e-12 {
                return Err(NpnsError::Config(format!(
                    "species {}: references must share Z on pinned species ({za} vs {zb})",
                    sp.name
                )));
            }
        }
    }
    let first = history
        .first()
        .ok_or_else(|| NpnsError::InvalidParameter("empty state history".into()))?;
    let (mut ea, mut eb) = (EnergyEvaluator::new(), EnergyEvaluator::new());
    let mut differences = Vec::with_capacity(history.len());
    for s in history {
        let a = ea.evaluate(s, ref_a, model)?.total_energy;
        let b = eb.evaluate(s, ref_b, model)?.total_energy;
        differences.push(a - b);
    }
    let d0 = differences[0];
    let relative_drift = differences
        .iter()
        .map(|d| (d - d0).abs())
        .fold(0.0_f64, f64::max)
        / d0.abs().max(1.0);
    let predicted =
        reference_difference(&first.masses(), ref_a, ref_b, &model.boundary, model.params.eps)?;
    Ok(InvarianceReport {
        passed: relative_drift <= tol,
        differences,
        relative_drift,
        predicted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub passed: bool,
    /// Fitted growth constant.
    pub c: f64,
    /// Index of the first sample checked against the envelope.
    pub fit_end: usize,
    /// Smallest `(ℱ(0)+C)e^{Ct} - (ℱ(t)+C)` over the checked samples.
    pub min_margin: f64,
}

fn envelope_margin(f0: f64, c: f64, t: f64, f: f64) -> f64 {
    (f0 + c) * (c * t).exp() - (f + c)
}

/// Fits the smallest `C` with `ℱ(0) + C > 0` whose Gronwall envelope
/// `(ℱ(0)+C) e^{Ct}` dominates `ℱ(t) + C` over the first `fit_fraction` of the run,
/// then checks the envelope on the remaining samples.
pub fn gronwall_check(times: &[f64], values: &[f64], fit_fraction: f64) -> Result<GronwallReport> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(NpnsError::InvalidParameter(
            "gronwall check needs at least three matching samples".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Ok(GronwallReport {
            passed: false,
            c: f64::NAN,
            fit_end: 0,
            min_margin: f64::NAN,
        });
    }
    let t0 = times[0];
    let f0 = values[0];
    let t_fit = t0 + fit_fraction * (times[times.len() - 1] - t0);
    let fit_end = times
        .iter()
        .position(|&t| t > t_fit)
        .unwrap_or(times.len())
        .max(2);
    let slack = |f: f64| 1e-12 * (1.0 + f.abs());
    let holds = |c: f64| {
        (0..fit_end).all(|k| envelope_margin(f0, c, times[k] - t0, values[k]) >= -slack(values[k]))
    };
    let c_min = (-f0).max(0.0) * (1.0 + 1e-9) + 1e-9;
    let mut hi = c_min.max(1e-6);
    let mut doublings = 0;
    while !holds(hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Ok(GronwallReport {
                passed: false,
                c: f64::INFINITY,
                fit_end,
                min_margin: f64::NEG_INFINITY,
            });
        }
    }
    let c = if holds(c_min) {
        c_min
    } else {
        let mut lo = c_min;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let min_margin = (fit_end..times.len())
        .map(|k| envelope_margin(f0, c, times[k] - t0, values[k]) + slack(values[k]))
        .fold(f64::INFINITY, f64::min);
    Ok(GronwallReport {
        passed: min_margin >= 0.0,
        c,
        fit_end,
        min_margin,
    })
}

/// Discrete `L²` distance with cell weights.
pub fn l2_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
    (s * a.grid.cell_area()).sqrt()
}

/// `‖∇_h f‖₂` over interior faces.
pub fn gradient_l2(f: &ScalarField) -> f64 {
    let grad = VectorField::gradient_of(f);
    let s: f64 = grad.u.iter().chain(&grad.v).map(|x| x * x).sum();
    (s * f.grid.cell_area()).sqrt()
}

/// Distances to the Boltzmann state tracked along a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceMonitor {
    pub times: Vec<f64>,
    /// `‖c_i - c_i*‖₂` per sample and species.
    pub dist_l2: Vec<Vec<f64>>,
    /// `‖∇c̃_i‖₂`, `c̃_i = c_i e^{z_i Φ}`, per sample and species.
    pub grad_tilde_l2: Vec<Vec<f64>>,
    pub kinetic: Vec<f64>,
    pub energy_increments: Vec<f64>,
    last_energy: Option<f64>,
}

impl ConvergenceMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &mut self,
        state: &SimulationState,
        reference: &BoltzmannState,
        model: &NpnsModel,
        total_energy: f64,
    ) -> Result<()> {
        check_reference(state, reference)?;
        self.times.push(state.t);
        self.dist_l2.push(
            state
                .c
                .iter()
                .zip(&reference.c_star)
                .map(|(c, s)| l2_distance(c, s))
                .collect(),
        );
        let mut grads = Vec::with_capacity(state.c.len());
        for (c, sp) in state.c.iter().zip(&model.species) {
            grads.push(gradient_l2(&compute_tilde_c(c, &state.phi, sp.z)?));
        }
        self.grad_tilde_l2.push(grads);
        self.kinetic.push(kinetic_energy(&state.flow, model.params.kbt));
        if let Some(prev) = self.last_energy {
            self.energy_increments.push(total_energy - prev);
        }
        self.last_energy = Some(total_energy);
        Ok(())
    }

    /// `‖c_i - c_i*‖₂ / ‖c_i*‖₂` at the last sample.
    pub fn final_relative_distance(&self, reference: &BoltzmannState) -> Vec<f64> {
        let Some(last) = self.dist_l2.last() else {
            return Vec::new();
        };
        last.iter()
            .zip(&reference.c_star)
            .map(|(d, s)| d / l2_distance(s, &ScalarField::zeros(s.grid)))
            .collect()
    }

    /// Time average of `‖∇c̃_i‖₂` over the last quarter of the samples, relative to its
    /// first value, per species.
    pub fn late_gradient_ratio(&self) -> Vec<f64> {
        let n = self.grad_tilde_l2.len();
        if n == 0 {
            return Vec::new();
        }
        let start = n - (n / 4).max(1);
        let ns = self.grad_tilde_l2[0].len();
        (0..ns)
            .map(|s| {
                let avg =
                    (start..n).map(|k| self.grad_tilde_l2[k][s]).sum::<f64>() / (n - start) as f64;
                let first = self.grad_tilde_l2[0][s];
                if first > 0.0 {
                    avg / first
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{solve_pb, solve_poisson, NewtonConfig, PbProblem, PbSpecies, PoissonProblem};
    use crate::fields::{Grid2D, IonSpecies, PhysicalParams};
    use crate::state::FlowState;
    use proptest::prelude::*;

    const EPS: f64 = 0.05;

    fn setup(n: usize) -> (NpnsModel, BoltzmannState) {
        let g = Grid2D::unit_square(n).unwrap();
        let w = BoundarySpec::from_fn(g, |x, y| 0.5 * y - 0.2 * x);
        let model = NpnsModel::new(
            g,
            PhysicalParams::new(EPS, 1.0, 1.0).unwrap(),
            vec![IonSpecies::blocking("p", 1.0, 1.0), IonSpecies::blocking("n", -1.0, 1.0)],
            w.clone(),
        )
        .unwrap();
        let prob = PbProblem::new(
            EPS,
            w,
            vec![PbSpecies::fixed_mass(1.0, 1.0), PbSpecies::fixed_mass(-1.0, 1.0)],
        )
        .unwrap();
        let reference = solve_pb(&prob, &NewtonConfig::default()).unwrap();
        (model, reference)
    }

    fn state_from(model: &NpnsModel, c: Vec<ScalarField>) -> SimulationState {
        let rho = model.charge_density(&c).unwrap();
        let phi = solve_poisson(&PoissonProblem::new(EPS, rho, model.boundary.clone()).unwrap()).unwrap();
        SimulationState {
            c,
            phi,
            flow: FlowState::at_rest(model.grid),
            t: 0.0,
        }
    }

    fn perturbed(model: &NpnsModel, a: f64, b: f64) -> SimulationState {
        let c = vec![
            ScalarField::from_fn(model.grid, |x, y| 1.0 + a * (3.0 * x).sin() * y),
            ScalarField::from_fn(model.grid, |x, y| 1.0 + b * (2.0 * y).cos() * x),
        ];
        state_from(model, c)
    }

    #[test]
    fn reference_state_has_zero_energy() {
        let (model, reference) = setup(12);
        let s = SimulationState {
            c: reference.c_star.clone(),
            phi: reference.phi_star.clone(),
            flow: FlowState::at_rest(model.grid),
            t: 0.0,
        };
        let r = compute_energy(&s, &reference, &model).unwrap();
        assert!(r.total_energy.abs() < 1e-14);
        assert!(r.relative_entropies.iter().all(|e| e.abs() < 1e-14));
        assert!(r.dissipation < 1e-20, "{}", r.dissipation);
        assert_eq!(r.kinetic, 0.0);
    }

    #[test]
    fn doubled_concentrations_entropy() {
        let (model, reference) = setup(10);
        let s = SimulationState {
            c: reference.c_star.iter().map(|c| c.map(|v| 2.0 * v)).collect(),
            phi: reference.phi_star.clone(),
            flow: FlowState::at_rest(model.grid),
            t: 0.0,
        };
        let r = compute_energy(&s, &reference, &model).unwrap();
        let factor = 2.0 * 2f64.ln() - 1.0;
        for (e, m) in r.relative_entropies.iter().zip(reference.masses()) {
            assert!((e - factor * m).abs() < 1e-13);
        }
    }

    /// Dense oracle: entropy by direct sums, potential term through an explicit matrix.
    fn naive_energy(s: &SimulationState, reference: &BoltzmannState, model: &NpnsModel) -> f64 {
        let g = model.grid;
        let n = g.n_cells();
        let h2 = g.cell_area();
        let mut ent = 0.0;
        for (c, cs) in s.c.iter().zip(&reference.c_star) {
            for k in 0..n {
                let (a, b) = (c.values[k], cs.values[k]);
                ent += (a / b * (a / b).ln() - a / b + 1.0) * b * h2;
            }
        }
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let h = if di != 0 { g.hx() } else { g.hy() };
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= g.nx as i64 || jj >= g.ny as i64 {
                        m[(k, k)] += 2.0 * EPS / (h * h);
                    } else {
                        m[(k, k)] += EPS / (h * h);
                        m[(k, g.idx(ii as usize, jj as usize))] -= EPS / (h * h);
                    }
                }
            }
        }
        let rho = model.charge_density(&s.c).unwrap();
        let d = nalgebra::DVector::from_iterator(n, (0..n).map(|k| rho.values[k] - reference.rho_star.values[k]));
        let psi = m.lu().solve(&d).unwrap();
        ent + 0.5 * d.dot(&psi) * h2
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn energy_matches_dense_oracle(a in -0.5f64..0.5, b in -0.5f64..0.5) {
            let (model, reference) = setup(10);
            let s = perturbed(&model, a, b);
            let r = compute_energy(&s, &reference, &model).unwrap();
            let oracle = naive_energy(&s, &reference, &model);
            prop_assert!(r.total_energy > 0.0);
            prop_assert!((r.total_energy - oracle).abs() <= 1e-12 * oracle.abs().max(1e-300) + 1e-15);
            prop_assert!(r.potential_term >= 0.0);
        }

        #[test]
        fn dissipation_scales_linearly_at_fixed_potential(lambda in 0.1f64..10.0) {
            let (model, reference) = setup(10);
            let s = perturbed(&model, 0.3, -0.2);
            let mut scaled = s.clone();
            scaled.c[0] = s.c[0].map(|v| lambda * v);
            let only = |st: &SimulationState, keep: usize| {
                let mut m = model.clone();
                m.species[1 - keep].d = 1e-300;
                compute_dissipation(st, &m).unwrap()
            };
            let (d0, d1) = (only(&s, 0), only(&scaled, 0));
            prop_assert!((d1 - lambda * d0).abs() <= 1e-12 * lambda * d0);
            let _ = reference;
        }
    }

    #[test]
    fn dissipation_of_neutral_species_matches_quadrature() {
        use std::f64::consts::PI;
        let n = 256;
        let g = Grid2D::unit_square(n).unwrap();
        let model = NpnsModel::new(
            g,
            PhysicalParams::new(EPS, 1.0, 1.0).unwrap(),
            vec![IonSpecies::blocking("a", 0.0, 1.0)],
            BoundarySpec::constant(g, 0.0),
        )
        .unwrap();
        let c = ScalarField::from_fn(g, |x, _| 1.0 + 0.1 * (PI * x).sin());
        let s = SimulationState {
            c: vec![c],
            phi: ScalarField::zeros(g),
            flow: FlowState::at_rest(g),
            t: 0.0,
        };
        let d = compute_dissipation(&s, &model).unwrap();
        let oracle = crate::elliptic::pb1d::adaptive_simpson(
            |x| {
                let dc = 0.1 * PI * (PI * x).cos();
                dc * dc / (1.0 + 0.1 * (PI * x).sin())
            },
            0.0,
            1.0,
            1e-13,
        );
        assert!((d - oracle).abs() < 1e-4, "{d} vs {oracle}");
    }

    fn synthetic(values: &[f64]) -> Vec<EnergyReport> {
        values
            .iter()
            .enumerate()
            .map(|(k, &e)| EnergyReport {
                time: k as f64,
                total_energy: e,
                relative_entropies: vec![e],
                potential_term: 0.0,
                kinetic: 0.0,
                dissipation: 0.0,
                viscous_dissipation: 0.0,
                masses: vec![1.0],
                modified_energy: None,
            })
            .collect()
    }

    #[test]
    fn decay_check_flags_upticks() {
        let down: Vec<f64> = (0..20).map(|k| (-0.1 * k as f64).exp()).collect();
        assert!(check_decay(&synthetic(&down)).passed);
        let mut up = down.clone();
        up[7] = up[6] + 1e-3;
        let r = check_decay(&synthetic(&up));
        assert!(!r.passed);
        assert_eq!(r.violations, vec![7]);
    }

    #[test]
    fn reference_difference_matches_energy_gap() {
        let (model, ref_a) = setup(12);
        let prob_b = PbProblem::new(
            EPS,
            model.boundary.clone(),
            ref_a.z_const.iter().zip([1.0, -1.0]).map(|(z, v)| PbSpecies::fixed_z(v, 2.0 * z)).collect(),
        )
        .unwrap();
        let ref_b = solve_pb(&prob_b, &NewtonConfig::default()).unwrap();
        let states = vec![perturbed(&model, 0.3, -0.1), perturbed(&model, -0.2, 0.4)];
        for s in &states {
            let gap = compute_energy(s, &ref_a, &model).unwrap().total_energy
                - compute_energy(s, &ref_b, &model).unwrap().total_energy;
            let predicted = reference_difference(&s.masses(), &ref_a, &ref_b, &model.boundary, EPS).unwrap();
            assert!((gap - predicted).abs() < 1e-10 * gap.abs().max(1.0), "{gap} vs {predicted}");
        }
        // Same masses: the difference does not move.
        let same_mass = vec![perturbed(&model, 0.0, 0.0), perturbed(&model, 0.0, 0.0)];
        let r = reference_invariance_check(&same_mass, &ref_a, &ref_b, &model, 1e-8).unwrap();
        assert!(r.passed);
        let identical = reference_invariance_check(&states, &ref_a, &ref_a, &model, 1e-8).unwrap();
        assert!(identical.differences.iter().all(|d| d.abs() < 1e-14));
        // Changing the mass between snapshots shows up as drift.
        let r = reference_invariance_check(&states, &ref_a, &ref_b, &model, 1e-8).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn modified_energy_without_coupling() {
        let (model, reference) = setup(10);
        let s = perturbed(&model, 0.2, 0.1);
        let e = compute_energy(&s, &reference, &model).unwrap().total_energy;
        let f = compute_modified_energy(&s, &reference, &ScalarField::zeros(model.grid), &model).unwrap();
        assert_eq!(e, f);
        let neutral = state_from(&model, vec![ScalarField::constant(model.grid, 1.0); 2]);
        let e = compute_energy(&neutral, &reference, &model).unwrap().total_energy;
        let f = compute_modified_energy(&neutral, &reference, &ScalarField::constant(model.grid, 3.0), &model)
            .unwrap();
        assert_eq!(e, f);
    }

    #[test]
    fn gronwall_envelope() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let grow: Vec<f64> = times.iter().map(|t| 2.0 * (0.5 * t).exp() - 1.0).collect();
        let r = gronwall_check(&times, &grow, 0.1).unwrap();
        assert!(r.passed, "{r:?}");
        let decay: Vec<f64> = times.iter().map(|t| -0.3 + (-t).exp()).collect();
        assert!(gronwall_check(&times, &decay, 0.1).unwrap().passed);
        let mut spike = decay.clone();
        spike[80] = 50.0;
        assert!(!gronwall_check(&times, &spike, 0.1).unwrap().passed);
    }

    #[test]
    fn monitor_tracks_distances() {
        let (model, reference) = setup(10);
        let mut m = ConvergenceMonitor::new();
        let s = perturbed(&model, 0.2, 0.1);
        m.record(&s, &reference, &model, 1.0).unwrap();
        let eq = SimulationState {
            c: reference.c_star.clone(),
            phi: reference.phi_star.clone(),
            flow: FlowState::at_rest(model.grid),
            t: 1.0,
        };
        m.record(&eq, &reference, &model, 0.5).unwrap();
        assert_eq!(m.energy_increments, vec![-0.5]);
        assert!(m.final_relative_distance(&reference).iter().all(|d| *d == 0.0));
        assert!(m.grad_tilde_l2[1].iter().all(|g| *g < 1e-10));
    }
}
