//! The time-stepping loop: transport, potential, force and flow, then diagnostics.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use super::config::{BoundaryRegime, ReferencePolicy, ScenarioConfig};
use super::io::{save_snapshot, TimeseriesRow, TimeseriesWriter};
use crate::diagnostics::{
    check_decay, gronwall_check, modified_from_report, ConvergenceMonitor, EnergyEvaluator,
    EnergyReport,
};
use crate::elliptic::{solve_pb, solve_poisson_from, BoltzmannState, NewtonConfig, PoissonProblem};
use crate::error::{NpnsError, Result};
use crate::fields::{harmonic_extension, ScalarField};
use crate::flow::{compute_species_force, ns_step};
use crate::state::{FlowState, NpnsModel, SimulationState};
use crate::transport::{cfl_limit, np_step, POSITIVITY_FLOOR};

/// Rejections (each halving `dt`) allowed for a single step.
pub const MAX_REJECTIONS: usize = 10;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where to write the time series, snapshots and summary; nothing is written if `None`.
    pub out_dir: Option<PathBuf>,
    /// Keep a copy of the state at every output row.
    pub keep_states: bool,
}

/// Bookkeeping for one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub rejections: usize,
    pub min_concentration: f64,
    pub masses: Vec<f64>,
    pub max_divergence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub timeseries: PathBuf,
    pub snapshot_dir: PathBuf,
    pub boltzmann_state: PathBuf,
    pub summary: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{mark}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub regime: BoundaryRegime,
    pub model: NpnsModel,
    /// Long-time limit predicted from the initial masses and the boundary data.
    pub target: BoltzmannState,
    /// State the energy is measured against.
    pub reference: BoltzmannState,
    pub w_tilde: Option<ScalarField>,
    pub initial_state: SimulationState,
    pub final_state: SimulationState,
    /// One report per accepted step, starting with the initial state.
    pub reports: Vec<EnergyReport>,
    pub steps: Vec<StepRecord>,
    pub rows: Vec<TimeseriesRow>,
    pub monitor: ConvergenceMonitor,
    /// States at output rows when [`RunOptions::keep_states`] is set.
    pub states: Vec<SimulationState>,
    pub rejected_steps: usize,
    pub artifacts: Option<RunArtifacts>,
    pub wall_time: Duration,
}

struct Output {
    dir: PathBuf,
    snapshots: PathBuf,
    csv: TimeseriesWriter<BufWriter<File>>,
}

impl Output {
    fn create(dir: &Path, n_species: usize) -> Result<Self> {
        let snapshots = dir.join("snapshots");
        std::fs::create_dir_all(&snapshots)?;
        let file = BufWriter::new(File::create(dir.join("timeseries.csv"))?);
        Ok(Self {
            dir: dir.to_path_buf(),
            snapshots,
            csv: TimeseriesWriter::new(file, n_species)?,
        })
    }
}

fn try_step(state: &SimulationState, model: &NpnsModel, dt: f64) -> Result<SimulationState> {
    let c = np_step(state, model, dt)?;
    let rho = model.charge_density(&c)?;
    let problem = PoissonProblem::new(model.params.eps, rho, model.boundary.clone())?;
    let phi = solve_poisson_from(&problem, Some(&state.phi))?;
    let force = compute_species_force(&c, &model.species, &phi, model.params.kbt)?;
    let flow: FlowState = ns_step(&state.flow, &force, &model.params, dt)?;
    Ok(SimulationState {
        c,
        phi,
        flow,
        t: state.t + dt,
    })
}

fn make_row(
    report: &EnergyReport,
    monitor: &ConvergenceMonitor,
) -> TimeseriesRow {
    TimeseriesRow {
        t: report.time,
        total_energy: report.total_energy,
        kinetic: report.kinetic,
        dissipation: report.dissipation,
        masses: report.masses.clone(),
        entropies: report.relative_entropies.clone(),
        potential_term: report.potential_term,
        dist_l2: monitor.dist_l2.last().cloned().unwrap_or_default(),
        grad_tilde_l2: monitor.grad_tilde_l2.last().cloned().unwrap_or_default(),
        modified_energy: report.modified_energy,
    }
}

/// Runs a scenario to `t_end`.
///
/// A step that drives a concentration below `-1e-12` is retried with half the step
/// size, up to [`MAX_REJECTIONS`] times; rejected attempts never touch the state. On
/// any other error the last good state is written to `snapshots/last_good.npns`
/// (when an output directory is set) before the error is returned.
pub fn run_simulation(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let model = cfg.model()?;
    let initial_state = cfg.initial_state(&model)?;
    let newton = NewtonConfig::default();
    let target = solve_pb(&cfg.target_pb_problem(&model, &initial_state)?, &newton)?;
    let reference = match cfg.reference.policy {
        ReferencePolicy::Auto => target.clone(),
        ReferencePolicy::Explicit => solve_pb(&cfg.reference_pb_problem(&model, &initial_state)?, &newton)?,
    };
    let w_tilde = match cfg.boundary_regime {
        BoundaryRegime::GeneralSelective => {
            Some(harmonic_extension(&model.boundary, &model.grid, model.params.eps)?)
        }
        _ => None,
    };
    let n_species = model.species.len();
    let mut output = match &opts.out_dir {
        Some(dir) => Some(Output::create(dir, n_species)?),
        None => None,
    };

    let mut evaluator = EnergyEvaluator::new();
    let mut monitor = ConvergenceMonitor::new();
    let mut reports = Vec::new();
    let mut steps = Vec::new();
    let mut rows = Vec::new();
    let mut states = Vec::new();

    let mut observe = |state: &SimulationState,
                       write_row: bool,
                       reports: &mut Vec<EnergyReport>,
                       rows: &mut Vec<TimeseriesRow>,
                       states: &mut Vec<SimulationState>,
                       monitor: &mut ConvergenceMonitor,
                       output: &mut Option<Output>|
     -> Result<()> {
        let mut report = evaluator.evaluate(state, &reference, &model)?;
        if let Some(wt) = &w_tilde {
            report.modified_energy = Some(modified_from_report(&report, state, wt, &model)?);
        }
        if write_row {
            monitor.record(state, &target, &model, report.total_energy)?;
            let row = make_row(&report, monitor);
            if let Some(out) = output.as_mut() {
                out.csv.write(&row)?;
            }
            rows.push(row);
            if opts.keep_states {
                states.push(state.clone());
            }
        }
        reports.push(report);
        Ok(())
    };

    let mut state = initial_state.clone();
    observe(&state, true, &mut reports, &mut rows, &mut states, &mut monitor, &mut output)?;

    let t_end = cfg.run.t_end;
    let mut rejected_steps = 0;
    let mut step = 0usize;
    let result: Result<()> = (|| {
        while state.t < t_end * (1.0 - 1e-12) {
            let admissible = cfl_limit(&state, &model, cfg.run.cfl_safety);
            let mut dt = cfg.run.dt_max.min(admissible).min(t_end - state.t);
            let mut rejections = 0;
            let next = loop {
                match try_step(&state, &model, dt) {
                    Ok(s) => break s,
                    Err(NpnsError::Positivity { species, min, cell }) if rejections < MAX_REJECTIONS => {
                        warn!(
                            "t = {:.6e}: species {species} reached {min:.3e} at cell {cell}; halving dt {dt:.3e}",
                            state.t
                        );
                        dt *= 0.5;
                        rejections += 1;
                        rejected_steps += 1;
                    }
                    Err(e) => return Err(e),
                }
            };
            state = next;
            step += 1;
            let final_step = state.t >= t_end * (1.0 - 1e-12);
            if final_step {
                state.t = t_end;
            }
            steps.push(StepRecord {
                t: state.t,
                dt,
                rejections,
                min_concentration: state.min_concentration(),
                masses: state.masses(),
                max_divergence: state.flow.velocity.divergence().max_abs(),
            });
            let write_row = final_step || step % cfg.run.output_every == 0;
            observe(&state, write_row, &mut reports, &mut rows, &mut states, &mut monitor, &mut output)?;
            let last = reports.last().expect("report just pushed");
            if !last.total_energy.is_finite() {
                return Err(NpnsError::SolverDivergence {
                    solver: "time stepping",
                    iterations: step,
                    residual: last.total_energy,
                });
            }
            if let Some(out) = output.as_ref() {
                if cfg.run.snapshot_every > 0 && step % cfg.run.snapshot_every == 0 {
                    save_snapshot(&out.snapshots.join(format!("step_{step:07}.npns")), &state)?;
                }
            }
            if step % 100 == 0 {
                debug!("step {step}: t = {:.6e}, dt = {dt:.3e}, E = {:.6e}", state.t, last.total_energy);
            }
        }
        Ok(())
    })();

    if let Err(e) = result {
        if let Some(out) = output.as_mut() {
            let _ = out.csv.flush();
            let _ = save_snapshot(&out.snapshots.join("last_good.npns"), &state);
        }
        return Err(e);
    }

    let mut outcome = RunOutcome {
        regime: cfg.boundary_regime,
        model,
        target,
        reference,
        w_tilde,
        initial_state,
        final_state: state,
        reports,
        steps,
        rows,
        monitor,
        states,
        rejected_steps,
        artifacts: None,
        wall_time: started.elapsed(),
    };
    info!(
        "finished {} steps to t = {} in {:.2?} ({} rejected)",
        outcome.steps.len(),
        outcome.final_state.t,
        outcome.wall_time,
        outcome.rejected_steps
    );

    if let Some(mut out) = output {
        out.csv.flush()?;
        let final_path = out.snapshots.join("final.npns");
        save_snapshot(&final_path, &outcome.final_state)?;
        let boltzmann = out.dir.join("boltzmann.npns");
        let g = outcome.model.grid;
        save_snapshot(
            &boltzmann,
            &SimulationState {
                c: outcome.target.c_star.clone(),
                phi: outcome.target.phi_star.clone(),
                flow: FlowState::at_rest(g),
                t: outcome.final_state.t,
            },
        )?;
        let summary = out.dir.join("summary.txt");
        let mut text = String::new();
        for check in outcome.property_checks() {
            text.push_str(&check.to_string());
            text.push('\n');
        }
        std::fs::write(&summary, text)?;
        outcome.artifacts = Some(RunArtifacts {
            timeseries: out.dir.join("timeseries.csv"),
            snapshot_dir: out.snapshots,
            boltzmann_state: boltzmann,
            summary,
        });
    }
    Ok(outcome)
}

/// Per-step and whole-run relative mass changes of the blocking species.
pub fn mass_drift(outcome: &RunOutcome) -> (f64, f64) {
    let initial = outcome.initial_state.masses();
    let mut per_step: f64 = 0.0;
    let mut whole: f64 = 0.0;
    let mut prev = initial.clone();
    for rec in &outcome.steps {
        for (s, sp) in outcome.model.species.iter().enumerate() {
            if !sp.is_blocking() {
                continue;
            }
            per_step = per_step.max(((rec.masses[s] - prev[s]) / prev[s]).abs());
            whole = whole.max(((rec.masses[s] - initial[s]) / initial[s]).abs());
        }
        prev = rec.masses.clone();
    }
    (per_step, whole)
}

impl RunOutcome {
    /// Relative `L²` distance of each final concentration to the predicted Boltzmann state.
    pub fn final_relative_distance(&self) -> Vec<f64> {
        self.monitor.final_relative_distance(&self.target)
    }

    pub fn final_kinetic_energy(&self) -> f64 {
        self.reports.last().map_or(0.0, |r| r.kinetic)
    }

    /// The property suite appropriate for the run's boundary regime.
    pub fn property_checks(&self) -> Vec<PropertyCheck> {
        let mut out = Vec::new();
        let decaying = self.regime != BoundaryRegime::GeneralSelective;
        let finite = self.reports.iter().all(|r| r.total_energy.is_finite());
        out.push(PropertyCheck {
            name: "finite".into(),
            passed: finite,
            detail: format!(
                "{} steps to t = {}, {} rejected",
                self.steps.len(),
                self.final_state.t,
                self.rejected_steps
            ),
        });
        if decaying {
            let d = check_decay(&self.reports);
            out.push(PropertyCheck {
                name: "energy decay".into(),
                passed: d.passed,
                detail: format!(
                    "{} violations, largest step increase {:.3e}, rate mismatch {:.3}",
                    d.violations.len(),
                    d.max_increase,
                    d.rate_mismatch
                ),
            });
        }
        if self.model.species.iter().any(|s| s.is_blocking()) {
            let (per_step, whole) = mass_drift(self);
            out.push(PropertyCheck {
                name: "mass conservation".into(),
                passed: per_step <= 1e-12 && whole <= 1e-9,
                detail: format!("max per-step {per_step:.3e}, whole run {whole:.3e}"),
            });
        }
        let min_c = self
            .steps
            .iter()
            .map(|s| s.min_concentration)
            .fold(self.initial_state.min_concentration(), f64::min);
        out.push(PropertyCheck {
            name: "positivity".into(),
            passed: min_c >= POSITIVITY_FLOOR,
            detail: format!("min concentration {min_c:.6e}"),
        });
        let max_div = self.steps.iter().map(|s| s.max_divergence).fold(0.0_f64, f64::max);
        out.push(PropertyCheck {
            name: "incompressibility".into(),
            passed: max_div <= 1e-10,
            detail: format!("max |div u| {max_div:.3e}"),
        });
        if decaying {
            let dist = self.final_relative_distance();
            let ke = self.final_kinetic_energy();
            let worst = dist.iter().cloned().fold(0.0_f64, f64::max);
            out.push(PropertyCheck {
                name: "convergence to Boltzmann state".into(),
                passed: worst <= 1e-4 && ke <= 1e-10,
                detail: format!("max relative L2 distance {worst:.3e}, kinetic energy {ke:.3e}"),
            });
        } else {
            let times: Vec<f64> = self.reports.iter().map(|r| r.time).collect();
            let values: Vec<f64> = self
                .reports
                .iter()
                .map(|r| r.modified_energy.unwrap_or(f64::NAN))
                .collect();
            let (passed, detail) = match gronwall_check(&times, &values, 0.1) {
                Ok(g) => (
                    g.passed && self.rejected_steps * 10 <= self.steps.len().max(1),
                    format!("fitted C = {:.4e}, smallest envelope margin {:.3e}", g.c, g.min_margin),
                ),
                Err(e) => (false, e.to_string()),
            };
            out.push(PropertyCheck {
                name: "modified energy growth bound".into(),
                passed,
                detail,
            });
        }
        out
    }
}
