//! The work behind each `npns` subcommand. Each returns whether every check passed.

use std::path::Path;

use super::config::ScenarioConfig;
use super::io::save_snapshot;
use super::presets::preset;
use super::run::{run_simulation, PropertyCheck, RunOptions};
use crate::elliptic::{pb_residual, solve_pb_1d, solve_pb_detailed, NewtonConfig, Pb1dProblem};
use crate::error::{NpnsError, Result};
use crate::fields::compute_charge_density;
use crate::state::{FlowState, SimulationState};

/// Loads a scenario from a file, or from the shipped presets if no such file exists.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() {
        ScenarioConfig::load(path)
    } else {
        preset(arg)
    }
}

fn print_checks(checks: &[PropertyCheck]) -> bool {
    for c in checks {
        println!("{c}");
    }
    checks.iter().all(|c| c.passed)
}

pub fn run_command(config: &str, out: Option<&Path>, check_properties: bool) -> Result<bool> {
    let cfg = load_scenario(config)?;
    let outcome = run_simulation(
        &cfg,
        &RunOptions {
            out_dir: out.map(Path::to_path_buf),
            keep_states: false,
        },
    )?;
    println!(
        "{}: {} steps to t = {} in {:.2?} ({} rejected)",
        cfg.name.as_deref().unwrap_or(config),
        outcome.steps.len(),
        outcome.final_state.t,
        outcome.wall_time,
        outcome.rejected_steps
    );
    if let Some(last) = outcome.reports.last() {
        println!("final total energy {:.9e}, kinetic {:.3e}", last.total_energy, last.kinetic);
    }
    if let Some(a) = &outcome.artifacts {
        println!("time series: {}", a.timeseries.display());
    }
    if check_properties {
        Ok(print_checks(&outcome.property_checks()))
    } else {
        Ok(true)
    }
}

pub fn pb_command(config: &str, out: Option<&Path>) -> Result<bool> {
    let cfg = load_scenario(config)?;
    let model = cfg.model()?;
    let initial = cfg.initial_state(&model)?;
    let prob = cfg.target_pb_problem(&model, &initial)?;
    let sol = solve_pb_detailed(&prob, &NewtonConfig::default())?;
    let st = &sol.state;
    let residual = pb_residual(&st.phi_star, &prob)?.max_abs();
    println!(
        "Newton iterations {}, gradient steps {}, final residual {:.3e}",
        sol.newton_iterations, sol.gradient_steps, residual
    );
    println!(
        "max |phi*| {:.9e}, min phi* {:.9e}, max phi* {:.9e}",
        st.phi_star.max_abs(),
        st.phi_star.min(),
        st.phi_star.max()
    );
    for ((sp, z), m) in model.species.iter().zip(&st.z_const).zip(st.masses()) {
        println!("{}: z = {}, Z = {:.12e}, mass = {:.12e}", sp.name, sp.z, z, m);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("boltzmann.npns");
        save_snapshot(
            &path,
            &SimulationState {
                c: st.c_star.clone(),
                phi: st.phi_star.clone(),
                flow: FlowState::at_rest(model.grid),
                t: 0.0,
            },
        )?;
        println!("wrote {}", path.display());
    }
    let rho = compute_charge_density(&st.c_star, &model.species)?;
    Ok(residual <= NewtonConfig::default().residual_tol * (1.0 + rho.max_abs())
        && st.c_star.iter().all(|c| c.min() > 0.0))
}

/// Parses `z:Z,z:Z,...`.
pub fn parse_species_list(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(|item| {
            let (z, zc) = item
                .split_once(':')
                .ok_or_else(|| NpnsError::Config(format!("species entry {item:?} is not z:Z")))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| NpnsError::Config(format!("bad number {t:?} in {item:?}")))
            };
            Ok((parse(z)?, parse(zc)?))
        })
        .collect()
}

pub fn pb1d_command(eps: f64, height: f64, w: f64, species: &str, samples: usize) -> Result<bool> {
    let prob = Pb1dProblem {
        eps,
        h_len: height,
        w_val: w,
        species: parse_species_list(species)?,
    };
    let profile = solve_pb_1d(&prob, samples)?;
    println!("y,phi");
    for (y, phi) in profile {
        println!("{y},{phi}");
    }
    Ok(true)
}

pub fn verify_command(config: &str) -> Result<bool> {
    let cfg = load_scenario(config)?;
    let outcome = run_simulation(&cfg, &RunOptions::default())?;
    println!(
        "{}: {} steps to t = {} in {:.2?}",
        cfg.name.as_deref().unwrap_or(config),
        outcome.steps.len(),
        outcome.final_state.t,
        outcome.wall_time
    );
    Ok(print_checks(&outcome.property_checks()))
}
