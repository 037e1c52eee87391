//! The energy measured against two different Boltzmann references differs by a
//! constant along a blocking run, since the masses do not move.

use npns::diagnostics::{reference_invariance_check, DECAY_TOL};
use npns::elliptic::{solve_pb, NewtonConfig, PbProblem, PbSpecies};
use npns::scenario::{preset, run_simulation, RunOptions};

fn main() -> npns::Result<()> {
    let mut cfg = preset("blocking-relax")?;
    cfg.grid.nx = 32;
    cfg.grid.ny = 32;
    cfg.run.t_end = 0.5;
    cfg.run.output_every = 5;
    let out = run_simulation(
        &cfg,
        &RunOptions {
            out_dir: None,
            keep_states: true,
        },
    )?;
    let ref_a = &out.reference;
    let doubled = out
        .model
        .species
        .iter()
        .zip(&ref_a.z_const)
        .map(|(s, z)| PbSpecies::fixed_z(s.z, 2.0 * z))
        .collect();
    let ref_b = solve_pb(
        &PbProblem::new(out.model.params.eps, out.model.boundary.clone(), doubled)?,
        &NewtonConfig::default(),
    )?;
    let r = reference_invariance_check(&out.states, ref_a, &ref_b, &out.model, DECAY_TOL)?;
    println!("Z_A = {:?}", ref_a.z_const);
    println!("Z_B = {:?}", ref_b.z_const);
    println!("E_A - E_B at t = 0: {:.12e}", r.differences[0]);
    println!("closed form:        {:.12e}", r.predicted);
    println!("relative drift over {} snapshots: {:.2e}", r.differences.len(), r.relative_drift);
    Ok(())
}
