//! One species pinned on a wall where the applied potential is constant.
//!
//! The energy is still a Lyapunov functional, with the pinned species' reference
//! constant fixed by the wall data: `Z = 1 / (γ e^{z w})`.

use npns::scenario::{preset, run_simulation, RunOptions};

fn main() -> npns::Result<()> {
    let cfg = preset("uniform-selective-channel")?;
    let out = run_simulation(&cfg, &RunOptions::default())?;
    for (sp, z) in out.model.species.iter().zip(&out.target.z_const) {
        let kind = if sp.is_blocking() { "blocking" } else { "pinned" };
        println!("{:>8} ({kind}): Z = {z:.6e}", sp.name);
    }
    let first = &out.reports[0];
    let last = out.reports.last().expect("at least the initial report");
    println!(
        "masses {:?} -> {:?}",
        first.masses.iter().map(|m| format!("{m:.6}")).collect::<Vec<_>>(),
        last.masses.iter().map(|m| format!("{m:.6}")).collect::<Vec<_>>()
    );
    println!("energy {:.6e} -> {:.6e}", first.total_energy, last.total_energy);
    for check in out.property_checks() {
        println!("{check}");
    }
    Ok(())
}
