//! Relaxation of two blocking species to their Boltzmann state.
//!
//! ```text
//! cargo run --release --example blocking_relaxation -- [out_dir]
//! ```
//!
//! Runs the `blocking-relax` preset, prints a thinned energy table and the property
//! checks, and writes the time series and snapshots when an output directory is given.

use npns::scenario::{preset, run_simulation, RunOptions};

fn main() -> npns::Result<()> {
    let cfg = preset("blocking-relax")?;
    let opts = RunOptions {
        out_dir: std::env::args().nth(1).map(Into::into),
        keep_states: false,
    };
    let out = run_simulation(&cfg, &opts)?;

    println!("{:>8} {:>14} {:>12} {:>12} {:>12}", "t", "energy", "dissipation", "kinetic", "max dist");
    let every = (out.rows.len() / 12).max(1);
    for row in out.rows.iter().step_by(every).chain(out.rows.last()) {
        println!(
            "{:>8.4} {:>14.8e} {:>12.4e} {:>12.4e} {:>12.4e}",
            row.t,
            row.total_energy,
            row.dissipation,
            row.kinetic,
            row.dist_l2.iter().cloned().fold(0.0_f64, f64::max)
        );
    }
    println!("{} steps in {:.1?}", out.steps.len(), out.wall_time);
    for check in out.property_checks() {
        println!("{check}");
    }
    if let Some(a) = &out.artifacts {
        println!("time series written to {}", a.timeseries.display());
    }
    Ok(())
}
