//! Selective walls with a varying applied potential: no decay, only bounded growth.
//!
//! Prints the modified energy against the Gronwall envelope fitted on the first 10%
//! of the run.

use npns::diagnostics::gronwall_check;
use npns::scenario::{preset, run_simulation, RunOptions};

fn main() -> npns::Result<()> {
    let cfg = preset("general-selective-patterned")?;
    let out = run_simulation(&cfg, &RunOptions::default())?;
    let times: Vec<f64> = out.reports.iter().map(|r| r.time).collect();
    let f: Vec<f64> = out.reports.iter().map(|r| r.modified_energy.unwrap_or(f64::NAN)).collect();
    let g = gronwall_check(&times, &f, 0.1)?;
    println!("fitted C = {:.4e}", g.c);
    println!("{:>8} {:>14} {:>14}", "t", "F + C", "envelope");
    let every = (times.len() / 15).max(1);
    for k in (0..times.len()).step_by(every) {
        let env = (f[0] + g.c) * (g.c * (times[k] - times[0])).exp();
        println!("{:>8.4} {:>14.6e} {:>14.6e}", times[k], f[k] + g.c, env);
    }
    for check in out.property_checks() {
        println!("{check}");
    }
    Ok(())
}
