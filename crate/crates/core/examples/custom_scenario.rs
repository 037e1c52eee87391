//! Building a scenario from TOML text instead of a preset.

use npns::scenario::{run_simulation, RunOptions, ScenarioConfig};

const SCENARIO: &str = r#"
name = "divalent-small"
boundary_regime = "blocking"

[grid]
nx = 24
ny = 24

[params]
eps = 0.02

[[species]]
name = "calcium"
z = 2
d = 0.8
regime = "blocking"
initial = "1 + 0.4*sin(pi*x)*sin(pi*y)"

[[species]]
name = "chloride"
z = -1
d = 1.0
regime = "blocking"
initial = 2.0

[boundary]
bottom = 0.0
top = 0.3
left = "0.3*y"
right = "0.3*y"

[run]
t_end = 1.0
dt_max = 5e-3
output_every = 40
"#;

fn main() -> npns::Result<()> {
    let cfg = ScenarioConfig::from_toml(SCENARIO)?;
    let out = run_simulation(&cfg, &RunOptions::default())?;
    for row in &out.rows {
        println!("t = {:.3}  E = {:.8e}  D = {:.3e}", row.t, row.total_energy, row.dissipation);
    }
    for check in out.property_checks() {
        println!("{check}");
    }
    Ok(())
}
