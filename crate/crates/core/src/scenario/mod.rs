//! Scenario files, the orchestration loop, file formats and the command-line front end.

pub mod cli;
pub mod config;
pub mod expr;
pub mod io;
pub mod presets;
pub mod run;

pub use config::{BoundaryRegime, ScenarioConfig};
pub use io::{load_snapshot, save_snapshot, TimeseriesRow};
pub use presets::{preset, preset_names};
pub use run::{run_simulation, PropertyCheck, RunArtifacts, RunOptions, RunOutcome};
