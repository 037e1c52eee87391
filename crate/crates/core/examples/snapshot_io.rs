//! Writing and reading back the binary snapshot and CSV time-series formats.

use npns::scenario::io::{emit_timeseries, read_timeseries};
use npns::scenario::{load_snapshot, preset, run_simulation, save_snapshot, RunOptions};

fn main() -> npns::Result<()> {
    let mut cfg = preset("blocking-relax")?;
    cfg.grid.nx = 16;
    cfg.grid.ny = 16;
    cfg.run.t_end = 0.05;
    let out = run_simulation(&cfg, &RunOptions::default())?;

    let dir = std::env::temp_dir().join(format!("npns-snapshot-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("final.npns");
    save_snapshot(&path, &out.final_state)?;
    let back = load_snapshot(&path)?;
    println!(
        "snapshot {} ({} bytes): identical = {}",
        path.display(),
        std::fs::metadata(&path)?.len(),
        back == out.final_state
    );

    let n_species = out.model.species.len();
    let csv = emit_timeseries(Vec::new(), n_species, &out.rows)?;
    let rows = read_timeseries(csv.as_slice())?;
    println!("{} time-series rows, identical = {}", rows.len(), rows == out.rows);
    print!("{}", String::from_utf8_lossy(&csv).lines().next().unwrap_or_default());
    println!();
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
