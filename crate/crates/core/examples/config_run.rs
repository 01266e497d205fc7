//! Drives the runner from a JSON configuration and writes a reproducible
//! output bundle; the `noisesim` binary does the same from the command line.
//!
//! cargo run --example config_run [out_dir]

use std::path::{Path, PathBuf};

use noisesim::cli::{compare, execute, run_to_dir, EngineKind, RunConfig};

const CONFIG: &str = r#"{
  "schema": 1,
  "model": {"preset": "ising", "n_spins": 3, "j": 5.0, "a": 0.0},
  "noise": {"kind": "real_white", "gamma": 0.2},
  "initial_state": {"kind": "product_plus"},
  "t_max": 5.0,
  "dt": 0.001,
  "output_stride": 100,
  "engine": "trajectories",
  "trajectories": {"m": 2000, "master_seed": 2024, "purity_stderr": true},
  "observables": ["fidelity", "purity"]
}"#;

fn main() -> noisesim::error::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("noisesim_run"));
    let cfg = RunConfig::from_json(CONFIG)?;
    let (traj, manifest) = run_to_dir(&cfg, Path::new("."), &out, 0)?;
    println!("wrote {:?} to {} ({:.2} s)", manifest.files, out.display(), manifest.wall_time_seconds);
    println!("tau_D from variance {:.4}, fitted {:?}", manifest.report.tau_d_variance, manifest.report.tau_d_fitted);
    for w in &manifest.warnings {
        println!("warning: {w}");
    }

    let mut exact_cfg = cfg.clone();
    exact_cfg.engine = EngineKind::IsingExact;
    let exact = execute(&exact_cfg, Path::new("."), 0)?;
    let report = compare(&traj, &exact, 1e-6)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));

    match RunConfig::from_json(&CONFIG.replace("\"dt\": 0.001", "\"dt\": 0")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
