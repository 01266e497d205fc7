//! Config-driven runner behind the `noisesim` binary.

pub mod compare;
pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::metrics::{scaling_study, StateFamily};
use crate::noise::{check_autocorrelation, check_white, KernelSpec, StreamSeed};

pub use compare::{compare, CompareReport};
pub use config::{EngineKind, Observable, RunConfig};
pub use run::{execute, run_to_dir, Manifest, RunOutput};

pub const EXIT_OK: i32 = 0;
/// A comparison or statistical check ran but did not pass.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "noisesim", version, about = "Stochastic-Hamiltonian open-system simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Overrides {
    /// Overrides `trajectories.master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for trajectory ensembles (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Overrides the configured engine.
    #[arg(long, value_enum)]
    pub engine: Option<EngineKind>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one configuration and write CSV curves plus manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run two configurations and report deviations per observable.
    Compare {
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        config: Vec<PathBuf>,
        /// Absolute tolerance for deterministic runs; defaults to the first
        /// config's `tolerance` or 1e-6.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Also write both bundles and report.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit the exponent of 1/tau_D against N for a Pauli-string kernel.
    Scaling {
        #[arg(long, default_value = "zz")]
        kernel: String,
        #[arg(long, value_enum, default_value = "product")]
        family: FamilyArg,
        #[arg(long = "n", value_delimiter = ',', default_values_t = [6usize, 8, 10, 12])]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical checks of the white and Ornstein-Uhlenbeck generators.
    NoiseCheck {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        tau_c: f64,
        #[arg(long, default_value_t = 400)]
        paths: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Lags in grid steps.
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 5, 20, 50])]
        lags: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FamilyArg {
    Product,
    MaxDecoherence,
}

impl From<FamilyArg> for StateFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Product => StateFamily::Product,
            FamilyArg::MaxDecoherence => StateFamily::MaxDecoherence,
        }
    }
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) | Error::Trajectory { .. } | Error::Fit(_) | Error::Io(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, base) = RunConfig::from_file(path)?;
    if let Some(engine) = overrides.engine {
        cfg.engine = engine;
    }
    if let Some(seed) = overrides.seed {
        match cfg.trajectories.as_mut() {
            Some(t) => t.master_seed = seed,
            None => return Err(Error::Config("--seed given but the config has no trajectories section".into())),
        }
    }
    cfg.validate()?;
    Ok((cfg, base))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run { config, out, overrides } => {
            let (cfg, base) = load(&config, &overrides)?;
            let (_, manifest) = run_to_dir(&cfg, &base, &out, overrides.workers)?;
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} to {} in {:.3} s", manifest.files.join(", "), out.display(), manifest.wall_time_seconds);
            Ok(EXIT_OK)
        }
        Command::Compare { config, tolerance, out, overrides } => {
            let (cfg_a, base_a) = load(&config[0], &overrides)?;
            let (cfg_b, base_b) = load(&config[1], &overrides)?;
            let tol = tolerance.or(cfg_a.tolerance).unwrap_or(compare::DEFAULT_TOLERANCE);
            let (a, b) = match &out {
                Some(dir) => (
                    run_to_dir(&cfg_a, &base_a, &dir.join("a"), overrides.workers)?.0,
                    run_to_dir(&cfg_b, &base_b, &dir.join("b"), overrides.workers)?.0,
                ),
                None => (execute(&cfg_a, &base_a, overrides.workers)?, execute(&cfg_b, &base_b, overrides.workers)?),
            };
            let report = compare(&a, &b, tol)?;
            for (obs, d) in &report.observables {
                let z = match (d.z_fraction, d.max_abs_z) {
                    (Some(f), Some(z)) => format!(" |z|<=3 at {:.2}% max|z|={z:.3}", 100.0 * f),
                    _ => String::new(),
                };
                println!(
                    "{obs:?}: max={:e} rms={:e}{z} {}",
                    d.max_abs,
                    d.rms,
                    if d.pass { "PASS" } else { "FAIL" }
                );
            }
            if let Some(dir) = &out {
                let json = serde_json::to_string_pretty(&report).expect("report serializes");
                run::write_atomic(&dir.join("report.json"), json.as_bytes())?;
            }
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
            Ok(if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Scaling { kernel, family, n_values, gamma, out } => {
            let axes = config::parse_pauli_string(&kernel)?;
            let res = scaling_study(&axes, &n_values, family.into(), gamma)?;
            println!("N,inverse_tau");
            for (n, v) in res.n_values.iter().zip(&res.inverse_tau) {
                println!("{n},{}", run::fmt_f64(*v));
            }
            println!("exponent = {:.6}, intercept = {:.6}", res.exponent, res.intercept);
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&res).expect("result serializes");
                run::write_atomic(&path, json.as_bytes())?;
            }
            Ok(EXIT_OK)
        }
        Command::NoiseCheck { samples, dt, seed, tau_c, paths, steps, lags, out } => {
            let white = check_white(samples, dt, StreamSeed::new(seed, 0))?;
            let white_ok = white.passes(5.0);
            println!(
                "white: n={} z_mean={:.3} z_variance={:.3} {}",
                white.n_samples,
                white.z_mean,
                white.z_variance,
                if white_ok { "PASS" } else { "FAIL" }
            );
            let kernel = KernelSpec::OrnsteinUhlenbeck { tau_c };
            let grid = TimeGrid::new(dt, steps)?;
            let lag_checks = check_autocorrelation(&kernel, &grid, paths, &lags, seed)?;
            let mut ou_ok = true;
            for c in &lag_checks {
                let ok = c.z().abs() <= 3.0;
                ou_ok &= ok;
                println!(
                    "ou: lag={} expected={:.6} estimate={:.6} z={:.3} {}",
                    c.lag,
                    c.expected,
                    c.estimate,
                    c.z(),
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            if let Some(path) = out {
                let json = serde_json::json!({ "white": white, "ornstein_uhlenbeck": lag_checks });
                run::write_atomic(&path, serde_json::to_string_pretty(&json).expect("json").as_bytes())?;
            }
            Ok(if white_ok && ou_ok { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}
