use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising_exact::{exact_rho_with, IsingSpectra};
use crate::metrics::{self, short_time_fit, DecoherenceReport};
use crate::propagate::{
    lindblad_oracle, nonmarkov_oracle, run_ensemble, EnsembleOptions, InitialState, CONVENTION_TAG,
};
use crate::qcore::DensityMatrix;

use super::config::{EngineKind, ModelConfig, Observable, RunConfig};

/// One observable on the output grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub value: Vec<f64>,
    /// Per-point standard error; `None` for deterministic engines.
    pub stderr: Option<Vec<f64>>,
}

/// In-memory result of a run, before anything is written.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    pub times: Vec<f64>,
    pub curves: BTreeMap<Observable, Curve>,
    /// Density matrices at the output times, kept only when `rho_dump` is requested.
    pub states: Option<Vec<DensityMatrix>>,
    pub report: DecoherenceReport,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn is_stochastic(&self) -> bool {
        self.config.engine == EngineKind::Trajectories
    }
}

/// Everything needed to regenerate the CSVs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub master_seed: Option<u64>,
    pub n_trajectories: Option<usize>,
    pub version: String,
    pub convention: String,
    pub wall_time_seconds: f64,
    pub workers: usize,
    pub report: DecoherenceReport,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

/// Runs the configured engine. `base_dir` resolves relative paths in the
/// config; `workers` only affects speed, never the numbers.
pub fn execute(config: &RunConfig, base_dir: &Path, workers: usize) -> Result<RunOutput> {
    config.validate()?;
    let grid = config.grid()?;
    let model = config.build_model()?;
    let psi0 = config.initial_state(base_dir, model.dim())?;
    let rho0 = psi0.projector();
    let mut warnings = Vec::new();

    let (times, states, fid_se, pur_se, fid_direct) = match config.engine {
        EngineKind::Trajectories => {
            let t = config.trajectories.expect("validated");
            let options = EnsembleOptions {
                n_trajectories: t.m,
                master_seed: t.master_seed,
                output_stride: config.output_stride,
                workers,
                purity_stderr: t.purity_stderr && config.observables.contains(&Observable::Purity),
            };
            let res = run_ensemble(&model, &InitialState::Pure(psi0.clone()), &grid, &options)?;
            (res.times, res.rho_avg, Some(res.fidelity_stderr), res.purity_stderr, Some(res.fidelity))
        }
        EngineKind::Lindblad => {
            let s = lindblad_oracle(&model, &rho0, &grid, config.output_stride)?;
            (s.times, s.states, None, None, None)
        }
        EngineKind::Nonmarkov => {
            let sol = nonmarkov_oracle(&model, &rho0, &grid, config.output_stride)?;
            warnings.extend(sol.warnings);
            (sol.series.times, sol.series.states, None, None, None)
        }
        EngineKind::IsingExact => {
            let spec = config.ising_spec()?.ok_or_else(|| {
                Error::Config("engine \"ising_exact\" needs the ising preset".into())
            })?;
            if !config.noise.kind.is_white() {
                return Err(Error::Config("engine \"ising_exact\" needs white noise".into()));
            }
            let spectra = IsingSpectra::new(&spec)?;
            let gamma = config.noise.amplitudes().0;
            let idx = grid.output_indices(config.output_stride);
            let times: Vec<f64> = idx.iter().map(|&j| grid.time(j)).collect();
            let states = times.iter().map(|&t| exact_rho_with(&spectra, &rho0, gamma, t)).collect();
            (times, states, None, None, None)
        }
    };

    let fidelity = match fid_direct {
        Some(f) => f,
        None => states.iter().map(|r| metrics::fidelity(r, &psi0)).collect::<Result<Vec<_>>>()?,
    };
    let mut curves = BTreeMap::new();
    for obs in &config.observables {
        match obs {
            Observable::Fidelity => {
                curves.insert(*obs, Curve { value: fidelity.clone(), stderr: fid_se.clone() });
            }
            Observable::Purity => {
                let value = states.iter().map(metrics::purity).collect();
                curves.insert(*obs, Curve { value, stderr: pur_se.clone() });
            }
            Observable::RhoDump => {}
        }
    }

    let mut report = DecoherenceReport::for_model(&model, &psi0)?;
    report.n = config.n_spins();
    report.k = match &config.model {
        ModelConfig::Ising { .. } => Some(2),
        ModelConfig::Kbody { kernel, .. } => Some(kernel.len()),
        ModelConfig::DigitalKbody { k, .. } => Some(*k),
        ModelConfig::BoseHubbard { .. } => None,
    };
    if report.tau_d_variance.is_finite() {
        match short_time_fit(&times, &fidelity, 0.05 * report.tau_d_variance) {
            Ok(fit) => report.tau_d_fitted = Some(fit.tau_d_fitted),
            Err(e) => warnings.push(format!("short-time fit skipped: {e}")),
        }
    }

    let keep_states = config.observables.contains(&Observable::RhoDump);
    Ok(RunOutput {
        config: config.clone(),
        times,
        curves,
        states: keep_states.then_some(states),
        report,
        warnings,
    })
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn observable_file(obs: Observable) -> &'static str {
    match obs {
        Observable::Fidelity => "fidelity.csv",
        Observable::Purity => "purity.csv",
        Observable::RhoDump => "rho_dump.csv",
    }
}

/// `t,value,stderr` rows; the stderr column is empty when there is none or it is undefined.
pub fn curve_csv(times: &[f64], curve: &Curve) -> String {
    let mut out = String::from("t,value,stderr\n");
    for (i, (&t, &v)) in times.iter().zip(&curve.value).enumerate() {
        let se = match &curve.stderr {
            Some(se) if se[i].is_finite() => fmt_f64(se[i]),
            _ => String::new(),
        };
        writeln!(out, "{},{},{}", fmt_f64(t), fmt_f64(v), se).expect("string write");
    }
    out
}

pub fn rho_csv(times: &[f64], states: &[DensityMatrix]) -> String {
    let mut out = String::from("t,row,col,re,im\n");
    for (&t, rho) in times.iter().zip(states) {
        let m = rho.matrix();
        let ts = fmt_f64(t);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                writeln!(out, "{ts},{r},{c},{},{}", fmt_f64(z.re), fmt_f64(z.im)).expect("string write");
            }
        }
    }
    out
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the CSVs and `manifest.json` into `out_dir`.
pub fn write_bundle(out_dir: &Path, output: &RunOutput, wall_time_seconds: f64, workers: usize) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for (obs, curve) in &output.curves {
        let name = observable_file(*obs);
        write_atomic(&out_dir.join(name), curve_csv(&output.times, curve).as_bytes())?;
        files.push(name.to_string());
    }
    if let Some(states) = &output.states {
        let name = observable_file(Observable::RhoDump);
        write_atomic(&out_dir.join(name), rho_csv(&output.times, states).as_bytes())?;
        files.push(name.to_string());
    }
    let t = output.config.trajectories.filter(|_| output.is_stochastic());
    let manifest = Manifest {
        config: output.config.clone(),
        master_seed: t.map(|t| t.master_seed),
        n_trajectories: t.map(|t| t.m),
        version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        convention: CONVENTION_TAG.to_string(),
        wall_time_seconds,
        workers,
        report: output.report.clone(),
        warnings: output.warnings.clone(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out_dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

/// `execute` followed by `write_bundle`, timing the computation.
pub fn run_to_dir(config: &RunConfig, base_dir: &Path, out_dir: &Path, workers: usize) -> Result<(RunOutput, Manifest)> {
    let start = Instant::now();
    let output = execute(config, base_dir, workers)?;
    let manifest = write_bundle(out_dir, &output, start.elapsed().as_secs_f64(), workers)?;
    Ok((output, manifest))
}
