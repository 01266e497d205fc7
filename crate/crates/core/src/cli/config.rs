use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ising_exact::{dicke, special_states};
use crate::models::{
    bose_hubbard_model, digital_kbody_model, ising_model, BoseHubbardSpec, IsingSpec, KBodySpec,
};
use crate::noise::NoiseSpec;
use crate::propagate::{Channel, StochasticModel};
use crate::qcore::{CVector, PauliAxis, StateVector, C64};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Power-law chain `J_ij = j |i - j|^{-a}` unless `couplings` is given.
    Ising {
        n_spins: usize,
        #[serde(default)]
        j: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        field: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        couplings: Option<Vec<Vec<f64>>>,
    },
    BoseHubbard { n_sites: usize, n_max: usize, j_hop: f64, u: f64 },
    /// `H_T = coupling L` with `L` the symmetrized k-body operator of a Pauli
    /// string kernel such as `"zz"`.
    Kbody { n_particles: usize, kernel: String, #[serde(default)] coupling: f64 },
    DigitalKbody { k: usize, g: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    ProductPlus,
    MaxDecoherence,
    Cat,
    Dicke { p: usize },
    Basis { index: usize },
    /// Bose-Hubbard occupations, one per site.
    Fock { occupations: Vec<usize> },
    /// Text file with one `re im` pair per line; relative paths resolve
    /// against the config file's directory.
    Custom { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EngineKind {
    Trajectories,
    Lindblad,
    Nonmarkov,
    IsingExact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub m: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub purity_stderr: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Fidelity,
    Purity,
    RhoDump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub model: ModelConfig,
    pub noise: NoiseSpec,
    pub initial_state: InitialStateConfig,
    pub t_max: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub output_stride: usize,
    pub engine: EngineKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectoryConfig>,
    pub observables: Vec<Observable>,
    /// Absolute tolerance used by `compare` for deterministic engines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn one() -> usize {
    1
}

impl RunConfig {
    /// Parses JSON, reporting syntax and schema errors with line and column.
    /// Semantic errors are anchored at the line of the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if let Err((key, msg)) = cfg.check() {
            return Err(Error::Config(match locate_key(text, key) {
                Some(line) => format!("line {line}: {msg}"),
                None => msg,
            }));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, msg)| Error::Config(msg))
    }

    /// Returns the offending top-level key with the message.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.schema != SCHEMA_VERSION {
            return Err(("schema", format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(("dt", format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(("t_max", format!("t_max = {} must be at least dt = {}", self.t_max, self.dt)));
        }
        if self.output_stride == 0 {
            return Err(("output_stride", "output_stride must be at least 1".into()));
        }
        if self.observables.is_empty() {
            return Err(("observables", "observables must not be empty".into()));
        }
        if let Some(t) = self.trajectories {
            if t.m == 0 {
                return Err(("trajectories", "trajectories.m must be at least 1".into()));
            }
        }
        if self.engine == EngineKind::Trajectories && self.trajectories.is_none() {
            return Err((
                "engine",
                "engine \"trajectories\" needs a \"trajectories\" section with m and master_seed".into(),
            ));
        }
        if let Some(tol) = self.tolerance {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(("tolerance", format!("tolerance must be >= 0, got {tol}")));
            }
        }
        self.noise.validate().map_err(|e| ("noise", format!("noise: {e}")))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::covering(self.t_max, self.dt).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn n_spins(&self) -> Option<usize> {
        match &self.model {
            ModelConfig::Ising { n_spins, .. } => Some(*n_spins),
            ModelConfig::Kbody { n_particles, .. } => Some(*n_particles),
            ModelConfig::DigitalKbody { k, .. } => Some(*k),
            ModelConfig::BoseHubbard { .. } => None,
        }
    }

    pub fn ising_spec(&self) -> Result<Option<IsingSpec>> {
        match &self.model {
            ModelConfig::Ising { n_spins, j, a, field, couplings } => Ok(Some(match couplings {
                Some(c) => {
                    let spec = IsingSpec { n_spins: *n_spins, couplings: c.clone(), field: *field };
                    spec.validate()?;
                    spec
                }
                None => IsingSpec::power_law(*n_spins, *j, *a, *field)?,
            })),
            _ => Ok(None),
        }
    }

    pub fn kbody_spec(&self) -> Result<Option<KBodySpec>> {
        match &self.model {
            ModelConfig::Kbody { n_particles, kernel, .. } => {
                Ok(Some(KBodySpec::pauli_string(*n_particles, &parse_pauli_string(kernel)?)?))
            }
            _ => Ok(None),
        }
    }

    pub fn build_model(&self) -> Result<StochasticModel> {
        let noise = self.noise.clone();
        match &self.model {
            ModelConfig::Ising { .. } => ising_model(&self.ising_spec()?.expect("ising preset"), noise),
            ModelConfig::BoseHubbard { n_sites, n_max, j_hop, u } => bose_hubbard_model(
                &BoseHubbardSpec { n_sites: *n_sites, n_max: *n_max, j_hop: *j_hop, u: *u },
                noise,
            ),
            ModelConfig::Kbody { coupling, .. } => {
                let l = crate::models::build_kbody(&self.kbody_spec()?.expect("kbody preset"))?;
                StochasticModel::new(&l * *coupling, vec![Channel::new(l, noise)?])
            }
            ModelConfig::DigitalKbody { k, g } => digital_kbody_model(*k, *g, noise),
        }
    }

    pub fn initial_state(&self, base_dir: &Path, dim: usize) -> Result<StateVector> {
        let spins = || {
            self.n_spins().ok_or_else(|| {
                Error::Config("this initial state needs a spin model".into())
            })
        };
        let state = match &self.initial_state {
            InitialStateConfig::ProductPlus => special_states(spins()?)?.product_plus,
            InitialStateConfig::MaxDecoherence => special_states(spins()?)?.max_decoherence,
            InitialStateConfig::Cat => special_states(spins()?)?.cat,
            InitialStateConfig::Dicke { p } => dicke(spins()?, *p)?,
            InitialStateConfig::Basis { index } => StateVector::basis(dim, *index)?,
            InitialStateConfig::Fock { occupations } => {
                let ModelConfig::BoseHubbard { n_sites, n_max, .. } = &self.model else {
                    return Err(Error::Config("fock states need the bose_hubbard preset".into()));
                };
                if occupations.len() != *n_sites || occupations.iter().any(|&n| n > *n_max) {
                    return Err(Error::Config(format!(
                        "fock occupations must list {n_sites} values in 0..={n_max}"
                    )));
                }
                let index = occupations.iter().fold(0, |acc, &n| acc * (n_max + 1) + n);
                StateVector::basis(dim, index)?
            }
            InitialStateConfig::Custom { path } => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                read_amplitudes(&full)?
            }
        };
        if state.dim() != dim {
            return Err(Error::Config(format!("initial state has dimension {}, model has {dim}", state.dim())));
        }
        Ok(state)
    }
}

/// 1-based line of the first occurrence of `"key"`.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Parses strings like `"zz"` or `"zxx"` into Pauli axes.
pub fn parse_pauli_string(s: &str) -> Result<Vec<PauliAxis>> {
    if s.is_empty() {
        return Err(Error::Config("empty Pauli string".into()));
    }
    s.chars()
        .map(|c| match c.to_ascii_lowercase() {
            'x' => Ok(PauliAxis::X),
            'y' => Ok(PauliAxis::Y),
            'z' => Ok(PauliAxis::Z),
            other => Err(Error::Config(format!("unknown Pauli axis '{other}'"))),
        })
        .collect()
}

/// One `re im` pair per non-empty line; the vector is normalized.
pub fn read_amplitudes(path: &Path) -> Result<StateVector> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut amps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("{} line {}: {e}", path.display(), i + 1)))
        };
        match cols.as_slice() {
            [re] => amps.push(C64::new(parse(re)?, 0.0)),
            [re, im] => amps.push(C64::new(parse(re)?, parse(im)?)),
            _ => return Err(Error::Config(format!("{} line {}: expected `re im`", path.display(), i + 1))),
        }
    }
    StateVector::normalize(CVector::from_vec(amps))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
  "schema": 1,
  "model": {"preset": "ising", "n_spins": 3, "j": 5.0, "a": 0.0},
  "noise": {"kind": "real_white", "gamma": 0.2},
  "initial_state": {"kind": "product_plus"},
  "t_max": 1.0,
  "dt": 0.01,
  "output_stride": 10,
  "engine": "trajectories",
  "trajectories": {"m": 10, "master_seed": 4},
  "observables": ["fidelity", "purity"]
}"#;

    #[test]
    fn round_trip() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_carry_position() {
        let broken = SAMPLE.replace("\"dt\": 0.01", "\"dt\": oops");
        let err = RunConfig::from_json(&broken).unwrap_err().to_string();
        assert!(err.contains("line 7"), "{err}");
        let unknown = SAMPLE.replace("\"a\": 0.0", "\"a\": 0.0, \"b\": 1");
        assert!(RunConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn semantic_checks() {
        let neg = SAMPLE.replace("\"dt\": 0.01", "\"dt\": -0.01");
        let err = RunConfig::from_json(&neg).unwrap_err().to_string();
        assert!(err.contains("line 7"), "{err}");
        let short = SAMPLE.replace("\"t_max\": 1.0", "\"t_max\": 0.001");
        assert!(matches!(RunConfig::from_json(&short), Err(Error::Config(_))));
        let no_m = SAMPLE.replace("\"m\": 10", "\"m\": 0");
        assert!(matches!(RunConfig::from_json(&no_m), Err(Error::Config(_))));
    }
}
