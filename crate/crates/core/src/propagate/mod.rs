//! Stochastic trajectories, ensemble averaging, and the two master-equation
//! oracles they are checked against.
//!
//! A channel `(L, eta)` enters the stochastic Hamiltonian as
//! `sqrt(gamma') eta' A + sqrt(gamma'') eta'' B` with `A = (L + L^dag)/2` and
//! `B = i(L - L^dag)/2`. The noise-averaged dynamics for white noise is
//! `D(rho) = -(gamma'/2)[A,[A,rho]] - (gamma''/2)[B,[B,rho]]`, which for a
//! Hermitian `L` driven by real noise is `-(gamma/2)[L,[L,rho]]`.

mod ensemble;
mod lindblad;
mod nonmarkov;
mod trajectory;

use std::fmt;
use std::sync::Arc;

pub use ensemble::{run_ensemble, EnsembleOptions, EnsembleResult, InitialState};
pub use lindblad::{
    dissipator, dissipator_lindblad_form, generator, lindblad_oracle, lindblad_oracle_with, oracle_step,
    DissipatorForm,
};
pub use nonmarkov::{nonmarkov_oracle, NonMarkovSolution};
pub use trajectory::{evolve_trajectory, sample_channel_noise, ChannelNoise};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::qcore::{CMatrix, DenseOperator, DensityMatrix, C64};

/// Tag recorded in run manifests for the dissipator normalization.
pub const CONVENTION_TAG: &str = "gamma-half-double-commutator";

/// Callback returning `H_T(t)`.
pub type HamiltonianFn = Arc<dyn Fn(f64) -> DenseOperator + Send + Sync>;

#[derive(Clone)]
pub enum Hamiltonian {
    Static(DenseOperator),
    /// Evaluated at step midpoints by the trajectory integrator and at stage
    /// times by the Lindblad oracle.
    TimeDependent { dim: usize, f: HamiltonianFn },
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hamiltonian::Static(h) => f.debug_tuple("Static").field(&h.dim()).finish(),
            Hamiltonian::TimeDependent { dim, .. } => f.debug_struct("TimeDependent").field("dim", dim).finish(),
        }
    }
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        match self {
            Hamiltonian::Static(h) => h.dim(),
            Hamiltonian::TimeDependent { dim, .. } => *dim,
        }
    }

    pub fn at(&self, t: f64) -> Result<DenseOperator> {
        match self {
            Hamiltonian::Static(h) => Ok(h.clone()),
            Hamiltonian::TimeDependent { dim, f } => {
                let h = f(t);
                if h.dim() != *dim {
                    return Err(Error::Dimension(format!(
                        "H_T({t}) has dimension {}, expected {dim}",
                        h.dim()
                    )));
                }
                h.require_hermitian("H_T(t)")?;
                Ok(h)
            }
        }
    }

    pub fn as_static(&self) -> Option<&DenseOperator> {
        match self {
            Hamiltonian::Static(h) => Some(h),
            Hamiltonian::TimeDependent { .. } => None,
        }
    }
}

/// One Lindblad operator with its driving noise.
#[derive(Clone, Debug)]
pub struct Channel {
    lindblad_op: DenseOperator,
    noise: NoiseSpec,
    a_op: DenseOperator,
    /// `None` when `L` is Hermitian, where `B` vanishes identically.
    b_op: Option<DenseOperator>,
}

impl Channel {
    pub fn new(lindblad_op: DenseOperator, noise: NoiseSpec) -> Result<Self> {
        noise.validate()?;
        let l = lindblad_op.matrix();
        let ld = l.adjoint();
        let half = C64::new(0.5, 0.0);
        let a_op = DenseOperator::new((l + &ld) * half)?;
        let b_op = if lindblad_op.is_hermitian() {
            None
        } else {
            Some(DenseOperator::new((l - &ld) * C64::new(0.0, 0.5))?)
        };
        a_op.require_hermitian("A = (L + L^dag)/2")?;
        if let Some(b) = &b_op {
            b.require_hermitian("B = i(L - L^dag)/2")?;
        }
        Ok(Self { lindblad_op, noise, a_op, b_op })
    }

    pub fn lindblad_op(&self) -> &DenseOperator {
        &self.lindblad_op
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn a_op(&self) -> &DenseOperator {
        &self.a_op
    }

    pub fn b_op(&self) -> Option<&DenseOperator> {
        self.b_op.as_ref()
    }

    /// `B` only when it actually enters the dynamics (non-zero operator and
    /// non-zero imaginary amplitude).
    pub(crate) fn active_b(&self) -> Option<&DenseOperator> {
        let (_, g_im) = self.noise.amplitudes();
        if g_im > 0.0 {
            self.b_op.as_ref()
        } else {
            None
        }
    }
}

/// Target Hamiltonian plus stochastic channels.
#[derive(Clone, Debug)]
pub struct StochasticModel {
    hamiltonian: Hamiltonian,
    channels: Vec<Channel>,
    /// Optional frame `W`: each step acts as `W^dag U_j W`.
    frame: Option<DenseOperator>,
}

impl StochasticModel {
    pub fn new(h_target: DenseOperator, channels: Vec<Channel>) -> Result<Self> {
        h_target.require_hermitian("H_T")?;
        Self::build(Hamiltonian::Static(h_target), channels)
    }

    pub fn time_dependent(dim: usize, f: HamiltonianFn, channels: Vec<Channel>) -> Result<Self> {
        let model = Self::build(Hamiltonian::TimeDependent { dim, f }, channels)?;
        model.hamiltonian.at(0.0)?;
        Ok(model)
    }

    fn build(hamiltonian: Hamiltonian, channels: Vec<Channel>) -> Result<Self> {
        let dim = hamiltonian.dim();
        for (i, ch) in channels.iter().enumerate() {
            if ch.lindblad_op.dim() != dim {
                return Err(Error::Dimension(format!(
                    "channel {i} operator has dimension {}, H_T has {dim}",
                    ch.lindblad_op.dim()
                )));
            }
        }
        Ok(Self { hamiltonian, channels, frame: None })
    }

    /// Runs every step in the rotated frame `W`: the step unitary becomes
    /// `W^dag exp(-i G_j) W`.
    pub fn with_frame(mut self, w: DenseOperator) -> Result<Self> {
        if w.dim() != self.dim() {
            return Err(Error::Dimension(format!("frame dimension {} vs model {}", w.dim(), self.dim())));
        }
        let m = w.matrix();
        let defect = (m.adjoint() * m - CMatrix::identity(m.nrows(), m.nrows())).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        if defect > 1e-10 {
            return Err(Error::Convention(format!("frame is not unitary (defect {defect:.3e})")));
        }
        self.frame = Some(w);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn frame(&self) -> Option<&DenseOperator> {
        self.frame.as_ref()
    }

    /// Real processes consumed per trajectory: one per real channel, two per
    /// complex channel.
    pub fn n_processes(&self) -> usize {
        self.channels.iter().map(|c| c.noise.n_processes()).sum()
    }

    pub fn is_white(&self) -> bool {
        self.channels.iter().all(|c| c.noise.kind.is_white())
    }

    /// Equivalent model in the computational frame: every operator `X` is
    /// replaced by `W^dag X W`. Identity when no frame is set.
    pub fn unframed(&self) -> Result<StochasticModel> {
        let Some(w) = &self.frame else { return Ok(self.clone()) };
        let wm = w.matrix().clone();
        let conj = move |x: &DenseOperator| DenseOperator::new(wm.adjoint() * x.matrix() * &wm);
        let hamiltonian = match &self.hamiltonian {
            Hamiltonian::Static(h) => Hamiltonian::Static(conj(h)?),
            Hamiltonian::TimeDependent { dim, f } => {
                let f = f.clone();
                let wm = w.matrix().clone();
                Hamiltonian::TimeDependent {
                    dim: *dim,
                    f: Arc::new(move |t| {
                        let h = f(t);
                        DenseOperator::new(wm.adjoint() * h.matrix() * &wm).expect("conjugated H_T is finite")
                    }),
                }
            }
        };
        let channels = self
            .channels
            .iter()
            .map(|c| Channel::new(conj(&c.lindblad_op)?, c.noise.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(StochasticModel { hamiltonian, channels, frame: None })
    }

    /// Largest `gamma * ||L||^2` over channels, with `||L||` the spectral
    /// spread of `A` and `B`.
    pub(crate) fn max_rate(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for c in &self.channels {
            let (g_re, g_im) = c.noise.amplitudes();
            worst = worst.max(g_re * spread(&c.a_op)?.powi(2));
            if let Some(b) = c.active_b() {
                worst = worst.max(g_im * spread(b)?.powi(2));
            }
        }
        Ok(worst)
    }
}

fn spread(op: &DenseOperator) -> Result<f64> {
    let eig = crate::qcore::eigh(op)?;
    Ok(eig.values[eig.values.len() - 1] - eig.values[0])
}

/// Max row sum of `|H_ij|`, an upper bound on the spectral radius.
pub(crate) fn inf_norm(m: &CMatrix) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Output of a deterministic solver on selected grid points.
#[derive(Clone, Debug)]
pub struct DensitySeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

pub(crate) fn check_rho0(model: &StochasticModel, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != model.dim() {
        return Err(Error::Dimension(format!("rho0 dimension {} vs model {}", rho0.dim(), model.dim())));
    }
    rho0.validate()
}
