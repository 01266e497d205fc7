use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{sample_white, stream_id, ColoredSampler, NoisePath, Sampling, StreamSeed};
use crate::qcore::{eigh_matrix, exp_hermitian_matrix, CMatrix, CVector, StateVector, C64};

use super::StochasticModel;

/// Noise realization for one channel: the real component and, for complex
/// noise, the imaginary component.
#[derive(Clone, Debug)]
pub struct ChannelNoise {
    pub re: NoisePath,
    pub im: Option<NoisePath>,
}

/// Per-channel colored samplers, built once and shared by all trajectories.
pub(crate) struct NoiseBank {
    samplers: Vec<Option<ColoredSampler>>,
    grid: TimeGrid,
    n_processes: usize,
}

impl NoiseBank {
    pub(crate) fn new(model: &StochasticModel, grid: &TimeGrid) -> Result<Self> {
        let samplers = model
            .channels()
            .iter()
            .map(|c| match &c.noise().kernel {
                Some(k) => ColoredSampler::new(k, grid, Sampling::Binned).map(Some),
                None => Ok(None),
            })
            .collect::<Result<_>>()?;
        Ok(Self { samplers, grid: *grid, n_processes: model.n_processes() })
    }

    pub(crate) fn first_stream(&self, trajectory: usize) -> u64 {
        stream_id(trajectory, self.n_processes, 0)
    }

    pub(crate) fn sample(&self, model: &StochasticModel, master_seed: u64, trajectory: usize) -> Result<Vec<ChannelNoise>> {
        let mut proc = 0;
        let mut out = Vec::with_capacity(self.samplers.len());
        for (ch, sampler) in model.channels().iter().zip(&self.samplers) {
            let draw = |p: usize| -> Result<NoisePath> {
                let seed = StreamSeed::new(master_seed, stream_id(trajectory, self.n_processes, p));
                match sampler {
                    Some(s) => Ok(s.sample(seed)),
                    None => sample_white(self.grid.n_steps(), self.grid.dt(), seed),
                }
            };
            let re = draw(proc)?;
            let im = if ch.noise().kind.is_complex() { Some(draw(proc + 1)?) } else { None };
            proc += ch.noise().n_processes();
            out.push(ChannelNoise { re, im });
        }
        Ok(out)
    }
}

/// Noise for trajectory `trajectory`: process `p` of that trajectory reads
/// stream `trajectory * P + p` of `master_seed`, with `P` the number of real
/// processes in the model. Colored channels use bin-integrated increments.
pub fn sample_channel_noise(
    model: &StochasticModel,
    grid: &TimeGrid,
    master_seed: u64,
    trajectory: usize,
) -> Result<Vec<ChannelNoise>> {
    NoiseBank::new(model, grid)?.sample(model, master_seed, trajectory)
}

struct Process {
    channel: usize,
    imag: bool,
    coeff: f64,
    op: CMatrix,
    diagonal: bool,
}

enum Kind {
    /// Static `H_T` commuting with every active generator. Phases are
    /// accumulated exactly in a joint eigenbasis (`None` = computational).
    Commuting { basis: Option<CMatrix>, h: Vec<f64>, gens: Vec<Vec<f64>> },
    Dense,
}

/// Precomputed stepping data for one model.
pub(crate) struct Engine {
    kind: Kind,
    procs: Vec<Process>,
    frame: Option<CMatrix>,
    dim: usize,
}

const COMMUTE_RTOL: f64 = 1e-12;
const JOINT_DIAG_RTOL: f64 = 1e-9;
const NORM_DRIFT_TOL: f64 = 1e-9;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
}

impl Engine {
    pub(crate) fn new(model: &StochasticModel) -> Result<Self> {
        let mut procs = Vec::new();
        for (i, ch) in model.channels().iter().enumerate() {
            let (g_re, g_im) = ch.noise().amplitudes();
            if g_re > 0.0 {
                procs.push(Process {
                    channel: i,
                    imag: false,
                    coeff: g_re.sqrt(),
                    op: ch.a_op().matrix().clone(),
                    diagonal: ch.a_op().is_diagonal(),
                });
            }
            if let Some(b) = ch.active_b() {
                procs.push(Process {
                    channel: i,
                    imag: true,
                    coeff: g_im.sqrt(),
                    op: b.matrix().clone(),
                    diagonal: b.is_diagonal(),
                });
            }
        }
        let kind = match model.hamiltonian().as_static() {
            Some(h) => commuting_kind(h.matrix(), h.is_diagonal(), &procs).unwrap_or(Kind::Dense),
            None => Kind::Dense,
        };
        Ok(Self { kind, procs, frame: model.frame().map(|w| w.matrix().clone()), dim: model.dim() })
    }

    pub(crate) fn evolve(
        &self,
        model: &StochasticModel,
        psi0: &CVector,
        grid: &TimeGrid,
        noise: &[ChannelNoise],
        outputs: &[usize],
    ) -> Result<Vec<CVector>> {
        check_noise(model, grid, noise)?;
        if psi0.len() != self.dim {
            return Err(Error::Dimension(format!("psi0 length {} vs model {}", psi0.len(), self.dim)));
        }
        let incr = |p: &Process| -> &[f64] {
            let ch = &noise[p.channel];
            if p.imag {
                &ch.im.as_ref().expect("checked").increments
            } else {
                &ch.re.increments
            }
        };
        let start = match &self.frame {
            Some(w) => w * psi0,
            None => psi0.clone(),
        };
        let mut out = Vec::with_capacity(outputs.len());
        let mut next = outputs.iter().peekable();
        match &self.kind {
            Kind::Commuting { basis, h, gens } => {
                let c0 = match basis {
                    Some(v) => v.adjoint() * &start,
                    None => start,
                };
                let mut w = vec![0.0; self.procs.len()];
                for j in 0..=grid.n_steps() {
                    if j > 0 {
                        for (acc, p) in w.iter_mut().zip(&self.procs) {
                            *acc += incr(p)[j - 1];
                        }
                    }
                    while next.peek() == Some(&&j) {
                        next.next();
                        let t = grid.time(j);
                        let c = CVector::from_iterator(
                            self.dim,
                            (0..self.dim).map(|k| {
                                let mut phase = h[k] * t;
                                for ((g, wp), p) in gens.iter().zip(&w).zip(&self.procs) {
                                    phase += p.coeff * wp * g[k];
                                }
                                c0[k] * C64::from_polar(1.0, -phase)
                            }),
                        );
                        let psi = match basis {
                            Some(v) => v * c,
                            None => c,
                        };
                        out.push(self.finish(psi, j)?);
                    }
                }
            }
            Kind::Dense => {
                let dt = grid.dt();
                let h_static = model.hamiltonian().as_static().map(|h| (h.matrix() * C64::new(dt, 0.0), h.is_diagonal()));
                let mut psi = start;
                for j in 0..=grid.n_steps() {
                    if j > 0 {
                        let (mut g, mut diagonal) = match &h_static {
                            Some((hdt, d)) => (hdt.clone(), *d),
                            None => {
                                let h = model.hamiltonian().at(grid.time(j - 1) + 0.5 * dt)?;
                                (h.matrix() * C64::new(dt, 0.0), h.is_diagonal())
                            }
                        };
                        for p in &self.procs {
                            let x = p.coeff * incr(p)[j - 1];
                            g += &p.op * C64::new(x, 0.0);
                            diagonal &= p.diagonal;
                        }
                        let u = exp_hermitian_matrix(&g, diagonal, 1.0)
                            .map_err(|e| Error::Numerical(format!("step {j}: {e}")))?;
                        psi = u * psi;
                    }
                    while next.peek() == Some(&&j) {
                        next.next();
                        out.push(self.finish(psi.clone(), j)?);
                    }
                }
            }
        }
        if out.len() != outputs.len() {
            return Err(Error::InvalidArgument("output indices must be increasing and within the grid".into()));
        }
        Ok(out)
    }

    fn finish(&self, psi: CVector, step: usize) -> Result<CVector> {
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("state became non-finite at step {step}")));
        }
        let drift = (psi.norm() - 1.0).abs();
        if drift > NORM_DRIFT_TOL {
            return Err(Error::Numerical(format!("norm drifted by {drift:.3e} at step {step}")));
        }
        Ok(match &self.frame {
            Some(w) => w.adjoint() * psi,
            None => psi,
        })
    }
}

fn commuting_kind(h: &CMatrix, h_diag: bool, procs: &[Process]) -> Option<Kind> {
    let mut ops: Vec<(&CMatrix, bool)> = vec![(h, h_diag)];
    ops.extend(procs.iter().map(|p| (&p.op, p.diagonal)));
    if ops.iter().all(|(_, d)| *d) {
        let diag = |m: &CMatrix| (0..m.nrows()).map(|i| m[(i, i)].re).collect::<Vec<f64>>();
        return Some(Kind::Commuting {
            basis: None,
            h: diag(h),
            gens: procs.iter().map(|p| diag(&p.op)).collect(),
        });
    }
    for (i, (x, _)) in ops.iter().enumerate() {
        for (y, _) in &ops[i + 1..] {
            let scale = max_abs(x) * max_abs(y);
            let comm = *x * *y - *y * *x;
            if max_abs(&comm) > COMMUTE_RTOL * scale.max(f64::MIN_POSITIVE) {
                return None;
            }
        }
    }
    // A generic real combination separates the joint eigenspaces.
    let n = h.nrows();
    let mut mix = CMatrix::zeros(n, n);
    for (i, (x, _)) in ops.iter().enumerate() {
        let s = max_abs(x);
        if s > 0.0 {
            let w = 1.0 / (1.0 + 0.618_033_988_749_895 * i as f64 + 0.1 * (i * i) as f64);
            mix += *x * C64::new(w / s, 0.0);
        }
    }
    let eig = eigh_matrix(&mix, false).ok()?;
    let v = eig.vectors;
    let vd = v.adjoint();
    let mut diags = Vec::with_capacity(ops.len());
    for (x, _) in &ops {
        let t = &vd * *x * &v;
        let scale = max_abs(x).max(f64::MIN_POSITIVE);
        for r in 0..n {
            for c in 0..n {
                if r != c && t[(r, c)].norm() > JOINT_DIAG_RTOL * scale {
                    return None;
                }
            }
        }
        diags.push((0..n).map(|k| t[(k, k)].re).collect::<Vec<f64>>());
    }
    let h_d = diags.remove(0);
    Some(Kind::Commuting { basis: Some(v), h: h_d, gens: diags })
}

fn check_noise(model: &StochasticModel, grid: &TimeGrid, noise: &[ChannelNoise]) -> Result<()> {
    if noise.len() != model.channels().len() {
        return Err(Error::Dimension(format!(
            "{} noise realizations for {} channels",
            noise.len(),
            model.channels().len()
        )));
    }
    let check = |p: &NoisePath, what: &str| {
        if p.n_steps() != grid.n_steps() || (p.dt - grid.dt()).abs() > 1e-12 * grid.dt() {
            Err(Error::Dimension(format!(
                "{what} path has {} steps of {}, grid has {} steps of {}",
                p.n_steps(),
                p.dt,
                grid.n_steps(),
                grid.dt()
            )))
        } else {
            Ok(())
        }
    };
    for (i, (ch, n)) in model.channels().iter().zip(noise).enumerate() {
        check(&n.re, &format!("channel {i} real"))?;
        match (&n.im, ch.noise().kind.is_complex()) {
            (Some(im), true) => check(im, &format!("channel {i} imaginary"))?,
            (None, false) => {}
            (Some(_), false) => {
                return Err(Error::InvalidArgument(format!("channel {i} is real but got an imaginary path")))
            }
            (None, true) => return Err(Error::InvalidArgument(format!("channel {i} is complex but has no imaginary path"))),
        }
    }
    Ok(())
}

/// Evolves `psi0` along one noise realization. Step `j` applies
/// `exp(-i [H_T(t_j + dt/2) dt + sum sqrt(gamma) (dW' A + dW'' B)])`.
/// Returns the state at every grid point, `t_0 = 0` included.
pub fn evolve_trajectory(
    model: &StochasticModel,
    psi0: &StateVector,
    grid: &TimeGrid,
    noise: &[ChannelNoise],
) -> Result<Vec<StateVector>> {
    let engine = Engine::new(model)?;
    let all: Vec<usize> = (0..=grid.n_steps()).collect();
    let states = engine.evolve(model, psi0.amplitudes(), grid, noise, &all)?;
    Ok(states.into_iter().map(StateVector::from_unchecked).collect())
}
