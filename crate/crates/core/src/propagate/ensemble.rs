use rayon::ThreadPoolBuilder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::qcore::{CMatrix, CVector, DensityMatrix, StateVector, C64};

use super::trajectory::{Engine, NoiseBank};
use super::StochasticModel;

/// Initial condition of an ensemble run. A mixed state is unravelled into
/// its eigencomponents, which share the noise of each trajectory.
#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Pure(s) => s.dim(),
            InitialState::Mixed(r) => r.dim(),
        }
    }

    pub fn density(&self) -> DensityMatrix {
        match self {
            InitialState::Pure(s) => s.projector(),
            InitialState::Mixed(r) => r.clone(),
        }
    }

    fn components(&self) -> Result<Vec<(f64, CVector)>> {
        match self {
            InitialState::Pure(s) => Ok(vec![(1.0, s.amplitudes().clone())]),
            InitialState::Mixed(r) => {
                r.validate()?;
                let eig = crate::qcore::eigh_matrix(r.matrix(), false)?;
                let comps: Vec<(f64, CVector)> = eig
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 1e-14)
                    .map(|(k, &w)| (w, eig.vectors.column(k).into_owned()))
                    .collect();
                let total: f64 = comps.iter().map(|(w, _)| w).sum();
                Ok(comps.into_iter().map(|(w, v)| (w / total, v)).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Record every `output_stride`-th grid point (the last point always).
    pub output_stride: usize,
    /// Worker threads; `0` uses the rayon default.
    pub workers: usize,
    /// Compute the jackknife standard error of the purity (costs a second
    /// pass over all trajectories).
    pub purity_stderr: bool,
}

impl EnsembleOptions {
    pub fn new(n_trajectories: usize, master_seed: u64) -> Self {
        Self { n_trajectories, master_seed, output_stride: 1, workers: 0, purity_stderr: false }
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub rho_avg: Vec<DensityMatrix>,
    /// `Tr(rho_avg rho0)`, the mean of per-trajectory fidelities.
    pub fidelity: Vec<f64>,
    /// Standard error of the mean; `NaN` when `M = 1`.
    pub fidelity_stderr: Vec<f64>,
    pub purity: Vec<f64>,
    pub purity_stderr: Option<Vec<f64>>,
    pub n_trajectories: usize,
    pub master_seed: u64,
}

/// Trajectories summed sequentially inside one leaf of the reduction tree.
const LEAF: usize = 8;

struct Partial {
    rho: Vec<CMatrix>,
    /// Per-trajectory fidelity rows, in trajectory order.
    fid: Vec<Vec<f64>>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        for (a, b) in self.rho.iter_mut().zip(other.rho) {
            *a += b;
        }
        self.fid.extend(other.fid);
        self
    }
}

struct Job<'a> {
    model: &'a StochasticModel,
    engine: Engine,
    bank: NoiseBank,
    grid: TimeGrid,
    outputs: Vec<usize>,
    components: Vec<(f64, CVector)>,
    rho0: CMatrix,
    pure: bool,
    master_seed: u64,
}

impl Job<'_> {
    fn trajectory(&self, m: usize) -> Result<Vec<Vec<(f64, CVector)>>> {
        let wrap = |e: Error| Error::Trajectory {
            trajectory: m,
            master_seed: self.master_seed,
            stream_id: self.bank.first_stream(m),
            source: Box::new(e),
        };
        let noise = self.bank.sample(self.model, self.master_seed, m).map_err(wrap)?;
        let mut per_time: Vec<Vec<(f64, CVector)>> = vec![Vec::with_capacity(self.components.len()); self.outputs.len()];
        for (w, psi0) in &self.components {
            let states = self.engine.evolve(self.model, psi0, &self.grid, &noise, &self.outputs).map_err(wrap)?;
            for (slot, s) in per_time.iter_mut().zip(states) {
                slot.push((*w, s));
            }
        }
        Ok(per_time)
    }

    fn overlap(&self, psi: &CVector) -> f64 {
        if self.pure {
            self.components[0].1.dotc(psi).norm_sqr()
        } else {
            (psi.adjoint() * &self.rho0 * psi)[(0, 0)].re
        }
    }

    fn leaf(&self, lo: usize, hi: usize) -> Result<Partial> {
        let d = self.rho0.nrows();
        let mut rho = vec![CMatrix::zeros(d, d); self.outputs.len()];
        let mut fid = Vec::with_capacity(hi - lo);
        for m in lo..hi {
            let per_time = self.trajectory(m)?;
            let mut row = Vec::with_capacity(self.outputs.len());
            for (acc, comps) in rho.iter_mut().zip(&per_time) {
                let mut f = 0.0;
                for (w, psi) in comps {
                    acc.gerc(C64::new(*w, 0.0), psi, psi, C64::new(1.0, 0.0));
                    f += w * self.overlap(psi);
                }
                row.push(f);
            }
            fid.push(row);
        }
        Ok(Partial { rho, fid })
    }

    fn reduce(&self, lo: usize, hi: usize) -> Result<Partial> {
        if hi - lo <= LEAF {
            return self.leaf(lo, hi);
        }
        let n_leaves = (hi - lo).div_ceil(LEAF);
        let mid = lo + (n_leaves / 2) * LEAF;
        let (a, b) = rayon::join(|| self.reduce(lo, mid), || self.reduce(mid, hi));
        Ok(a?.merge(b?))
    }

    /// `q_m(t) = Tr(rho_m(t) rho_avg(t))` for trajectories `lo..hi`.
    fn overlaps_with(&self, avg: &[CMatrix], lo: usize, hi: usize) -> Result<Vec<Vec<f64>>> {
        if hi - lo <= LEAF {
            let mut rows = Vec::with_capacity(hi - lo);
            for m in lo..hi {
                let per_time = self.trajectory(m)?;
                rows.push(
                    per_time
                        .iter()
                        .zip(avg)
                        .map(|(comps, r)| comps.iter().map(|(w, psi)| w * (psi.adjoint() * r * psi)[(0, 0)].re).sum())
                        .collect(),
                );
            }
            return Ok(rows);
        }
        let n_leaves = (hi - lo).div_ceil(LEAF);
        let mid = lo + (n_leaves / 2) * LEAF;
        let (a, b) = rayon::join(|| self.overlaps_with(avg, lo, mid), || self.overlaps_with(avg, mid, hi));
        let mut a = a?;
        a.extend(b?);
        Ok(a)
    }
}

/// Averages `M` trajectories: `rho_avg(t) = (1/M) sum_m |psi_m(t)><psi_m(t)|`.
///
/// Trajectory `m` draws its noise from streams `m * P + p` of the master
/// seed, and partial sums are merged in a fixed index tree, so the result is
/// bitwise independent of the number of workers.
pub fn run_ensemble(
    model: &StochasticModel,
    initial: &InitialState,
    grid: &TimeGrid,
    options: &EnsembleOptions,
) -> Result<EnsembleResult> {
    let m_total = options.n_trajectories;
    if m_total == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one trajectory".into()));
    }
    if initial.dim() != model.dim() {
        return Err(Error::Dimension(format!("initial state dimension {} vs model {}", initial.dim(), model.dim())));
    }
    let components = initial.components()?;
    let pure = matches!(initial, InitialState::Pure(_));
    let outputs = grid.output_indices(options.output_stride);
    let job = Job {
        model,
        engine: Engine::new(model)?,
        bank: NoiseBank::new(model, grid)?,
        grid: *grid,
        rho0: initial.density().matrix().clone(),
        outputs,
        components,
        pure,
        master_seed: options.master_seed,
    };
    let pool = ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    let partial = pool.install(|| job.reduce(0, m_total))?;

    let inv_m = 1.0 / m_total as f64;
    let avg: Vec<CMatrix> = partial.rho.into_iter().map(|r| r * C64::new(inv_m, 0.0)).collect();
    let n_out = job.outputs.len();
    let mut fidelity = Vec::with_capacity(n_out);
    let mut fidelity_stderr = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let (mean, se) = mean_and_stderr(partial.fid.iter().map(|row| row[i]), m_total);
        fidelity.push(mean);
        fidelity_stderr.push(se);
    }
    let purity: Vec<f64> = avg.iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect();

    let purity_stderr = if options.purity_stderr && m_total > 1 {
        let q = pool.install(|| job.overlaps_with(&avg, 0, m_total))?;
        let r: f64 = job.components.iter().map(|(w, _)| w * w).sum();
        let mf = m_total as f64;
        let denom = (mf - 1.0) * (mf - 1.0);
        Some(
            (0..n_out)
                .map(|i| {
                    let thetas: Vec<f64> =
                        q.iter().map(|row| (mf * mf * purity[i] - 2.0 * mf * row[i] + r) / denom).collect();
                    let mean = thetas.iter().sum::<f64>() / mf;
                    let ss: f64 = thetas.iter().map(|t| (t - mean).powi(2)).sum();
                    ((mf - 1.0) / mf * ss).sqrt()
                })
                .collect(),
        )
    } else if options.purity_stderr {
        Some(vec![f64::NAN; n_out])
    } else {
        None
    };

    Ok(EnsembleResult {
        times: job.outputs.iter().map(|&j| grid.time(j)).collect(),
        rho_avg: avg.into_iter().map(DensityMatrix::from_matrix_unchecked).collect(),
        fidelity,
        fidelity_stderr,
        purity,
        purity_stderr,
        n_trajectories: m_total,
        master_seed: options.master_seed,
    })
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (nf - 1.0) / nf).sqrt())
}
