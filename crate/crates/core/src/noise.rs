//! Discretized Gaussian noise processes.
//!
//! A [`NoisePath`] stores per-step increments: Brownian increments `dW_j`
//! for white noise, `eta(t_j) * dt` (or the bin integral of `eta`) for
//! colored noise. Every path is a pure function of `(master_seed,
//! stream_id)` through a ChaCha20 stream, so trajectories can be generated
//! in any order on any number of workers.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Identifies one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl StreamSeed {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Stream of process `process` in trajectory `trajectory`, when every
/// trajectory consumes `n_processes` real processes.
pub fn stream_id(trajectory: usize, n_processes: usize, process: usize) -> u64 {
    debug_assert!(process < n_processes);
    (trajectory as u64) * (n_processes as u64) + process as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    RealWhite,
    ComplexWhite,
    RealColored,
    ComplexColored,
}

impl NoiseKind {
    pub fn is_complex(self) -> bool {
        matches!(self, NoiseKind::ComplexWhite | NoiseKind::ComplexColored)
    }

    pub fn is_white(self) -> bool {
        matches!(self, NoiseKind::RealWhite | NoiseKind::ComplexWhite)
    }
}

/// Two-time covariance `K(t, t')` of a real unit-amplitude process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `K(t, t') = exp(-|t - t'| / tau_c) / (2 tau_c)`; integrates to 1.
    OrnsteinUhlenbeck { tau_c: f64 },
    /// Stationary kernel tabulated at lags `j * dt`, `j = 0, 1, ...`.
    Tabulated { dt: f64, values: Vec<f64> },
    /// Full `K(t_j, t_k)` on the simulation grid points.
    TabulatedMatrix { values: Vec<Vec<f64>> },
}

/// Relative tolerance on the most negative kernel eigenvalue.
pub const KERNEL_PSD_RTOL: f64 = 1e-10;
/// Diagonal jitter budget for the Cholesky factorization, relative to the
/// largest diagonal entry.
pub const CHOLESKY_JITTER: f64 = 1e-10;

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::OrnsteinUhlenbeck { tau_c } => {
                if !(tau_c.is_finite() && *tau_c > 0.0) {
                    return Err(Error::Kernel(format!("tau_c must be positive, got {tau_c}")));
                }
            }
            KernelSpec::Tabulated { dt, values } => {
                if !(dt.is_finite() && *dt > 0.0) {
                    return Err(Error::Kernel(format!("table spacing must be positive, got {dt}")));
                }
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Kernel("table must hold finite values".into()));
                }
            }
            KernelSpec::TabulatedMatrix { values } => {
                let n = values.len();
                if n == 0 || values.iter().any(|row| row.len() != n) {
                    return Err(Error::Kernel("kernel matrix must be square and non-empty".into()));
                }
                for j in 0..n {
                    for k in 0..n {
                        if !values[j][k].is_finite() || values[j][k] != values[k][j] {
                            return Err(Error::Kernel(format!("kernel matrix not symmetric at ({j},{k})")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self, KernelSpec::TabulatedMatrix { .. })
    }

    /// `K(s)` at lag `s >= 0` for stationary kernels. Tabulated kernels only
    /// answer at their own lags (index `round(s / dt)`).
    pub fn stationary_value(&self, lag: f64) -> Result<f64> {
        match self {
            KernelSpec::OrnsteinUhlenbeck { tau_c } => Ok((-lag.abs() / tau_c).exp() / (2.0 * tau_c)),
            KernelSpec::Tabulated { dt, values } => {
                let j = (lag.abs() / dt).round() as usize;
                values
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::Kernel(format!("lag {lag} beyond tabulated range")))
            }
            KernelSpec::TabulatedMatrix { .. } => {
                Err(Error::Unsupported("kernel is not stationary".into()))
            }
        }
    }

    fn check_grid(&self, grid: &TimeGrid, n: usize) -> Result<()> {
        match self {
            KernelSpec::Tabulated { dt, values } => {
                if (dt - grid.dt()).abs() > 1e-12 * grid.dt() {
                    return Err(Error::Kernel(format!(
                        "kernel table spacing {dt} differs from simulation dt {}",
                        grid.dt()
                    )));
                }
                if values.len() < n {
                    return Err(Error::Kernel(format!(
                        "kernel table has {} lags, grid needs {n}",
                        values.len()
                    )));
                }
            }
            KernelSpec::TabulatedMatrix { values } => {
                if values.len() != n {
                    return Err(Error::Kernel(format!(
                        "kernel matrix is {}x{0}, grid needs {n}x{n}",
                        values.len()
                    )));
                }
            }
            KernelSpec::OrnsteinUhlenbeck { .. } => {}
        }
        Ok(())
    }

    /// `Sigma_jk = K(t_j, t_k)` over the `n_steps` left step points of `grid`.
    pub fn point_covariance(&self, grid: &TimeGrid) -> Result<DMatrix<f64>> {
        self.validate()?;
        let n = grid.n_steps();
        self.check_grid(grid, n)?;
        Ok(match self {
            KernelSpec::TabulatedMatrix { values } => DMatrix::from_fn(n, n, |j, k| values[j][k]),
            _ => {
                let lags: Vec<f64> = (0..n)
                    .map(|m| self.stationary_value(m as f64 * grid.dt()))
                    .collect::<Result<_>>()?;
                DMatrix::from_fn(n, n, |j, k| lags[j.abs_diff(k)])
            }
        })
    }

    /// Covariance of the step integrals `int_{t_j}^{t_j + dt} eta(s) ds`.
    /// Exact for the Ornstein-Uhlenbeck kernel, midpoint rule otherwise.
    pub fn binned_covariance(&self, grid: &TimeGrid) -> Result<DMatrix<f64>> {
        match self {
            KernelSpec::OrnsteinUhlenbeck { tau_c } => {
                self.validate()?;
                let n = grid.n_steps();
                let x = grid.dt() / tau_c;
                let one_minus = -(-x).exp_m1();
                // dt - tau (1 - e^{-x}) = tau (x + expm1(-x))
                let diag = if x < 1e-4 {
                    tau_c * x * x * (0.5 - x / 6.0 + x * x / 24.0)
                } else {
                    tau_c * (x + (-x).exp_m1())
                };
                let lags: Vec<f64> = (0..n)
                    .map(|m| {
                        if m == 0 {
                            diag
                        } else {
                            0.5 * tau_c * one_minus * one_minus * (-((m - 1) as f64) * x).exp()
                        }
                    })
                    .collect();
                Ok(DMatrix::from_fn(n, n, |j, k| lags[j.abs_diff(k)]))
            }
            _ => Ok(self.point_covariance(grid)? * (grid.dt() * grid.dt())),
        }
    }

    /// Verifies `min eig >= -1e-10 * max eig` on the grid.
    pub fn check_psd(&self, grid: &TimeGrid) -> Result<()> {
        let cov = self.point_covariance(grid)?;
        check_psd_matrix(&cov)
    }

    /// Parses a stationary kernel from two whitespace- or comma-separated
    /// columns `t  K(t_ref, t)`, with `t = 0, dt, 2 dt, ...`. Lines starting
    /// with `#` are ignored.
    pub fn parse_two_column(text: &str) -> Result<Self> {
        let mut ts = Vec::new();
        let mut ks = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Kernel(format!("line {}: expected two columns", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Kernel(format!("line {}: {e}", lineno + 1)))
            };
            ts.push(parse(cols[0])?);
            ks.push(parse(cols[1])?);
        }
        if ts.len() < 2 {
            return Err(Error::Kernel("kernel table needs at least two rows".into()));
        }
        if ts[0] != 0.0 {
            return Err(Error::Kernel("kernel table must start at lag 0".into()));
        }
        let dt = ts[1] - ts[0];
        for (j, t) in ts.iter().enumerate() {
            if (t - j as f64 * dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::Kernel(format!("kernel table is not uniformly spaced at row {j}")));
            }
        }
        let spec = KernelSpec::Tabulated { dt, values: ks };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_two_column(&std::fs::read_to_string(path)?)
    }
}

fn check_psd_matrix(cov: &DMatrix<f64>) -> Result<()> {
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -KERNEL_PSD_RTOL * max.abs() {
        return Err(Error::Kernel(format!(
            "kernel is not positive semidefinite (min eigenvalue {min:.3e}, max {max:.3e})"
        )));
    }
    Ok(())
}

/// Statistics of one family of processes `eta_alpha(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Rate `gamma_alpha` (inverse time).
    pub gamma: f64,
    /// Amplitude of the real component, defaults to `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    /// Amplitude of the imaginary component (complex kinds), defaults to `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_double_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
}

impl NoiseSpec {
    pub fn real_white(gamma: f64) -> Self {
        Self { kind: NoiseKind::RealWhite, gamma, gamma_prime: None, gamma_double_prime: None, kernel: None }
    }

    pub fn complex_white(gamma: f64) -> Self {
        Self { kind: NoiseKind::ComplexWhite, ..Self::real_white(gamma) }
    }

    pub fn real_colored(gamma: f64, kernel: KernelSpec) -> Self {
        Self { kind: NoiseKind::RealColored, kernel: Some(kernel), ..Self::real_white(gamma) }
    }

    pub fn complex_colored(gamma: f64, kernel: KernelSpec) -> Self {
        Self { kind: NoiseKind::ComplexColored, kernel: Some(kernel), ..Self::real_white(gamma) }
    }

    /// Complex white noise with distinct real/imaginary amplitudes.
    pub fn complex_white_unequal(gamma_prime: f64, gamma_double_prime: f64) -> Self {
        Self {
            kind: NoiseKind::ComplexWhite,
            gamma: 0.5 * (gamma_prime + gamma_double_prime),
            gamma_prime: Some(gamma_prime),
            gamma_double_prime: Some(gamma_double_prime),
            kernel: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")))
            }
        };
        nonneg("gamma", self.gamma)?;
        if let Some(g) = self.gamma_prime {
            nonneg("gamma_prime", g)?;
        }
        if let Some(g) = self.gamma_double_prime {
            nonneg("gamma_double_prime", g)?;
            if !self.kind.is_complex() {
                return Err(Error::InvalidArgument(
                    "gamma_double_prime only applies to complex noise".into(),
                ));
            }
        }
        match (&self.kernel, self.kind.is_white()) {
            (Some(_), true) => Err(Error::InvalidArgument("white noise takes no kernel".into())),
            (None, false) => Err(Error::InvalidArgument("colored noise requires a kernel".into())),
            (Some(k), false) => k.validate(),
            (None, true) => Ok(()),
        }
    }

    /// `(gamma', gamma'')`; the second is zero for real noise.
    pub fn amplitudes(&self) -> (f64, f64) {
        let re = self.gamma_prime.unwrap_or(self.gamma);
        let im = if self.kind.is_complex() { self.gamma_double_prime.unwrap_or(self.gamma) } else { 0.0 };
        (re, im)
    }

    /// Number of real processes this spec consumes per trajectory.
    pub fn n_processes(&self) -> usize {
        if self.kind.is_complex() {
            2
        } else {
            1
        }
    }
}

/// One realization of a real process on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub increments: Vec<f64>,
    pub seed: StreamSeed,
}

impl NoisePath {
    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    /// Process values `eta_j = increment_j / dt`.
    pub fn eta(&self) -> Vec<f64> {
        self.increments.iter().map(|x| x / self.dt).collect()
    }

    /// Running integral `W(t_j)`, starting at `W(0) = 0`.
    pub fn integral(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for x in &self.increments {
            acc += x;
            w.push(acc);
        }
        w
    }
}

/// Brownian increments `dW_j ~ Normal(0, dt)`.
pub fn sample_white(n_steps: usize, dt: f64, seed: StreamSeed) -> Result<NoisePath> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut rng = seed.rng();
    let sd = dt.sqrt();
    let increments = (0..n_steps).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(NoisePath { dt, increments, seed })
}

/// How a colored sample maps onto a step increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Sample `eta(t_j)` at the left step point; increment is `eta(t_j) dt`.
    Point,
    /// Sample the step integral of `eta` directly. Reduces to Brownian
    /// increments as the correlation time shrinks below `dt`.
    Binned,
}

/// Cholesky factor of a kernel on a fixed grid, reusable across streams.
#[derive(Clone, Debug)]
pub struct ColoredSampler {
    dt: f64,
    factor: DMatrix<f64>,
    sampling: Sampling,
}

impl ColoredSampler {
    pub fn new(kernel: &KernelSpec, grid: &TimeGrid, sampling: Sampling) -> Result<Self> {
        if !matches!(kernel, KernelSpec::OrnsteinUhlenbeck { .. }) {
            kernel.check_psd(grid)?;
        }
        let cov = match sampling {
            Sampling::Point => kernel.point_covariance(grid)?,
            Sampling::Binned => kernel.binned_covariance(grid)?,
        };
        let factor = cholesky_with_jitter(cov)?;
        Ok(Self { dt: grid.dt(), factor, sampling })
    }

    pub fn n_steps(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample(&self, seed: StreamSeed) -> NoisePath {
        let n = self.n_steps();
        let mut rng = seed.rng();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let eta = &self.factor * z;
        let scale = match self.sampling {
            Sampling::Point => self.dt,
            Sampling::Binned => 1.0,
        };
        NoisePath { dt: self.dt, increments: eta.iter().map(|x| x * scale).collect(), seed }
    }
}

fn cholesky_with_jitter(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return Ok(ch.l());
    }
    let max_diag = cov.diagonal().iter().copied().fold(0.0_f64, f64::max);
    let mut jittered = cov;
    for i in 0..jittered.nrows() {
        jittered[(i, i)] += CHOLESKY_JITTER * max_diag;
    }
    Cholesky::new(jittered)
        .map(|ch| ch.l())
        .ok_or_else(|| Error::Kernel("covariance is not positive definite within the jitter budget".into()))
}

/// `eta = C z` with `C C^T = K` on the left step points of `grid`.
pub fn sample_colored(kernel: &KernelSpec, grid: &TimeGrid, seed: StreamSeed) -> Result<NoisePath> {
    Ok(ColoredSampler::new(kernel, grid, Sampling::Point)?.sample(seed))
}

/// Real and imaginary component paths of a complex process.
pub fn complex_pair(
    spec: &NoiseSpec,
    grid: &TimeGrid,
    master_seed: u64,
    stream_re: u64,
    stream_im: u64,
) -> Result<(NoisePath, NoisePath)> {
    spec.validate()?;
    if !spec.kind.is_complex() {
        return Err(Error::InvalidArgument("complex_pair requires a complex noise kind".into()));
    }
    if stream_re == stream_im {
        return Err(Error::Seeding(format!(
            "real and imaginary components share stream {stream_re}"
        )));
    }
    let re = StreamSeed::new(master_seed, stream_re);
    let im = StreamSeed::new(master_seed, stream_im);
    match &spec.kernel {
        None => Ok((
            sample_white(grid.n_steps(), grid.dt(), re)?,
            sample_white(grid.n_steps(), grid.dt(), im)?,
        )),
        Some(kernel) => {
            let sampler = ColoredSampler::new(kernel, grid, Sampling::Point)?;
            Ok((sampler.sample(re), sampler.sample(im)))
        }
    }
}

/// Mean and variance z-scores of white increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhiteCheck {
    pub n_samples: usize,
    pub dt: f64,
    pub mean: f64,
    pub variance: f64,
    /// `mean / sqrt(dt / n)`.
    pub z_mean: f64,
    /// `(s^2 - dt) / (dt sqrt(2 / (n - 1)))`.
    pub z_variance: f64,
}

impl WhiteCheck {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.z_mean.abs() <= sigmas && self.z_variance.abs() <= sigmas
    }
}

pub fn check_white(n_samples: usize, dt: f64, seed: StreamSeed) -> Result<WhiteCheck> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let p = sample_white(n_samples, dt, seed)?;
    let n = n_samples as f64;
    let mean = p.increments.iter().sum::<f64>() / n;
    let variance = p.increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(WhiteCheck {
        n_samples,
        dt,
        mean,
        variance,
        z_mean: mean / (dt / n).sqrt(),
        z_variance: (variance - dt) / (dt * (2.0 / (n - 1.0)).sqrt()),
    })
}

/// Empirical autocorrelation of point-sampled colored paths at one lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagCheck {
    pub lag: f64,
    pub expected: f64,
    pub estimate: f64,
    pub stderr: f64,
}

impl LagCheck {
    pub fn z(&self) -> f64 {
        (self.estimate - self.expected) / self.stderr
    }
}

/// Estimates `<eta(t) eta(t + lag)>` from `n_paths` independent paths
/// (streams `0..n_paths` of `master_seed`), averaging over all time pairs
/// of each path; the standard error is taken across paths.
pub fn check_autocorrelation(
    kernel: &KernelSpec,
    grid: &TimeGrid,
    n_paths: usize,
    lags: &[usize],
    master_seed: u64,
) -> Result<Vec<LagCheck>> {
    if !kernel.is_stationary() {
        return Err(Error::Unsupported("autocorrelation check needs a stationary kernel".into()));
    }
    if n_paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    if let Some(&bad) = lags.iter().find(|&&l| l >= grid.n_steps()) {
        return Err(Error::InvalidArgument(format!("lag {bad} does not fit in {} steps", grid.n_steps())));
    }
    let sampler = ColoredSampler::new(kernel, grid, Sampling::Point)?;
    let mut per_path = vec![Vec::with_capacity(n_paths); lags.len()];
    for p in 0..n_paths {
        let eta = sampler.sample(StreamSeed::new(master_seed, p as u64)).eta();
        for (slot, &lag) in per_path.iter_mut().zip(lags) {
            let pairs = eta.len() - lag;
            let c = (0..pairs).map(|j| eta[j] * eta[j + lag]).sum::<f64>() / pairs as f64;
            slot.push(c);
        }
    }
    let np = n_paths as f64;
    lags.iter()
        .zip(per_path)
        .map(|(&lag, vals)| {
            let mean = vals.iter().sum::<f64>() / np;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (np - 1.0);
            let t = lag as f64 * grid.dt();
            Ok(LagCheck { lag: t, expected: kernel.stationary_value(t)?, estimate: mean, stderr: (var / np).sqrt() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn ou_autocorrelation_small_run() {
        let kernel = KernelSpec::OrnsteinUhlenbeck { tau_c: 0.1 };
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let checks = check_autocorrelation(&kernel, &grid, 200, &[0, 10], 3).unwrap();
        for c in &checks {
            assert!(c.z().abs() < 5.0, "{c:?}");
        }
    }

    #[test]
    fn white_variance_and_mean() {
        let n = 1_000_000;
        let dt = 1e-3;
        let p = sample_white(n, dt, StreamSeed::new(7, 0)).unwrap();
        let m = mean(&p.increments);
        let var = p.increments.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(var > 0.99 * dt && var < 1.01 * dt, "variance {var}");
        assert!(m.abs() < 5.0 * (dt / n as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn white_is_deterministic() {
        let a = sample_white(1, 1.0, StreamSeed::new(42, 3)).unwrap();
        let b = sample_white(1, 1.0, StreamSeed::new(42, 3)).unwrap();
        assert_eq!(a.increments[0].to_bits(), b.increments[0].to_bits());
        let c = sample_white(1, 1.0, StreamSeed::new(42, 4)).unwrap();
        assert_ne!(a.increments[0], c.increments[0]);
    }

    #[test]
    fn single_point_colored_draw() {
        let kernel = KernelSpec::Tabulated { dt: 1.0, values: vec![1.0] };
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let seed = StreamSeed::new(5, 1);
        let p = sample_colored(&kernel, &grid, seed).unwrap();
        let mut rng = seed.rng();
        let z: f64 = rng.sample(StandardNormal);
        assert_eq!(p.increments, vec![z]);
    }

    #[test]
    fn complex_pair_rejects_shared_stream() {
        let spec = NoiseSpec::complex_white(0.3);
        let grid = TimeGrid::new(0.01, 10).unwrap();
        assert!(matches!(complex_pair(&spec, &grid, 1, 4, 4), Err(Error::Seeding(_))));
        assert!(complex_pair(&NoiseSpec::real_white(0.3), &grid, 1, 4, 5).is_err());
    }

    #[test]
    fn complex_components_uncorrelated() {
        let spec = NoiseSpec::complex_white(1.0);
        let n = 100_000;
        let grid = TimeGrid::new(1e-3, n).unwrap();
        let (re, im) = complex_pair(&spec, &grid, 11, 20, 21).unwrap();
        let cross: f64 = re.increments.iter().zip(&im.increments).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!((cross / grid.dt()).abs() <= 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn non_psd_table_rejected() {
        let kernel = KernelSpec::Tabulated { dt: 0.1, values: vec![1.0, 2.0, 0.0] };
        let grid = TimeGrid::new(0.1, 3).unwrap();
        assert!(matches!(sample_colored(&kernel, &grid, StreamSeed::new(0, 0)), Err(Error::Kernel(_))));
    }

    #[test]
    fn rank_deficient_kernel_uses_jitter() {
        // Constant kernel: rank one, PSD, fails a strict Cholesky.
        let kernel = KernelSpec::Tabulated { dt: 0.1, values: vec![1.0; 4] };
        let grid = TimeGrid::new(0.1, 4).unwrap();
        let p = sample_colored(&kernel, &grid, StreamSeed::new(0, 0)).unwrap();
        let eta = p.eta();
        for w in eta.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-4);
        }
    }

    #[test]
    fn table_grid_must_match() {
        let kernel = KernelSpec::Tabulated { dt: 0.1, values: vec![1.0, 0.5, 0.25] };
        let grid = TimeGrid::new(0.2, 3).unwrap();
        assert!(matches!(sample_colored(&kernel, &grid, StreamSeed::new(0, 0)), Err(Error::Kernel(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(NoiseSpec::real_white(-1.0).validate().is_err());
        let mut s = NoiseSpec::real_white(1.0);
        s.kernel = Some(KernelSpec::OrnsteinUhlenbeck { tau_c: 1.0 });
        assert!(s.validate().is_err());
        let mut c = NoiseSpec::real_colored(1.0, KernelSpec::OrnsteinUhlenbeck { tau_c: 1.0 });
        c.validate().unwrap();
        c.kernel = None;
        assert!(c.validate().is_err());
        let mut r = NoiseSpec::real_white(1.0);
        r.gamma_double_prime = Some(0.5);
        assert!(r.validate().is_err());
        assert_eq!(NoiseSpec::complex_white_unequal(0.4, 0.1).amplitudes(), (0.4, 0.1));
        assert_eq!(NoiseSpec::real_white(0.4).amplitudes(), (0.4, 0.0));
    }

    #[test]
    fn parse_kernel_table() {
        let text = "# t K\n0 1.0\n0.5, 0.5\n1.0 0.25\n";
        let k = KernelSpec::parse_two_column(text).unwrap();
        assert_eq!(k, KernelSpec::Tabulated { dt: 0.5, values: vec![1.0, 0.5, 0.25] });
        assert!(KernelSpec::parse_two_column("0 1\n0.5 1\n1.2 1\n").is_err());
        assert!(KernelSpec::parse_two_column("0 1 2\n").is_err());
    }

    #[test]
    fn ou_binned_diagonal_small_lag_limit() {
        let grid = TimeGrid::new(1e-3, 3).unwrap();
        let k = KernelSpec::OrnsteinUhlenbeck { tau_c: 1e-5 };
        let cov = k.binned_covariance(&grid).unwrap();
        assert!((cov[(0, 0)] - (1e-3 - 1e-5)).abs() < 1e-12);
        assert!(cov[(0, 1)] < 1e-2 * cov[(0, 0)]);
        // tau_c >> dt: approaches K(lag) dt^2
        let slow = KernelSpec::OrnsteinUhlenbeck { tau_c: 10.0 };
        let cov = slow.binned_covariance(&grid).unwrap();
        let expected = slow.stationary_value(1e-3).unwrap() * 1e-6;
        assert!((cov[(0, 1)] - expected).abs() < 1e-6 * expected);
    }
}
