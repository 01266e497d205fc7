//! Closed-form dynamics of the dephasing long-range Ising chain at `h = 0`.
//!
//! With `H_T` and `L` both diagonal in the `sigma^z` product basis, every
//! density-matrix element evolves independently:
//! `rho_IJ(t) = rho_IJ(0) exp(-i (e_I - e_J) t - (gamma/2) (l_I - l_J)^2 t)`.
//! Configurations are keyed by their basis index; `p` counts the `+1`
//! spins, and `l` depends only on `p`: `l_p = ((N - 2p)^2 - N) / 2`.

use num_integer::binomial;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{spin_value, IsingSpec};
use crate::qcore::{CMatrix, CVector, DensityMatrix, StateVector, C64};

/// One product configuration of `N` spins.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpinConfiguration {
    /// Entries are `+1` or `-1`, site 0 first.
    pub bits: Vec<i8>,
    /// Number of `+1` entries.
    pub p: usize,
    /// Rank among configurations with the same `p`, in lexicographic order
    /// with `+1` before `-1`.
    pub m: usize,
    /// Position in the computational basis.
    pub index: usize,
}

/// All `2^N` configurations, ordered by basis index.
pub fn configurations(n: usize) -> Result<Vec<SpinConfiguration>> {
    if n == 0 || n > crate::models::MAX_SPINS {
        return Err(Error::Size(format!("N = {n} outside 1..={}", crate::models::MAX_SPINS)));
    }
    let mut seen = vec![0usize; n + 1];
    Ok((0..1usize << n)
        .map(|index| {
            let bits: Vec<i8> = (0..n).map(|s| spin_value(index, s, n) as i8).collect();
            let p = bits.iter().filter(|&&b| b == 1).count();
            let m = seen[p];
            seen[p] += 1;
            SpinConfiguration { bits, p, m, index }
        })
        .collect())
}

/// `l_p = ((N - 2p)^2 - N) / 2`, with multiplicity `C(N, p)`.
pub fn lindblad_eigenvalue(n: usize, p: usize) -> Result<f64> {
    if p > n {
        return Err(Error::InvalidArgument(format!("p = {p} exceeds N = {n}")));
    }
    let d = n as f64 - 2.0 * p as f64;
    Ok((d * d - n as f64) / 2.0)
}

fn require_zero_field(spec: &IsingSpec) -> Result<()> {
    spec.validate()?;
    if spec.field != 0.0 {
        return Err(Error::Unsupported(format!(
            "closed form needs h = 0, got h = {}",
            spec.field
        )));
    }
    Ok(())
}

/// `-sum_{i<j} J_ij a_i a_j` for the configuration `a`.
pub fn energy_eigenvalue(spec: &IsingSpec, config: &SpinConfiguration) -> Result<f64> {
    require_zero_field(spec)?;
    if config.bits.len() != spec.n_spins {
        return Err(Error::Dimension(format!("{} bits for {} spins", config.bits.len(), spec.n_spins)));
    }
    let a = &config.bits;
    let mut e = 0.0;
    for i in 0..spec.n_spins {
        for j in i + 1..spec.n_spins {
            e -= spec.couplings[i][j] * f64::from(a[i]) * f64::from(a[j]);
        }
    }
    Ok(e)
}

/// `l` and `epsilon` for every basis index.
#[derive(Clone, Debug)]
pub struct IsingSpectra {
    pub n_spins: usize,
    pub l: Vec<f64>,
    pub eps: Vec<f64>,
}

impl IsingSpectra {
    pub fn new(spec: &IsingSpec) -> Result<Self> {
        require_zero_field(spec)?;
        let n = spec.n_spins;
        let configs = configurations(n)?;
        let l = configs.iter().map(|c| lindblad_eigenvalue(n, c.p)).collect::<Result<_>>()?;
        let eps = configs.iter().map(|c| energy_eigenvalue(spec, c)).collect::<Result<_>>()?;
        Ok(Self { n_spins: n, l, eps })
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// `||L|| = l_max - l_min`.
    pub fn seminorm(&self) -> f64 {
        let max = self.l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.l.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Smallest non-zero `(l_I - l_J)^2`.
    pub fn min_gap_squared(&self) -> f64 {
        let mut levels: Vec<f64> = self.l.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels.windows(2).map(|w| (w[1] - w[0]).powi(2)).fold(f64::INFINITY, f64::min)
    }
}

fn check_state(spectra: &IsingSpectra, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != spectra.dim() {
        return Err(Error::Dimension(format!("rho0 dimension {} vs 2^N = {}", rho0.dim(), spectra.dim())));
    }
    rho0.validate()
}

/// Elementwise closed-form evolution.
pub fn exact_rho(spec: &IsingSpec, rho0: &DensityMatrix, gamma: f64, t: f64) -> Result<DensityMatrix> {
    let s = IsingSpectra::new(spec)?;
    check_state(&s, rho0)?;
    Ok(exact_rho_with(&s, rho0, gamma, t))
}

pub fn exact_rho_with(spectra: &IsingSpectra, rho0: &DensityMatrix, gamma: f64, t: f64) -> DensityMatrix {
    let d = spectra.dim();
    let r0 = rho0.matrix();
    let m = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            return r0[(i, j)];
        }
        let dl = spectra.l[i] - spectra.l[j];
        let de = spectra.eps[i] - spectra.eps[j];
        r0[(i, j)] * C64::from_polar((-0.5 * gamma * dl * dl * t).exp(), -de * t)
    });
    DensityMatrix::from_matrix_unchecked(m)
}

/// Tolerance on `1 - Tr(rho0^2)` for accepting a pure initial state.
pub const PURE_TOL: f64 = 1e-9;

/// Off-diagonal weights `2 |rho_IJ|^2` for `I < J`, with `(l_I - l_J)^2` and `e_I - e_J`.
fn pair_terms(spectra: &IsingSpectra, rho0: &DensityMatrix) -> Result<Vec<(f64, f64, f64)>> {
    check_state(spectra, rho0)?;
    let purity = rho0.purity();
    if (1.0 - purity).abs() > PURE_TOL {
        return Err(Error::Precondition(format!("initial state must be pure (purity {purity})")));
    }
    let r0 = rho0.matrix();
    let d = spectra.dim();
    let mut terms = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let w = r0[(i, j)].norm_sqr();
            if w > 0.0 {
                let dl = spectra.l[i] - spectra.l[j];
                terms.push((2.0 * w, dl * dl, spectra.eps[i] - spectra.eps[j]));
            }
        }
    }
    Ok(terms)
}

/// `F(t) = 1 - 2 sum_{I<J} |rho_IJ|^2 (1 - e^{-(gamma/2) dl^2 t} cos(de t))`.
pub fn fidelity_curve(spec: &IsingSpec, rho0: &DensityMatrix, gamma: f64, times: &[f64]) -> Result<Vec<f64>> {
    let s = IsingSpectra::new(spec)?;
    let terms = pair_terms(&s, rho0)?;
    Ok(times
        .iter()
        .map(|&t| {
            1.0 - terms
                .iter()
                .map(|&(w, dl2, de)| w * (1.0 - (-0.5 * gamma * dl2 * t).exp() * (de * t).cos()))
                .sum::<f64>()
        })
        .collect())
}

/// `p(t) = 1 - 2 sum_{I<J} |rho_IJ|^2 (1 - e^{-gamma dl^2 t})`.
pub fn purity_curve(spec: &IsingSpec, rho0: &DensityMatrix, gamma: f64, times: &[f64]) -> Result<Vec<f64>> {
    let s = IsingSpectra::new(spec)?;
    let terms = pair_terms(&s, rho0)?;
    Ok(times
        .iter()
        .map(|&t| 1.0 - terms.iter().map(|&(w, dl2, _)| w * (1.0 - (-gamma * dl2 * t).exp())).sum::<f64>())
        .collect())
}

/// Late-time fidelity: only pairs with `l_I = l_J` keep their coherence,
/// `F_inf(t) = sum_{l_I = l_J} |rho_IJ|^2 cos((e_I - e_J) t)`.
pub fn degenerate_fidelity(spec: &IsingSpec, rho0: &DensityMatrix, t: f64) -> Result<f64> {
    let s = IsingSpectra::new(spec)?;
    check_state(&s, rho0)?;
    let r0 = rho0.matrix();
    let d = s.dim();
    let mut f = 0.0;
    for i in 0..d {
        for j in 0..d {
            if s.l[i] == s.l[j] {
                f += r0[(i, j)].norm_sqr() * ((s.eps[i] - s.eps[j]) * t).cos();
            }
        }
    }
    Ok(f)
}

/// Long-time purity from `|+>^N`:
/// `4^{-N} 2 C(2N, N)` for odd `N`, `4^{-N} (2 C(2N, N) - C(N, N/2)^2)` for even `N`.
pub fn asymptotic_purity(n: usize) -> Result<Ratio<u128>> {
    if n == 0 || n > 60 {
        return Err(Error::InvalidArgument(format!("N = {n} outside 1..=60")));
    }
    let n128 = n as u128;
    let mut num = 2 * binomial(2 * n128, n128);
    if n % 2 == 0 {
        let c = binomial(n128, n128 / 2);
        num -= c * c;
    }
    Ok(Ratio::new(num, 1u128 << (2 * n)))
}

fn basis_pair(n: usize, a: usize, b: usize) -> StateVector {
    let mut v = CVector::zeros(1 << n);
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    v[a] += amp;
    v[b] += amp;
    StateVector::normalize(v).expect("two distinct basis states")
}

/// Index of `|e_0>`, all spins `-1`.
pub fn all_down_index(n: usize) -> usize {
    (1 << n) - 1
}

/// Index of `|v_p> = |-...- +...+>` with `p` trailing `+1` spins.
pub fn reference_index(n: usize, p: usize) -> usize {
    ((1usize << (n - p)) - 1) << p
}

#[derive(Clone, Debug)]
pub struct SpecialStates {
    pub product_plus: StateVector,
    /// `(|e_0> + |v_{floor(N/2)}>)/sqrt(2)`, pairing the extreme `l` values.
    pub max_decoherence: StateVector,
    /// `(|e_0> + |e_N>)/sqrt(2)`.
    pub cat: StateVector,
}

pub fn special_states(n: usize) -> Result<SpecialStates> {
    if n < 2 || n > crate::models::MAX_SPINS {
        return Err(Error::Size(format!("N = {n} outside 2..={}", crate::models::MAX_SPINS)));
    }
    let d = 1usize << n;
    let amp = C64::new((d as f64).sqrt().recip(), 0.0);
    let product_plus = StateVector::normalize(CVector::from_element(d, amp))?;
    Ok(SpecialStates {
        product_plus,
        max_decoherence: basis_pair(n, all_down_index(n), reference_index(n, n / 2)),
        cat: basis_pair(n, all_down_index(n), 0),
    })
}

/// `|D_p^N> = C(N, p)^{-1/2} sum_m |e_p^(m)>`.
pub fn dicke(n: usize, p: usize) -> Result<StateVector> {
    let configs = configurations(n)?;
    if p > n {
        return Err(Error::InvalidArgument(format!("p = {p} exceeds N = {n}")));
    }
    let mut v = CVector::zeros(1 << n);
    for c in configs.iter().filter(|c| c.p == p) {
        v[c.index] = C64::new(1.0, 0.0);
    }
    StateVector::normalize(v)
}

/// `rho_inf = 2^{-N} sum_p C(N, p) |D_p><D_p|`.
///
/// Defined for pure dephasing (`J = 0`) or uniform couplings, where
/// `[H_T, rho_inf] = 0`.
pub fn fixed_point(spec: &IsingSpec) -> Result<DensityMatrix> {
    require_zero_field(spec)?;
    let zero = spec.couplings.iter().all(|r| r.iter().all(|&x| x == 0.0));
    if !zero && !spec.is_uniform() {
        return Err(Error::Precondition(
            "fixed point needs pure dephasing or uniform couplings".into(),
        ));
    }
    let n = spec.n_spins;
    let d = 1usize << n;
    let mut m = CMatrix::zeros(d, d);
    for p in 0..=n {
        let w = binomial(n as u64, p as u64) as f64 / d as f64;
        let v = dicke(n, p)?;
        m += v.amplitudes() * v.amplitudes().adjoint() * C64::new(w, 0.0);
    }
    DensityMatrix::new(m)
}

/// `E = e(e_0) - e(v_{floor(N/2)})`, the oscillation frequency of the
/// maximal-decoherence state's fidelity.
pub fn max_decoherence_gap(spec: &IsingSpec) -> Result<f64> {
    let s = IsingSpectra::new(spec)?;
    let n = spec.n_spins;
    Ok(s.eps[all_down_index(n)] - s.eps[reference_index(n, n / 2)])
}
