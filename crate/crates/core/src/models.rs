//! Target Hamiltonians and their stochastic channels.
//!
//! Spin sites use the `qcore` ordering: site 0 is the most significant bit
//! of the basis index and bit value 0 means `sigma^z = +1`. Chains have open
//! boundaries.

use itertools::Itertools;
use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::propagate::{Channel, StochasticModel};
use crate::qcore::{
    boson_ops, embed, embed_apply, hermitian_exp, kron_all, pauli, CMatrix, CVector, DenseOperator, PauliAxis, C64,
    MAX_DIM,
};

/// Largest spin chain the dense builders accept.
pub const MAX_SPINS: usize = 14;

/// `sigma^z` eigenvalue of `site` in basis state `index` of an `n`-spin register.
pub fn spin_value(index: usize, site: usize, n: usize) -> f64 {
    if (index >> (n - 1 - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingSpec {
    pub n_spins: usize,
    /// Symmetric, zero diagonal.
    pub couplings: Vec<Vec<f64>>,
    /// Transverse field `h`.
    #[serde(default)]
    pub field: f64,
}

impl IsingSpec {
    /// `J_ij = j |i - j|^{-a}`.
    pub fn power_law(n_spins: usize, j: f64, a: f64, field: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidArgument(format!("decay exponent must be >= 0, got {a}")));
        }
        let couplings = (0..n_spins)
            .map(|r| {
                (0..n_spins)
                    .map(|c| if r == c { 0.0 } else { j * (r.abs_diff(c) as f64).powf(-a) })
                    .collect()
            })
            .collect();
        let spec = Self { n_spins, couplings, field };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(n_spins: usize, j: f64) -> Result<Self> {
        Self::power_law(n_spins, j, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_spins;
        if n == 0 {
            return Err(Error::InvalidArgument("Ising chain needs at least one spin".into()));
        }
        if n > MAX_SPINS {
            return Err(Error::Size(format!("{n} spins exceed the dense limit of {MAX_SPINS}")));
        }
        if self.couplings.len() != n || self.couplings.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!("couplings must be {n}x{n}")));
        }
        for i in 0..n {
            if self.couplings[i][i] != 0.0 {
                return Err(Error::InvalidArgument(format!("J_{i}{i} must be zero")));
            }
            for j in 0..n {
                let v = self.couplings[i][j];
                if !v.is_finite() || v != self.couplings[j][i] {
                    return Err(Error::InvalidArgument(format!("couplings must be finite and symmetric at ({i},{j})")));
                }
            }
        }
        if !self.field.is_finite() {
            return Err(Error::InvalidArgument("field must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn is_uniform(&self) -> bool {
        let first = if self.n_spins > 1 { self.couplings[0][1] } else { 0.0 };
        (0..self.n_spins).all(|i| (0..self.n_spins).all(|j| i == j || self.couplings[i][j] == first))
    }

    /// Diagonals of `-sum J_ij s_i s_j` and `sum_{i<j} s_i s_j` (field ignored).
    pub fn diagonals(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let n = self.n_spins;
        let mut energy = Vec::with_capacity(self.dim());
        let mut lind = Vec::with_capacity(self.dim());
        for idx in 0..self.dim() {
            let s: Vec<f64> = (0..n).map(|i| spin_value(idx, i, n)).collect();
            let (mut e, mut l) = (0.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    e -= self.couplings[i][j] * s[i] * s[j];
                    l += s[i] * s[j];
                }
            }
            energy.push(e);
            lind.push(l);
        }
        Ok((energy, lind))
    }
}

/// `H_T = -sum_{i<j} J_ij Z_i Z_j - h sum X_i` and `L = sum_{i<j} Z_i Z_j`.
pub fn build_ising(spec: &IsingSpec) -> Result<(DenseOperator, DenseOperator)> {
    let (energy, lind) = spec.diagonals()?;
    let n = spec.n_spins;
    let mut h = CMatrix::from_diagonal(&CVector::from_iterator(energy.len(), energy.iter().map(|&e| C64::new(e, 0.0))));
    if spec.field != 0.0 {
        for idx in 0..spec.dim() {
            for site in 0..n {
                h[(idx, idx ^ (1 << (n - 1 - site)))] -= C64::new(spec.field, 0.0);
            }
        }
    }
    Ok((DenseOperator::new(h)?, DenseOperator::from_real_diagonal(&lind)?))
}

/// Ising model whose couplings all fluctuate with the same real noise.
pub fn ising_model(spec: &IsingSpec, noise: NoiseSpec) -> Result<StochasticModel> {
    let (h, l) = build_ising(spec)?;
    StochasticModel::new(h, vec![Channel::new(l, noise)?])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoseHubbardSpec {
    pub n_sites: usize,
    pub n_max: usize,
    pub j_hop: f64,
    pub u: f64,
}

impl BoseHubbardSpec {
    pub fn local_dims(&self) -> Vec<usize> {
        vec![self.n_max + 1; self.n_sites]
    }

    pub fn dim(&self) -> Result<usize> {
        let mut d: usize = 1;
        for _ in 0..self.n_sites {
            d = d
                .checked_mul(self.n_max + 1)
                .filter(|&d| d <= MAX_DIM)
                .ok_or_else(|| Error::Size(format!("({})^{} exceeds {MAX_DIM}", self.n_max + 1, self.n_sites)))?;
        }
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidArgument("need at least one site".into()));
        }
        if !(self.j_hop.is_finite() && self.u.is_finite()) {
            return Err(Error::InvalidArgument("J_hop and U must be finite".into()));
        }
        self.dim().map(|_| ())
    }

    /// `sum_i n_i`.
    pub fn total_number(&self) -> Result<DenseOperator> {
        self.validate()?;
        let ops = boson_ops(self.n_max)?;
        let dims = self.local_dims();
        let mut diag = vec![0.0; self.dim()?];
        for site in 0..self.n_sites {
            let n_i = embed(&ops.number, &[site], &dims)?;
            for (k, v) in n_i.diagonal().into_iter().enumerate() {
                diag[k] += v.re;
            }
        }
        DenseOperator::from_real_diagonal(&diag)
    }
}

/// `H_T = -J sum_<ij> (b_i^dag b_j + b_j^dag b_i) + (U/2) sum n_i(n_i - 1)`
/// on an open chain, and `L = sum n_i(n_i - 1)`.
pub fn build_bose_hubbard(spec: &BoseHubbardSpec) -> Result<(DenseOperator, DenseOperator)> {
    spec.validate()?;
    let ops = boson_ops(spec.n_max)?;
    let dims = spec.local_dims();
    let d = spec.dim()?;
    let local_l = &ops.number * &(&ops.number - &DenseOperator::identity(spec.n_max + 1)?);
    let mut l_diag = vec![0.0; d];
    for site in 0..spec.n_sites {
        for (k, v) in embed(&local_l, &[site], &dims)?.diagonal().into_iter().enumerate() {
            l_diag[k] += v.re;
        }
    }
    let mut h = CMatrix::from_diagonal(&CVector::from_iterator(d, l_diag.iter().map(|&x| C64::new(0.5 * spec.u * x, 0.0))));
    if spec.j_hop != 0.0 {
        let hop = ops.creation.kron(&ops.annihilation)?;
        let hop = &hop + &hop.adjoint();
        for site in 0..spec.n_sites.saturating_sub(1) {
            h -= embed(&hop, &[site, site + 1], &dims)?.matrix() * C64::new(spec.j_hop, 0.0);
        }
    }
    Ok((DenseOperator::new(h)?, DenseOperator::from_real_diagonal(&l_diag)?))
}

/// Bose-Hubbard model with the interaction modulated as `U -> U + 2 sqrt(gamma) eta`.
pub fn bose_hubbard_model(spec: &BoseHubbardSpec, noise: NoiseSpec) -> Result<StochasticModel> {
    let (h, l) = build_bose_hubbard(spec)?;
    StochasticModel::new(h, vec![Channel::new(l, noise)?])
}

#[derive(Clone, Debug, PartialEq)]
pub struct KBodySpec {
    pub n_particles: usize,
    pub k: usize,
    /// Operator on `k` spins, dimension `2^k`.
    pub local_kernel: DenseOperator,
}

/// Upper bound on `C(N, k) 2^N 2^k` for the non-diagonal dense builder.
const KBODY_WORK_BUDGET: u128 = 1 << 34;

impl KBodySpec {
    /// Kernel `sigma^{a_1} (x) ... (x) sigma^{a_k}`.
    pub fn pauli_string(n_particles: usize, axes: &[PauliAxis]) -> Result<Self> {
        let ops: Vec<DenseOperator> = axes.iter().map(|&a| pauli(a)).collect();
        let spec = Self { n_particles, k: axes.len(), local_kernel: kron_all(&ops)? };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n_particles {
            return Err(Error::InvalidArgument(format!("need 1 <= k <= N, got k={} N={}", self.k, self.n_particles)));
        }
        if self.n_particles > MAX_SPINS {
            return Err(Error::Size(format!("{} particles exceed {MAX_SPINS}", self.n_particles)));
        }
        if self.local_kernel.dim() != 1 << self.k {
            return Err(Error::Dimension(format!(
                "kernel dimension {} is not 2^{}",
                self.local_kernel.dim(),
                self.k
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_particles
    }

    fn tuples(&self) -> impl Iterator<Item = Vec<usize>> {
        (0..self.n_particles).combinations(self.k)
    }

    /// Diagonal of `L` when the kernel is diagonal.
    pub fn diagonal(&self) -> Result<Option<Vec<f64>>> {
        self.validate()?;
        if !self.local_kernel.is_diagonal() {
            return Ok(None);
        }
        let kd: Vec<f64> = self.local_kernel.diagonal().iter().map(|z| z.re).collect();
        let n = self.n_particles;
        let mut out = vec![0.0; self.dim()];
        for tuple in self.tuples() {
            for (idx, slot) in out.iter_mut().enumerate() {
                let local = tuple.iter().fold(0usize, |acc, &s| (acc << 1) | ((idx >> (n - 1 - s)) & 1));
                *slot += kd[local];
            }
        }
        Ok(Some(out))
    }

    /// `L v` without forming `L`.
    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        self.validate()?;
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!("vector length {} vs {}", v.len(), self.dim())));
        }
        if let Some(diag) = self.diagonal()? {
            return Ok(CVector::from_iterator(v.len(), v.iter().zip(&diag).map(|(z, d)| z * *d)));
        }
        let dims = vec![2; self.n_particles];
        let mut out = CVector::zeros(v.len());
        for tuple in self.tuples() {
            out += embed_apply(&self.local_kernel, &tuple, &dims, v)?;
        }
        Ok(out)
    }
}

/// `L = sum_{i_1 < ... < i_k} embed(kernel, (i_1, ..., i_k))`.
pub fn build_kbody(spec: &KBodySpec) -> Result<DenseOperator> {
    if let Some(diag) = spec.diagonal()? {
        return DenseOperator::from_real_diagonal(&diag);
    }
    let work = binomial(spec.n_particles as u128, spec.k as u128) << (spec.n_particles + spec.k);
    if work > KBODY_WORK_BUDGET {
        return Err(Error::Size(format!(
            "C({}, {}) 2^N 2^k = {work} exceeds the dense budget",
            spec.n_particles, spec.k
        )));
    }
    let dims = vec![2; spec.n_particles];
    let mut acc = CMatrix::zeros(spec.dim(), spec.dim());
    for tuple in spec.tuples() {
        acc += embed(&spec.local_kernel, &tuple, &dims)?.into_matrix();
    }
    DenseOperator::new(acc)
}

/// Largest register the gate constructions accept.
pub const MAX_GATE_QUBITS: usize = 7;

fn global_spin(axis: PauliAxis, k: usize) -> Result<DenseOperator> {
    let dims = vec![2; k];
    let mut acc = CMatrix::zeros(1 << k, 1 << k);
    for site in 0..k {
        acc += embed(&pauli(axis), &[site], &dims)?.into_matrix();
    }
    DenseOperator::new(acc)
}

/// `U_MS(theta, phi) = exp(-i theta (S_x cos phi + S_y sin phi)^2 / 4)` with
/// `S_chi = sum_i sigma^chi_i` on `k` qubits.
pub fn ms_gate(theta: f64, phi: f64, k: usize) -> Result<DenseOperator> {
    if k == 0 || k > MAX_GATE_QUBITS {
        return Err(Error::Size(format!("MS gate supports 1..={MAX_GATE_QUBITS} qubits, got {k}")));
    }
    let s = &(&global_spin(PauliAxis::X, k)? * phi.cos()) + &(&global_spin(PauliAxis::Y, k)? * phi.sin());
    let s2 = &s * &s;
    hermitian_exp(&s2, theta / 4.0)
}

fn check_odd_k(k: usize) -> Result<()> {
    if k % 2 == 0 {
        return Err(Error::Unsupported(format!("the digital k-body construction needs odd k, got {k}")));
    }
    if k > MAX_GATE_QUBITS {
        return Err(Error::Size(format!("k = {k} exceeds {MAX_GATE_QUBITS}")));
    }
    Ok(())
}

/// `U_MS(-pi/2, 0) exp(-i angle sigma^z_1) U_MS(pi/2, 0)`.
pub fn ms_sandwich(angle: f64, k: usize) -> Result<DenseOperator> {
    check_odd_k(k)?;
    let dims = vec![2; k];
    let z1 = embed(&pauli(PauliAxis::Z), &[0], &dims)?;
    let local = hermitian_exp(&z1, angle)?;
    Ok(&(&ms_gate(-std::f64::consts::FRAC_PI_2, 0.0, k)? * &local) * &ms_gate(std::f64::consts::FRAC_PI_2, 0.0, k)?)
}

/// Sign `s` in `ms_sandwich(x, k) = exp(-i s x Z X ... X)`: `(-1)^((k-1)/2)`.
pub fn ms_sandwich_sign(k: usize) -> f64 {
    if (k / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `sigma^z (x) sigma^x (x) ... (x) sigma^x` on `k` qubits.
pub fn zx_string(k: usize) -> Result<DenseOperator> {
    let mut ops = vec![pauli(PauliAxis::Z)];
    ops.extend(std::iter::repeat_n(pauli(PauliAxis::X), k - 1));
    kron_all(&ops)
}

/// `exp(-i g t Z X ... X)` synthesized from two MS gates and a local
/// `sigma^z_1` rotation. The local rotation angle carries the sign
/// `(-1)^((k-1)/2)`, which the MS conjugation flips for `k = 3, 7`.
pub fn kbody_exponential_digital(g: f64, t: f64, k: usize) -> Result<DenseOperator> {
    ms_sandwich(ms_sandwich_sign(k) * g * t, k)
}

/// Digital k-body channel: each step is `U_MS(-pi/2) exp(-i (g dt + sqrt(gamma) dW) sigma^z_1) U_MS(pi/2)`,
/// so the effective generator is `s (g dt + sqrt(gamma) dW) Z X ... X`.
pub fn digital_kbody_model(k: usize, g: f64, noise: NoiseSpec) -> Result<StochasticModel> {
    check_odd_k(k)?;
    let dims = vec![2; k];
    let z1 = embed(&pauli(PauliAxis::Z), &[0], &dims)?;
    let frame = ms_gate(std::f64::consts::FRAC_PI_2, 0.0, k)?;
    StochasticModel::new(&z1 * g, vec![Channel::new(z1, noise)?])?.with_frame(frame)
}

/// First-order Trotter product `[prod_l exp(-i h_l t / M)]^M`.
pub fn trotter_evolve(h_terms: &[DenseOperator], t: f64, m: usize) -> Result<DenseOperator> {
    if m == 0 {
        return Err(Error::InvalidArgument("Trotter step count must be at least 1".into()));
    }
    let first = h_terms.first().ok_or_else(|| Error::InvalidArgument("no Hamiltonian terms".into()))?;
    let d = first.dim();
    let mut step = DenseOperator::identity(d)?;
    for h in h_terms {
        if h.dim() != d {
            return Err(Error::Dimension(format!("term dimension {} vs {d}", h.dim())));
        }
        step = &step * &hermitian_exp(h, t / m as f64)?;
    }
    let mut out = DenseOperator::identity(d)?;
    let mut base = step;
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::eigh;

    fn max_diff(a: &DenseOperator, b: &DenseOperator) -> f64 {
        (a.matrix() - b.matrix()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    #[test]
    fn ising_two_spins() {
        let spec = IsingSpec::power_law(2, 1.0, 0.0, 0.0).unwrap();
        let (h, l) = build_ising(&spec).unwrap();
        let hd: Vec<f64> = h.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(hd, vec![-1.0, 1.0, 1.0, -1.0]);
        assert!(h.is_diagonal());
        let zz = kron_all(&[pauli(PauliAxis::Z), pauli(PauliAxis::Z)]).unwrap();
        assert_eq!(l.matrix(), zz.matrix());
    }

    #[test]
    fn ising_l_spectrum_n3() {
        let spec = IsingSpec::uniform(3, 1.0).unwrap();
        let (_, l) = build_ising(&spec).unwrap();
        let ld: Vec<f64> = l.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(ld, vec![3.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 3.0]);
    }

    #[test]
    fn ising_l_on_mmpp() {
        let spec = IsingSpec::uniform(4, 1.0).unwrap();
        let (_, l) = build_ising(&spec).unwrap();
        // |-,-,+,+> = bits 1100
        assert_eq!(l.diagonal()[0b1100].re, -2.0);
    }

    #[test]
    fn power_law_preset() {
        let spec = IsingSpec::power_law(5, 2.0, 1.5, 0.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(spec.couplings[i][j], 2.0 * (i.abs_diff(j) as f64).powf(-1.5));
                }
            }
        }
        assert!(matches!(IsingSpec::power_law(15, 1.0, 0.0, 0.0), Err(Error::Size(_))));
    }

    #[test]
    fn transverse_field_matches_embedding() {
        let spec = IsingSpec::power_law(3, 0.7, 1.0, 0.4).unwrap();
        let (h, _) = build_ising(&spec).unwrap();
        let dims = [2, 2, 2];
        let mut expected = CMatrix::zeros(8, 8);
        for i in 0..3 {
            for j in i + 1..3 {
                let zz = embed(
                    &kron_all(&[pauli(PauliAxis::Z), pauli(PauliAxis::Z)]).unwrap(),
                    &[i, j],
                    &dims,
                )
                .unwrap();
                expected -= zz.matrix() * C64::new(spec.couplings[i][j], 0.0);
            }
            expected -= embed(&pauli(PauliAxis::X), &[i], &dims).unwrap().matrix() * C64::new(0.4, 0.0);
        }
        assert!((h.matrix() - expected).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn bose_hubbard_examples() {
        let hard = BoseHubbardSpec { n_sites: 2, n_max: 1, j_hop: 1.0, u: 3.0 };
        let (_, l) = build_bose_hubbard(&hard).unwrap();
        assert!(l.max_abs() == 0.0);

        let spec = BoseHubbardSpec { n_sites: 2, n_max: 2, j_hop: 0.0, u: 1.7 };
        let (h, l) = build_bose_hubbard(&spec).unwrap();
        // |2,0> has index 2 * 3 + 0
        assert_eq!(l.diagonal()[6].re, 2.0);
        assert!((h.diagonal()[6].re - 1.7).abs() < 1e-15);

        let spec = BoseHubbardSpec { n_sites: 2, n_max: 3, j_hop: 1.0, u: 2.0 };
        let (h, l) = build_bose_hubbard(&spec).unwrap();
        assert!(h.is_hermitian());
        let n = spec.total_number().unwrap();
        assert!(h.commutator(&n).unwrap().max_abs() < 1e-12);
        assert!(l.commutator(&n).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn bose_hubbard_size_limit() {
        let spec = BoseHubbardSpec { n_sites: 8, n_max: 4, j_hop: 1.0, u: 1.0 };
        assert!(matches!(build_bose_hubbard(&spec), Err(Error::Size(_))));
    }

    #[test]
    fn kbody_matches_ising() {
        let spec = KBodySpec::pauli_string(3, &[PauliAxis::Z, PauliAxis::Z]).unwrap();
        let l = build_kbody(&spec).unwrap();
        let (_, li) = build_ising(&IsingSpec::uniform(3, 1.0).unwrap()).unwrap();
        assert_eq!(l.matrix(), li.matrix());
    }

    #[test]
    fn kbody_single_site_spectrum() {
        let spec = KBodySpec::pauli_string(4, &[PauliAxis::Z]).unwrap();
        let eig = eigh(&build_kbody(&spec).unwrap()).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for v in eig.values {
            *counts.entry(v.round() as i64).or_insert(0) += 1;
        }
        assert_eq!(counts.into_iter().collect::<Vec<_>>(), vec![(-4, 1), (-2, 4), (0, 6), (2, 4), (4, 1)]);
    }

    #[test]
    fn kbody_apply_matches_dense() {
        let spec = KBodySpec::pauli_string(4, &[PauliAxis::X, PauliAxis::Y]).unwrap();
        let l = build_kbody(&spec).unwrap();
        let v = CVector::from_fn(16, |i, _| C64::new(i as f64, 1.0 / (1.0 + i as f64)));
        let a = spec.apply(&v).unwrap();
        let b = l.apply(&v).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn digital_identity_small_k() {
        for (k, gt) in [(1, 0.4), (5, 1.3)] {
            let direct = hermitian_exp(&zx_string(k).unwrap(), gt).unwrap();
            assert!(max_diff(&ms_sandwich(gt, k).unwrap(), &direct) < 1e-10, "k={k}");
        }
        for k in [1, 3, 5, 7] {
            let direct = hermitian_exp(&zx_string(k).unwrap(), 0.7).unwrap();
            assert!(max_diff(&kbody_exponential_digital(1.0, 0.7, k).unwrap(), &direct) < 1e-10, "k={k}");
        }
        assert!(matches!(kbody_exponential_digital(1.0, 1.0, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn trotter_commuting_is_exact() {
        let z = pauli(PauliAxis::Z);
        let terms = [&z * 0.3, &z * 1.1];
        let exact = hermitian_exp(&z, 1.4 * 2.0).unwrap();
        assert!(max_diff(&trotter_evolve(&terms, 2.0, 5).unwrap(), &exact) < 1e-12);
    }
}
