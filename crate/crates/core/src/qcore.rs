//! Dense complex linear algebra on small Hilbert spaces.
//!
//! Spin basis ordering is lexicographic over sites `(a_0, ..., a_{N-1})`,
//! site 0 most significant, with `a = +1` listed before `a = -1`. The same
//! mixed-radix convention applies to bosonic sites (occupation `0..=n_max`).
//! All quantities use `hbar = 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest Hilbert-space dimension the dense representation accepts.
pub const MAX_DIM: usize = 1 << 14;

/// Relative tolerance for asserting `M == M^dagger`.
pub const HERMITIAN_RTOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|c| (0..n).all(|r| r == c || m[(r, c)] == ZERO))
}

/// A square complex matrix acting on a finite Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    mat: CMatrix,
    hermitian: bool,
    diagonal: bool,
}

impl DenseOperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        let (r, c) = mat.shape();
        if r != c {
            return Err(Error::Dimension(format!("operator must be square, got {r}x{c}")));
        }
        if r == 0 {
            return Err(Error::Dimension("operator dimension must be at least 1".into()));
        }
        if r > MAX_DIM {
            return Err(Error::Size(format!("dimension {r} exceeds dense budget {MAX_DIM}")));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("operator has non-finite entries".into()));
        }
        Ok(Self::from_checked(mat))
    }

    fn from_checked(mat: CMatrix) -> Self {
        let scale = max_abs(&mat);
        let hermitian = hermiticity_defect(&mat) <= HERMITIAN_RTOL * scale;
        let diagonal = is_diagonal(&mat);
        Self { mat, hermitian, diagonal }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let v: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::new(CMatrix::from_diagonal(&CVector::from_vec(v)))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.mat)
    }

    pub fn require_hermitian(&self, what: &str) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::Convention(format!(
                "{what} is not Hermitian (max |M - M^dag| = {:.3e}, max |M| = {:.3e})",
                self.hermiticity_defect(),
                self.max_abs()
            )))
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.mat[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_checked(self.mat.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_checked(&self.mat * s)
    }

    pub fn kron(&self, other: &Self) -> Result<Self> {
        Self::new(self.mat.kronecker(&other.mat))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self::from_checked(mul_op_mat(self, &other.mat) - mul_mat_op(&other.mat, self)))
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vector length {} does not match operator dimension {}",
                v.len(),
                self.dim()
            )));
        }
        if self.diagonal {
            Ok(CVector::from_iterator(
                v.len(),
                v.iter().enumerate().map(|(i, z)| self.mat[(i, i)] * z),
            ))
        } else {
            Ok(&self.mat * v)
        }
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!("{} vs {}", self.dim(), other.dim())));
        }
        Ok(())
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        DenseOperator::from_checked(&self.mat + &rhs.mat)
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        DenseOperator::from_checked(&self.mat - &rhs.mat)
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        DenseOperator::from_checked(mul_op_mat(self, &rhs.mat))
    }
}

impl Mul<f64> for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: f64) -> DenseOperator {
        DenseOperator::from_checked(&self.mat * C64::new(rhs, 0.0))
    }
}

/// `op * m`, in O(d^2) when `op` is diagonal.
pub(crate) fn mul_op_mat(op: &DenseOperator, m: &CMatrix) -> CMatrix {
    if op.diagonal {
        let mut out = m.clone();
        for (r, mut row) in out.row_iter_mut().enumerate() {
            let d = op.mat[(r, r)];
            row *= d;
        }
        out
    } else {
        &op.mat * m
    }
}

/// `m * op`, in O(d^2) when `op` is diagonal.
pub(crate) fn mul_mat_op(m: &CMatrix, op: &DenseOperator) -> CMatrix {
    if op.diagonal {
        let mut out = m.clone();
        for (c, mut col) in out.column_iter_mut().enumerate() {
            let d = op.mat[(c, c)];
            col *= d;
        }
        out
    } else {
        m * &op.mat
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

pub fn eigh(op: &DenseOperator) -> Result<HermitianEigen> {
    op.require_hermitian("eigh input")?;
    eigh_matrix(&op.mat, op.diagonal)
}

pub(crate) fn eigh_matrix(m: &CMatrix, diagonal: bool) -> Result<HermitianEigen> {
    let n = m.nrows();
    let (values, vectors) = if diagonal {
        let vals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
        (vals, CMatrix::identity(n, n))
    } else {
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or_else(|| {
            Error::Numerical("Hermitian eigendecomposition did not converge".into())
        })?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(HermitianEigen { values: sorted_values, vectors: sorted_vectors })
}

/// `exp(-i * scale * H)` through the eigendecomposition of `H`.
pub fn hermitian_exp(h: &DenseOperator, scale: f64) -> Result<DenseOperator> {
    h.require_hermitian("generator")?;
    let u = exp_hermitian_matrix(&h.mat, h.diagonal, scale)?;
    Ok(DenseOperator::from_checked(u))
}

pub(crate) fn exp_hermitian_matrix(h: &CMatrix, diagonal: bool, scale: f64) -> Result<CMatrix> {
    let n = h.nrows();
    if diagonal {
        let phases: Vec<C64> = (0..n).map(|i| (-I * scale * h[(i, i)].re).exp()).collect();
        return Ok(CMatrix::from_diagonal(&CVector::from_vec(phases)));
    }
    let eig = eigh_matrix(h, false)?;
    let mut scaled = eig.vectors.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= (-I * scale * eig.values[c]).exp();
    }
    let u = scaled * eig.vectors.adjoint();
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("matrix exponential produced non-finite entries".into()));
    }
    Ok(u)
}

/// A pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: CVector,
}

/// Allowed deviation of a state norm from 1.
pub const NORM_TOL: f64 = 1e-9;

impl StateVector {
    /// Wraps amplitudes that are already normalized (within [`NORM_TOL`]).
    pub fn new(amps: CVector) -> Result<Self> {
        check_vector(&amps)?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Convention(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { amps })
    }

    pub fn normalize(amps: CVector) -> Result<Self> {
        check_vector(&amps)?;
        let norm = amps.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize the zero vector".into()));
        }
        Ok(Self { amps: amps / C64::new(norm, 0.0) })
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} >= dim {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = ONE;
        Self::new(v)
    }

    pub(crate) fn from_unchecked(amps: CVector) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { mat: &self.amps * self.amps.adjoint() }
    }

    pub fn expectation(&self, op: &DenseOperator) -> Result<C64> {
        Ok(self.amps.dotc(&op.apply(&self.amps)?))
    }
}

fn check_vector(v: &CVector) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Dimension("state dimension must be at least 1".into()));
    }
    if v.len() > MAX_DIM {
        return Err(Error::Size(format!("dimension {} exceeds dense budget", v.len())));
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("state has non-finite amplitudes".into()));
    }
    Ok(())
}

/// Tolerances a [`DensityMatrix`] must satisfy.
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
pub const DENSITY_TRACE_TOL: f64 = 1e-9;
pub const DENSITY_POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(mat);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!("invalid dimension {dim}")));
        }
        Ok(Self { mat: CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0) })
    }

    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.mat.shape();
        if r != c || r == 0 {
            return Err(Error::Dimension(format!("density matrix shape {r}x{c}")));
        }
        if self.mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("density matrix has non-finite entries".into()));
        }
        let herm = hermiticity_defect(&self.mat);
        if herm > DENSITY_HERMITIAN_TOL {
            return Err(Error::Convention(format!("density matrix not Hermitian ({herm:.3e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > DENSITY_TRACE_TOL || tr.im.abs() > DENSITY_TRACE_TOL {
            return Err(Error::Convention(format!("density matrix trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue()?;
        if min < -DENSITY_POSITIVITY_TOL {
            return Err(Error::Convention(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// `Tr(rho^2)`, using Hermiticity: `sum |rho_ij|^2`.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.mat)
    }

    fn hermitian_part(&self) -> CMatrix {
        (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let h = self.hermitian_part();
        let diag = is_diagonal(&h);
        Ok(eigh_matrix(&h, diag)?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Half the trace norm of `self - other`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!("{} vs {}", self.dim(), other.dim())));
        }
        let diff = DensityMatrix { mat: &self.mat - &other.mat };
        let vals = diff.eigenvalues()?;
        Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }
}

/// Rejects non-increasing or out-of-range site lists and returns the
/// full-space strides.
fn embedding_layout(op_dim: usize, sites: &[usize], local_dims: &[usize]) -> Result<(usize, Vec<usize>)> {
    if local_dims.is_empty() || local_dims.contains(&0) {
        return Err(Error::InvalidArgument("local dimensions must be positive".into()));
    }
    if sites.is_empty() {
        return Err(Error::InvalidArgument("at least one site is required".into()));
    }
    for w in sites.windows(2) {
        if w[0] == w[1] {
            return Err(Error::InvalidArgument(format!("repeated site index {}", w[0])));
        }
        if w[0] > w[1] {
            return Err(Error::InvalidArgument("site indices must be strictly increasing".into()));
        }
    }
    if let Some(&s) = sites.iter().find(|&&s| s >= local_dims.len()) {
        return Err(Error::InvalidArgument(format!("site {s} out of range")));
    }
    let full = local_dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d).filter(|&x| x <= MAX_DIM))
        .ok_or_else(|| Error::Size(format!("product of local dims {local_dims:?} exceeds {MAX_DIM}")))?;
    let sub: usize = sites.iter().map(|&s| local_dims[s]).product();
    if sub != op_dim {
        return Err(Error::Dimension(format!(
            "operator dimension {op_dim} does not match product {sub} of local dims at sites {sites:?}"
        )));
    }
    let mut strides = vec![1usize; local_dims.len()];
    for i in (0..local_dims.len() - 1).rev() {
        strides[i] = strides[i + 1] * local_dims[i + 1];
    }
    Ok((full, strides))
}

/// For each full index, the operator-local index and the full index with
/// the embedded sites zeroed; plus the full-space offset of each local index.
struct EmbedIndex {
    local: Vec<usize>,
    base: Vec<usize>,
    offsets: Vec<usize>,
}

fn embed_index(op_dim: usize, sites: &[usize], local_dims: &[usize]) -> Result<EmbedIndex> {
    let (full, strides) = embedding_layout(op_dim, sites, local_dims)?;
    let sub_dims: Vec<usize> = sites.iter().map(|&s| local_dims[s]).collect();
    let mut offsets = vec![0usize; op_dim];
    for (cs, off) in offsets.iter_mut().enumerate() {
        let mut rem = cs;
        for k in (0..sites.len()).rev() {
            *off += (rem % sub_dims[k]) * strides[sites[k]];
            rem /= sub_dims[k];
        }
    }
    let mut local = vec![0usize; full];
    let mut base = vec![0usize; full];
    for r in 0..full {
        let mut rs = 0;
        let mut b = r;
        for (k, &s) in sites.iter().enumerate() {
            let digit = (r / strides[s]) % local_dims[s];
            rs = rs * sub_dims[k] + digit;
            b -= digit * strides[s];
        }
        local[r] = rs;
        base[r] = b;
    }
    Ok(EmbedIndex { local, base, offsets })
}

/// Places `op` on `sites` of a register with the given per-site
/// dimensions, acting as the identity elsewhere.
pub fn embed(op: &DenseOperator, sites: &[usize], local_dims: &[usize]) -> Result<DenseOperator> {
    let idx = embed_index(op.dim(), sites, local_dims)?;
    let full = idx.local.len();
    let mut m = CMatrix::zeros(full, full);
    for r in 0..full {
        let rs = idx.local[r];
        for (cs, off) in idx.offsets.iter().enumerate() {
            let v = op.mat[(rs, cs)];
            if v != ZERO {
                m[(r, idx.base[r] + off)] = v;
            }
        }
    }
    DenseOperator::new(m)
}

/// `embed(op, sites, local_dims) * v` without forming the full matrix.
pub fn embed_apply(
    op: &DenseOperator,
    sites: &[usize],
    local_dims: &[usize],
    v: &CVector,
) -> Result<CVector> {
    let idx = embed_index(op.dim(), sites, local_dims)?;
    let full = idx.local.len();
    if v.len() != full {
        return Err(Error::Dimension(format!("vector length {} vs register dim {full}", v.len())));
    }
    let mut out = CVector::zeros(full);
    for r in 0..full {
        let rs = idx.local[r];
        let mut acc = ZERO;
        for (cs, off) in idx.offsets.iter().enumerate() {
            acc += op.mat[(rs, cs)] * v[idx.base[r] + off];
        }
        out[r] = acc;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// Pauli matrix in the `|+1>, |-1>` basis.
pub fn pauli(axis: PauliAxis) -> DenseOperator {
    let m = match axis {
        PauliAxis::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        PauliAxis::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        PauliAxis::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    };
    DenseOperator::from_checked(m)
}

/// Truncated single-mode ladder operators on `|0>, ..., |n_max>`.
#[derive(Clone, Debug)]
pub struct BosonOps {
    pub annihilation: DenseOperator,
    pub creation: DenseOperator,
    pub number: DenseOperator,
}

pub fn boson_ops(n_max: usize) -> Result<BosonOps> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let d = n_max + 1;
    let mut b = CMatrix::zeros(d, d);
    for n in 1..d {
        b[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let number = CMatrix::from_diagonal(&CVector::from_iterator(d, (0..d).map(|n| C64::new(n as f64, 0.0))));
    Ok(BosonOps {
        creation: DenseOperator::new(b.adjoint())?,
        annihilation: DenseOperator::new(b)?,
        number: DenseOperator::new(number)?,
    })
}

/// Kronecker product of a non-empty list, first factor most significant.
pub fn kron_all(ops: &[DenseOperator]) -> Result<DenseOperator> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty Kronecker product".into()))?;
    rest.iter().try_fold(first.clone(), |acc, op| acc.kron(op))
}
