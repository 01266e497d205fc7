use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::qcore::{mul_mat_op, mul_op_mat, CMatrix, DenseOperator, DensityMatrix, C64};

use super::{check_rho0, inf_norm, DensitySeries, StochasticModel};

/// Largest dimension the dense oracles accept.
pub const ORACLE_MAX_DIM: usize = 1 << 10;

const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Which coding of the dissipator the oracle integrates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DissipatorForm {
    /// `-(gamma'/2)[A,[A,rho]] - (gamma''/2)[B,[B,rho]]`.
    #[default]
    DoubleCommutator,
    /// The same generator written directly in terms of `L` and `L^dag`.
    LindbladForm,
}

fn commutator(op: &DenseOperator, rho: &CMatrix) -> CMatrix {
    mul_op_mat(op, rho) - mul_mat_op(rho, op)
}

fn double_commutator(op: &DenseOperator, rho: &CMatrix) -> CMatrix {
    commutator(op, &commutator(op, rho))
}

/// `D(rho) = sum -(gamma'/2)[A,[A,rho]] - (gamma''/2)[B,[B,rho]]`.
pub fn dissipator(model: &StochasticModel, rho: &CMatrix) -> CMatrix {
    let n = rho.nrows();
    let mut out = CMatrix::zeros(n, n);
    for ch in model.channels() {
        let (g_re, g_im) = ch.noise().amplitudes();
        if g_re > 0.0 {
            out -= double_commutator(ch.a_op(), rho) * C64::new(0.5 * g_re, 0.0);
        }
        if let Some(b) = ch.active_b() {
            out -= double_commutator(b, rho) * C64::new(0.5 * g_im, 0.0);
        }
    }
    out
}

/// Unequal-amplitude dissipator of a single channel in terms of `L`:
///
/// `((g'-g'')/4) [L rho L + L^dag rho L^dag - {L L + L^dag L^dag, rho}/2]
///  + ((g'+g'')/4) [L^dag rho L + L rho L^dag - {L^dag L + L L^dag, rho}/2]`.
pub fn dissipator_lindblad_form(l: &DenseOperator, gamma_prime: f64, gamma_double_prime: f64, rho: &CMatrix) -> CMatrix {
    let l = l.matrix();
    let ld = l.adjoint();
    let anti = |x: &CMatrix| x * rho + rho * x;
    let half = C64::new(0.5, 0.0);
    let same = l * rho * l + &ld * rho * &ld - anti(&(l * l + &ld * &ld)) * half;
    let cross = &ld * rho * l + l * rho * &ld - anti(&(&ld * l + l * &ld)) * half;
    same * C64::new(0.25 * (gamma_prime - gamma_double_prime), 0.0)
        + cross * C64::new(0.25 * (gamma_prime + gamma_double_prime), 0.0)
}

fn dissipator_with(model: &StochasticModel, rho: &CMatrix, form: DissipatorForm) -> CMatrix {
    match form {
        DissipatorForm::DoubleCommutator => dissipator(model, rho),
        DissipatorForm::LindbladForm => {
            let n = rho.nrows();
            let mut out = CMatrix::zeros(n, n);
            for ch in model.channels() {
                let (g_re, g_im) = ch.noise().amplitudes();
                out += dissipator_lindblad_form(ch.lindblad_op(), g_re, g_im, rho);
            }
            out
        }
    }
}

/// `d rho / dt = -i[H_T(t), rho] + D(rho)`.
pub fn generator(model: &StochasticModel, t: f64, rho: &DensityMatrix) -> Result<CMatrix> {
    if rho.dim() != model.dim() {
        return Err(Error::Dimension(format!("rho dimension {} vs model {}", rho.dim(), model.dim())));
    }
    let model = model.unframed()?;
    let h = model.hamiltonian().at(t)?;
    Ok(commutator(&h, rho.matrix()) * MINUS_I + dissipator(&model, rho.matrix()))
}

/// Internal step `h` and substeps per grid step:
/// `h <= min(dt, 1e-3 / max(gamma ||L||^2), 0.01 / ||H_T||_inf)`.
pub fn oracle_step(model: &StochasticModel, grid: &TimeGrid) -> Result<(usize, f64)> {
    let dt = grid.dt();
    let mut cap = dt;
    let rate = model.max_rate()?;
    if rate > 0.0 {
        cap = cap.min(1e-3 / rate);
    }
    let h_norm = inf_norm(model.hamiltonian().at(0.0)?.matrix());
    if h_norm > 0.0 {
        cap = cap.min(0.01 / h_norm);
    }
    let n_sub = ((dt / cap) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((n_sub, dt / n_sub as f64))
}

pub(crate) fn check_oracle_model(model: &StochasticModel) -> Result<()> {
    if model.dim() > ORACLE_MAX_DIM {
        return Err(Error::Size(format!(
            "oracle refuses dimension {} (limit {ORACLE_MAX_DIM})",
            model.dim()
        )));
    }
    Ok(())
}

/// Integrates the Lindblad equation by RK4 on the grid, reporting every
/// `output_stride`-th grid point.
pub fn lindblad_oracle(
    model: &StochasticModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    output_stride: usize,
) -> Result<DensitySeries> {
    lindblad_oracle_with(model, rho0, grid, output_stride, DissipatorForm::DoubleCommutator)
}

pub fn lindblad_oracle_with(
    model: &StochasticModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    output_stride: usize,
    form: DissipatorForm,
) -> Result<DensitySeries> {
    check_oracle_model(model)?;
    check_rho0(model, rho0)?;
    if let Some((i, _)) = model.channels().iter().enumerate().find(|(_, c)| !c.noise().kind.is_white()) {
        return Err(Error::Unsupported(format!(
            "channel {i} is colored; the Lindblad oracle needs white noise"
        )));
    }
    let model = model.unframed()?;
    let (n_sub, h) = oracle_step(&model, grid)?;
    let static_h = model.hamiltonian().as_static().cloned();
    let rhs = |t: f64, rho: &CMatrix| -> Result<CMatrix> {
        let unitary = match &static_h {
            Some(hm) => commutator(hm, rho),
            None => commutator(&model.hamiltonian().at(t)?, rho),
        };
        Ok(unitary * MINUS_I + dissipator_with(&model, rho, form))
    };
    let outputs = grid.output_indices(output_stride);
    let mut next = outputs.iter().peekable();
    let mut rho = rho0.matrix().clone();
    let mut states = Vec::with_capacity(outputs.len());
    let c = |x: f64| C64::new(x, 0.0);
    for j in 0..=grid.n_steps() {
        if j > 0 {
            let t0 = grid.time(j - 1);
            for s in 0..n_sub {
                let t = t0 + s as f64 * h;
                let k1 = rhs(t, &rho)?;
                let k2 = rhs(t + 0.5 * h, &(&rho + &k1 * c(0.5 * h)))?;
                let k3 = rhs(t + 0.5 * h, &(&rho + &k2 * c(0.5 * h)))?;
                let k4 = rhs(t + h, &(&rho + &k3 * c(h)))?;
                rho += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0);
            }
            if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!("oracle state became non-finite at step {j}")));
            }
        }
        if next.peek() == Some(&&j) {
            next.next();
            states.push(DensityMatrix::from_matrix_unchecked(rho.clone()));
        }
    }
    Ok(DensitySeries { times: outputs.iter().map(|&j| grid.time(j)).collect(), states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{KernelSpec, NoiseSpec};
    use crate::propagate::Channel;
    use crate::qcore::{pauli, CVector, PauliAxis, StateVector};

    fn plus() -> StateVector {
        StateVector::normalize(CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])).unwrap()
    }

    #[test]
    fn single_qubit_dephasing() {
        let gamma = 0.3;
        let model = StochasticModel::new(
            DenseOperator::zeros(2).unwrap(),
            vec![Channel::new(pauli(PauliAxis::Z), NoiseSpec::real_white(gamma)).unwrap()],
        )
        .unwrap();
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let out = lindblad_oracle(&model, &plus().projector(), &grid, 10).unwrap();
        for (t, rho) in out.times.iter().zip(&out.states) {
            let expected = 0.5 * (-2.0 * gamma * t).exp();
            assert!((rho.matrix()[(0, 1)].re - expected).abs() < 1e-12);
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unital_for_hermitian_channels() {
        let x = pauli(PauliAxis::X);
        let model = StochasticModel::new(
            pauli(PauliAxis::Z),
            vec![Channel::new(x, NoiseSpec::real_white(0.7)).unwrap()],
        )
        .unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let d = dissipator(&model, mixed.matrix());
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn colored_channel_unsupported() {
        let model = StochasticModel::new(
            DenseOperator::zeros(2).unwrap(),
            vec![Channel::new(
                pauli(PauliAxis::Z),
                NoiseSpec::real_colored(1.0, KernelSpec::OrnsteinUhlenbeck { tau_c: 0.1 }),
            )
            .unwrap()],
        )
        .unwrap();
        let grid = TimeGrid::new(0.01, 10).unwrap();
        assert!(matches!(lindblad_oracle(&model, &plus().projector(), &grid, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn lindblad_form_reduces_to_double_commutator() {
        let z = pauli(PauliAxis::Z);
        let rho = plus().projector();
        let a = dissipator_lindblad_form(&z, 0.4, 0.0, rho.matrix());
        let b = double_commutator(&z, rho.matrix()) * C64::new(-0.2, 0.0);
        assert!((a - b).iter().all(|w| w.norm() < 1e-15));
    }
}
