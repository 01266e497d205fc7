use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::KernelSpec;
use crate::qcore::{eigh, CMatrix, DensityMatrix, C64};

use super::lindblad::{check_oracle_model, oracle_step};
use super::{check_rho0, DensitySeries, StochasticModel};

#[derive(Clone, Debug)]
pub struct NonMarkovSolution {
    pub series: DensitySeries,
    /// Non-fatal diagnostics, e.g. a correlation time unresolved by the grid.
    pub warnings: Vec<String>,
}

/// `Phi(omega, t) = int_0^t K(s) exp(-i omega s) ds` for one channel.
enum Memory {
    /// White noise: half the delta function lies inside `[0, t]`.
    White,
    /// `K(s) = exp(-s/tau)/(2 tau)`, integrated in closed form.
    OrnsteinUhlenbeck { tau: f64 },
    /// Stationary table at the grid spacing, integrated by the trapezoid rule.
    Tabulated { values: Vec<f64>, h: f64 },
}

impl Memory {
    fn phi(&self, omega: f64, step: usize, t: f64) -> C64 {
        match self {
            Memory::White => C64::new(0.5, 0.0),
            Memory::OrnsteinUhlenbeck { tau } => {
                let z = C64::new(1.0 / tau, omega);
                let e = (-z * t).exp();
                (C64::new(1.0, 0.0) - e) / z / (2.0 * tau)
            }
            Memory::Tabulated { values, h } => {
                if step == 0 {
                    return C64::new(0.0, 0.0);
                }
                let f = |j: usize| C64::from_polar(values[j], -omega * j as f64 * h);
                let mut acc = (f(0) + f(step)) * 0.5;
                for j in 1..step {
                    acc += f(j);
                }
                acc * *h
            }
        }
    }
}

struct Term {
    rate: f64,
    /// Channel operator in the eigenbasis of `H_T`.
    op: CMatrix,
    memory: usize,
}

/// Integrates the time-local second-order memory equation
///
/// `d rho/dt = -i[H_T, rho] - sum (gamma' [A, [G_A(t), rho]] + gamma'' [B, [G_B(t), rho]])`,
///
/// with `G_X(t) = int_0^t K(s) e^{-i H_T s} X e^{i H_T s} ds`, by Heun's
/// method with the memory operator evaluated at each stage time. Work is
/// done in the interaction picture and eigenbasis of `H_T`, where `G_X` is
/// an elementwise product.
pub fn nonmarkov_oracle(
    model: &StochasticModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    output_stride: usize,
) -> Result<NonMarkovSolution> {
    check_oracle_model(model)?;
    check_rho0(model, rho0)?;
    let model = model.unframed()?;
    let h = model
        .hamiltonian()
        .as_static()
        .ok_or_else(|| Error::Unsupported("the memory-kernel oracle needs a time-independent H_T".into()))?;
    let mut warnings = Vec::new();
    let mut memories = Vec::new();
    let mut tabulated = false;
    for (i, ch) in model.channels().iter().enumerate() {
        let mem = match &ch.noise().kernel {
            None => Memory::White,
            Some(KernelSpec::OrnsteinUhlenbeck { tau_c }) => {
                if *tau_c < 5.0 * grid.dt() {
                    warnings.push(format!(
                        "channel {i}: correlation time {tau_c} is below 5 dt = {}; the memory is unresolved on this grid",
                        5.0 * grid.dt()
                    ));
                }
                Memory::OrnsteinUhlenbeck { tau: *tau_c }
            }
            Some(k @ KernelSpec::Tabulated { .. }) => {
                tabulated = true;
                let values = (0..=grid.n_steps())
                    .map(|j| k.stationary_value(j as f64 * grid.dt()))
                    .collect::<Result<Vec<_>>>()?;
                if let KernelSpec::Tabulated { dt, .. } = k {
                    if (dt - grid.dt()).abs() > 1e-12 * grid.dt() {
                        return Err(Error::Kernel(format!(
                            "kernel table spacing {dt} differs from simulation dt {}",
                            grid.dt()
                        )));
                    }
                }
                Memory::Tabulated { values, h: grid.dt() }
            }
            Some(KernelSpec::TabulatedMatrix { .. }) => {
                return Err(Error::Unsupported(format!(
                    "channel {i} has a non-stationary kernel; the memory-kernel oracle needs K(t, t') = K(t - t')"
                )))
            }
        };
        memories.push(mem);
    }

    let eig = eigh(h)?;
    let v = &eig.vectors;
    let vd = v.adjoint();
    let energies = &eig.values;
    let d = model.dim();
    let mut terms = Vec::new();
    for (i, ch) in model.channels().iter().enumerate() {
        let (g_re, g_im) = ch.noise().amplitudes();
        if g_re > 0.0 {
            terms.push(Term { rate: g_re, op: &vd * ch.a_op().matrix() * v, memory: i });
        }
        if let Some(b) = ch.active_b() {
            terms.push(Term { rate: g_im, op: &vd * b.matrix() * v, memory: i });
        }
    }

    // With a tabulated kernel the memory is only known on grid points.
    let (n_sub, hstep) = if tabulated { (1, grid.dt()) } else { oracle_step(&model, grid)? };

    let memory_ops = |step: usize, t: f64| -> Vec<CMatrix> {
        terms
            .iter()
            .map(|term| {
                let mem = &memories[term.memory];
                CMatrix::from_fn(d, d, |k, l| {
                    let x = term.op[(k, l)];
                    if x == C64::new(0.0, 0.0) {
                        x
                    } else {
                        x * mem.phi(energies[k] - energies[l], step, t)
                    }
                })
            })
            .collect()
    };
    // Interaction picture: Y_I(t)_kl = Y_kl exp(i (E_k - E_l) t), so the
    // coherent part is exact and only the memory term is stepped.
    let rotate = |y: &CMatrix, t: f64| -> CMatrix {
        CMatrix::from_fn(d, d, |k, l| y[(k, l)] * C64::from_polar(1.0, (energies[k] - energies[l]) * t))
    };
    let rhs = |t: f64, rho: &CMatrix, g: &[CMatrix]| -> CMatrix {
        let mut out = CMatrix::zeros(d, d);
        for (term, gm) in terms.iter().zip(g) {
            let gi = rotate(gm, t);
            let xi = rotate(&term.op, t);
            let inner = &gi * rho - rho * &gi;
            out -= (&xi * &inner - &inner * &xi) * C64::new(term.rate, 0.0);
        }
        out
    };

    let outputs = grid.output_indices(output_stride);
    let mut next = outputs.iter().peekable();
    let mut rho = &vd * rho0.matrix() * v;
    let mut t_now = 0.0;
    let mut states = Vec::with_capacity(outputs.len());
    let mut g_now = memory_ops(0, 0.0);
    let mut sub_index = 0usize;
    for j in 0..=grid.n_steps() {
        if j > 0 {
            for _ in 0..n_sub {
                sub_index += 1;
                let t_next = sub_index as f64 * hstep;
                let g_next = memory_ops(sub_index, t_next);
                let k1 = rhs(t_now, &rho, &g_now);
                let predictor = &rho + &k1 * C64::new(hstep, 0.0);
                let k2 = rhs(t_next, &predictor, &g_next);
                rho += (k1 + k2) * C64::new(0.5 * hstep, 0.0);
                g_now = g_next;
                t_now = t_next;
            }
            if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!("memory-kernel oracle became non-finite at step {j}")));
            }
        }
        if next.peek() == Some(&&j) {
            next.next();
            let back = v * rotate(&rho, -grid.time(j)) * &vd;
            states.push(DensityMatrix::from_matrix_unchecked(back));
        }
    }
    Ok(NonMarkovSolution {
        series: DensitySeries { times: outputs.iter().map(|&j| grid.time(j)).collect(), states },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::propagate::{lindblad_oracle, Channel};
    use crate::qcore::{pauli, CVector, DenseOperator, PauliAxis, StateVector};

    fn plus() -> StateVector {
        StateVector::normalize(CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])).unwrap()
    }

    #[test]
    fn pure_dephasing_closed_form() {
        let (gamma, tau, w0) = (0.8, 0.3, 1.5);
        let z = pauli(PauliAxis::Z);
        let model = StochasticModel::new(
            &z * w0,
            vec![Channel::new(z, NoiseSpec::real_colored(gamma, KernelSpec::OrnsteinUhlenbeck { tau_c: tau })).unwrap()],
        )
        .unwrap();
        let grid = TimeGrid::new(0.01, 200).unwrap();
        let sol = nonmarkov_oracle(&model, &plus().projector(), &grid, 20).unwrap();
        assert!(sol.warnings.is_empty());
        for (t, rho) in sol.series.times.iter().zip(&sol.series.states) {
            let decay = (-gamma * 4.0 * (t - tau * (1.0 - (-t / tau).exp())) / 2.0).exp();
            let expected = C64::from_polar(0.5 * decay, -2.0 * w0 * t);
            assert!((rho.matrix()[(0, 1)] - expected).norm() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn white_channels_match_lindblad() {
        let model = StochasticModel::new(
            pauli(PauliAxis::X),
            vec![Channel::new(pauli(PauliAxis::Z), NoiseSpec::real_white(0.4)).unwrap()],
        )
        .unwrap();
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let nm = nonmarkov_oracle(&model, &plus().projector(), &grid, 10).unwrap();
        let lb = lindblad_oracle(&model, &plus().projector(), &grid, 10).unwrap();
        for (a, b) in nm.series.states.iter().zip(&lb.states) {
            assert!(a.max_abs_diff(b) < 1e-6);
        }
    }

    #[test]
    fn zero_rate_is_unitary() {
        let model = StochasticModel::new(
            pauli(PauliAxis::X),
            vec![Channel::new(
                pauli(PauliAxis::Z),
                NoiseSpec::real_colored(0.0, KernelSpec::OrnsteinUhlenbeck { tau_c: 0.5 }),
            )
            .unwrap()],
        )
        .unwrap();
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let psi0 = StateVector::basis(2, 0).unwrap();
        let sol = nonmarkov_oracle(&model, &psi0.projector(), &grid, 100).unwrap();
        let u = crate::qcore::hermitian_exp(&pauli(PauliAxis::X), 1.0).unwrap();
        let psi = StateVector::normalize(u.apply(psi0.amplitudes()).unwrap()).unwrap();
        assert!(sol.series.states.last().unwrap().max_abs_diff(&psi.projector()) < 1e-10);
    }

    #[test]
    fn rejects_nonstationary_and_time_dependent() {
        let z = pauli(PauliAxis::Z);
        let kernel = KernelSpec::TabulatedMatrix { values: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        let model = StochasticModel::new(
            DenseOperator::zeros(2).unwrap(),
            vec![Channel::new(z.clone(), NoiseSpec::real_colored(1.0, kernel)).unwrap()],
        )
        .unwrap();
        let grid = TimeGrid::new(0.1, 2).unwrap();
        assert!(matches!(nonmarkov_oracle(&model, &plus().projector(), &grid, 1), Err(Error::Unsupported(_))));
        let zf = z.clone();
        let td = StochasticModel::time_dependent(
            2,
            std::sync::Arc::new(move |t| &zf * t),
            vec![Channel::new(z, NoiseSpec::real_white(1.0)).unwrap()],
        )
        .unwrap();
        assert!(matches!(nonmarkov_oracle(&td, &plus().projector(), &grid, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn short_correlation_time_warns() {
        let model = StochasticModel::new(
            DenseOperator::zeros(2).unwrap(),
            vec![Channel::new(
                pauli(PauliAxis::Z),
                NoiseSpec::real_colored(1.0, KernelSpec::OrnsteinUhlenbeck { tau_c: 0.01 }),
            )
            .unwrap()],
        )
        .unwrap();
        let grid = TimeGrid::new(0.01, 5).unwrap();
        let sol = nonmarkov_oracle(&model, &plus().projector(), &grid, 1).unwrap();
        assert_eq!(sol.warnings.len(), 1);
    }
}
