//! Integrates the Lindblad equation for a stochastic model and checks it
//! against the exact Ising solution; also shows the two dissipator forms
//! agreeing for a non-Hermitian jump operator.
//!
//! cargo run --example lindblad_oracle

use noisesim::grid::TimeGrid;
use noisesim::ising_exact::{fidelity_curve, purity_curve, special_states};
use noisesim::metrics;
use noisesim::models::{ising_model, IsingSpec};
use noisesim::noise::NoiseSpec;
use noisesim::propagate::{dissipator, dissipator_lindblad_form, lindblad_oracle, oracle_step, Channel, StochasticModel};
use noisesim::qcore::{CMatrix, DenseOperator, DensityMatrix, C64};

fn main() -> noisesim::error::Result<()> {
    let (n, gamma) = (3, 0.2);
    let spec = IsingSpec::power_law(n, 5.0, 3.0, 0.0)?;
    let model = ising_model(&spec, NoiseSpec::real_white(gamma))?;
    let psi0 = special_states(n)?.product_plus;
    let grid = TimeGrid::covering(10.0, 0.01)?;
    let (n_sub, h) = oracle_step(&model, &grid)?;
    println!("RK4 step {h:.3e} ({n_sub} substeps per grid step)");

    let series = lindblad_oracle(&model, &psi0.projector(), &grid, 100)?;
    let f = fidelity_curve(&spec, &psi0.projector(), gamma, &series.times)?;
    let p = purity_curve(&spec, &psi0.projector(), gamma, &series.times)?;
    for (i, rho) in series.states.iter().enumerate() {
        println!(
            "t={:5.2}  F={:.8} (exact {:.8})  p={:.8} (exact {:.8})",
            series.times[i],
            metrics::fidelity(rho, &psi0)?,
            f[i],
            metrics::purity(rho),
            p[i]
        );
    }

    // L = sigma^-; equal amplitudes reduce the L-form to the double commutators.
    let l = DenseOperator::new(CMatrix::from_row_slice(2, 2, &[
        C64::new(0.0, 0.0), C64::new(1.0, 0.0),
        C64::new(0.0, 0.0), C64::new(0.0, 0.0),
    ]))?;
    let m = StochasticModel::new(DenseOperator::zeros(2)?, vec![Channel::new(l.clone(), NoiseSpec::complex_white(0.5))?])?;
    let rho = DensityMatrix::new(CMatrix::from_row_slice(2, 2, &[
        C64::new(0.3, 0.0), C64::new(0.1, 0.2),
        C64::new(0.1, -0.2), C64::new(0.7, 0.0),
    ]))?;
    let diff = dissipator(&m, rho.matrix()) - dissipator_lindblad_form(&l, 0.5, 0.5, rho.matrix());
    println!("double-commutator vs L-form: {:.2e}", diff.iter().fold(0.0f64, |a, z| a.max(z.norm())));
    Ok(())
}
