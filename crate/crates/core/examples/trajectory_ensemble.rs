//! Averages unitary trajectories of a noisy Ising chain and compares the
//! ensemble fidelity with the closed-form master-equation solution.
//!
//! cargo run --example trajectory_ensemble

use noisesim::grid::TimeGrid;
use noisesim::ising_exact::{fidelity_curve, special_states};
use noisesim::models::{ising_model, IsingSpec};
use noisesim::noise::NoiseSpec;
use noisesim::propagate::{run_ensemble, EnsembleOptions, InitialState};

fn main() -> noisesim::error::Result<()> {
    let (n, gamma) = (4, 0.2);
    let spec = IsingSpec::power_law(n, 5.0, 1.0, 0.0)?;
    let model = ising_model(&spec, NoiseSpec::real_white(gamma))?;
    let psi0 = special_states(n)?.product_plus;

    let grid = TimeGrid::covering(4.0, 1e-3)?;
    let mut options = EnsembleOptions::new(2_000, 42);
    options.output_stride = 250;
    options.purity_stderr = true;
    let res = run_ensemble(&model, &InitialState::Pure(psi0.clone()), &grid, &options)?;
    let exact = fidelity_curve(&spec, &psi0.projector(), gamma, &res.times)?;

    println!("{:>6} {:>10} {:>10} {:>8} {:>10}", "t", "F_traj", "F_exact", "z", "purity");
    let se_p = res.purity_stderr.as_ref().expect("requested");
    for i in 0..res.times.len() {
        let se = res.fidelity_stderr[i];
        let z = if se > 0.0 { (res.fidelity[i] - exact[i]) / se } else { 0.0 };
        println!(
            "{:>6.2} {:>10.6} {:>10.6} {:>8.2} {:>7.4}+-{:.4}",
            res.times[i], res.fidelity[i], exact[i], z, res.purity[i], se_p[i]
        );
    }
    Ok(())
}
