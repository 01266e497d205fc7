//! Ornstein-Uhlenbeck noise on a Bose-Hubbard dimer: the memory-kernel
//! oracle against the Markovian one as the correlation time shrinks, and a
//! trajectory ensemble driven by the same colored noise.
//!
//! cargo run --example colored_noise

use noisesim::grid::TimeGrid;
use noisesim::models::{bose_hubbard_model, BoseHubbardSpec};
use noisesim::noise::{KernelSpec, NoiseSpec};
use noisesim::propagate::{lindblad_oracle, nonmarkov_oracle, run_ensemble, EnsembleOptions, InitialState};
use noisesim::qcore::StateVector;

fn main() -> noisesim::error::Result<()> {
    let spec = BoseHubbardSpec { n_sites: 2, n_max: 2, j_hop: 1.0, u: 2.0 };
    let gamma = 0.3;
    // |2, 0> in the 3 x 3 Fock basis.
    let psi0 = StateVector::basis(9, 6)?;
    let grid = TimeGrid::covering(3.0, 1e-3)?;
    let white = lindblad_oracle(&bose_hubbard_model(&spec, NoiseSpec::real_white(gamma))?, &psi0.projector(), &grid, 500)?;

    for tau_c in [0.5, 0.1, 0.02, 0.005] {
        let ou = NoiseSpec::real_colored(gamma, KernelSpec::OrnsteinUhlenbeck { tau_c });
        let model = bose_hubbard_model(&spec, ou)?;
        let sol = nonmarkov_oracle(&model, &psi0.projector(), &grid, 500)?;
        let dist = sol
            .series
            .states
            .iter()
            .zip(&white.states)
            .map(|(a, b)| a.trace_distance(b))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        println!("tau_c = {tau_c:<6} max trace distance to Lindblad = {dist:.3e}");
        for w in &sol.warnings {
            println!("  warning: {w}");
        }
    }

    let tau_c = 0.1;
    let model = bose_hubbard_model(&spec, NoiseSpec::real_colored(gamma, KernelSpec::OrnsteinUhlenbeck { tau_c }))?;
    let mut options = EnsembleOptions::new(400, 5);
    options.output_stride = 500;
    let ens = run_ensemble(&model, &InitialState::Pure(psi0.clone()), &grid, &options)?;
    let memory = nonmarkov_oracle(&model, &psi0.projector(), &grid, 500)?;
    for (i, t) in ens.times.iter().enumerate() {
        let f_oracle = (memory.series.states[i].matrix() * psi0.projector().matrix()).trace().re;
        println!(
            "t={t:.1}  trajectories F={:.4}+-{:.4}  memory-kernel oracle F={f_oracle:.4}",
            ens.fidelity[i], ens.fidelity_stderr[i]
        );
    }
    Ok(())
}
