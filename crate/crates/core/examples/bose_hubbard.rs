//! Bose-Hubbard dimer with the long-range number-fluctuation channel
//! `L = sum n (n - 1)`: trajectories against the master equation, with the
//! total particle number checked along single trajectories.
//!
//! cargo run --example bose_hubbard

use noisesim::grid::TimeGrid;
use noisesim::metrics;
use noisesim::models::{bose_hubbard_model, BoseHubbardSpec};
use noisesim::noise::NoiseSpec;
use noisesim::propagate::{
    evolve_trajectory, lindblad_oracle, run_ensemble, sample_channel_noise, EnsembleOptions, InitialState,
};
use noisesim::qcore::{CVector, StateVector, C64};

fn main() -> noisesim::error::Result<()> {
    let spec = BoseHubbardSpec { n_sites: 2, n_max: 3, j_hop: 1.0, u: 2.0 };
    let model = bose_hubbard_model(&spec, NoiseSpec::real_white(0.1))?;
    let number = spec.total_number()?;

    let mut v = CVector::zeros(spec.dim()?);
    for (n1, n2) in [(2usize, 0usize), (1, 1), (0, 2)] {
        v[n1 * (spec.n_max + 1) + n2] = C64::new(1.0, 0.0);
    }
    let psi0 = StateVector::normalize(v)?;

    let grid = TimeGrid::covering(2.0, 0.01)?;
    let mut options = EnsembleOptions::new(1_000, 11);
    options.output_stride = 20;
    let ens = run_ensemble(&model, &InitialState::Pure(psi0.clone()), &grid, &options)?;
    let oracle = lindblad_oracle(&model, &psi0.projector(), &grid, 20)?;
    for (i, t) in ens.times.iter().enumerate() {
        println!(
            "t={t:.1}  F_traj={:.4}+-{:.4}  F_lindblad={:.4}",
            ens.fidelity[i],
            ens.fidelity_stderr[i],
            metrics::fidelity(&oracle.states[i], &psi0)?
        );
    }

    let mut drift: f64 = 0.0;
    for m in 0..20 {
        let noise = sample_channel_noise(&model, &grid, 11, m)?;
        for s in evolve_trajectory(&model, &psi0, &grid, &noise)? {
            drift = drift.max((s.expectation(&number)?.re - 2.0).abs());
        }
    }
    println!("max |<N> - 2| over 20 trajectories: {drift:.2e}");
    Ok(())
}
