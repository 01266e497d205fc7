//! Digital k-body noise from two Molmer-Sorensen gates around a local
//! rotation, and the first-order Trotter error.
//!
//! cargo run --example digital_kbody

use noisesim::grid::TimeGrid;
use noisesim::models::{
    digital_kbody_model, kbody_exponential_digital, ms_sandwich, ms_sandwich_sign, trotter_evolve, zx_string,
};
use noisesim::noise::NoiseSpec;
use noisesim::propagate::{lindblad_oracle, run_ensemble, EnsembleOptions, InitialState};
use noisesim::qcore::{embed, hermitian_exp, pauli, PauliAxis, StateVector};

fn main() -> noisesim::error::Result<()> {
    for k in [3usize, 5, 7] {
        let gt = 0.7;
        let target = hermitian_exp(&zx_string(k)?, gt)?;
        println!(
            "k={k}: sign {:+}, literal sandwich error {:.2e}, corrected error {:.2e}",
            ms_sandwich_sign(k),
            (&ms_sandwich(gt, k)? - &target).max_abs(),
            (&kbody_exponential_digital(gt, 1.0, k)? - &target).max_abs()
        );
    }

    let dims = [2usize, 2];
    let zz = &embed(&pauli(PauliAxis::Z), &[0], &dims)? * &embed(&pauli(PauliAxis::Z), &[1], &dims)?;
    let x = &embed(&pauli(PauliAxis::X), &[0], &dims)? + &embed(&pauli(PauliAxis::X), &[1], &dims)?;
    let exact = hermitian_exp(&(&zz + &x), 1.0)?;
    let mut prev: Option<f64> = None;
    for m in [4usize, 8, 16, 32, 64] {
        let err = (&trotter_evolve(&[zz.clone(), x.clone()], 1.0, m)? - &exact).max_abs();
        let ratio = prev.map(|p| format!("  ratio {:.3}", p / err)).unwrap_or_default();
        println!("M={m:>3}: Trotter error {err:.3e}{ratio}");
        prev = Some(err);
    }

    // Noisy digital channel on three qubits, in the MS frame.
    let k = 3;
    let model = digital_kbody_model(k, 0.5, NoiseSpec::real_white(0.2))?;
    let psi0 = StateVector::basis(1 << k, 0)?;
    let grid = TimeGrid::covering(2.0, 0.01)?;
    let mut options = EnsembleOptions::new(500, 3);
    options.output_stride = 50;
    let ens = run_ensemble(&model, &InitialState::Pure(psi0.clone()), &grid, &options)?;
    let oracle = lindblad_oracle(&model, &psi0.projector(), &grid, 50)?;
    for (i, t) in ens.times.iter().enumerate() {
        let f = (oracle.states[i].matrix() * psi0.projector().matrix()).trace().re;
        println!("t={t:.1}  F_traj={:.4}+-{:.4}  F_lindblad={f:.4}", ens.fidelity[i], ens.fidelity_stderr[i]);
    }
    Ok(())
}
