//! Decoherence times from the variance of the noise operator, the seminorm
//! bound, and how they scale with system size for a two-body channel.
//!
//! cargo run --example decoherence_scaling

use noisesim::ising_exact::special_states;
use noisesim::metrics::{scaling_study, DecoherenceReport, StateFamily};
use noisesim::models::{ising_model, IsingSpec};
use noisesim::noise::NoiseSpec;
use noisesim::qcore::PauliAxis;

fn main() -> noisesim::error::Result<()> {
    let zz = [PauliAxis::Z, PauliAxis::Z];
    let ns = [6usize, 8, 10, 12];
    for family in [StateFamily::Product, StateFamily::MaxDecoherence] {
        let res = scaling_study(&zz, &ns, family, 1.0)?;
        println!("{family:?}: 1/tau_D = {:?}, fitted exponent {:.4}", res.inverse_tau, res.exponent);
    }
    let far = scaling_study(&zz, &[40, 80, 160, 320], StateFamily::Product, 1.0);
    println!("product family at large N: {far:?}");

    let n = 6;
    let model = ising_model(&IsingSpec::uniform(n, 1.0)?, NoiseSpec::real_white(0.2))?;
    let states = special_states(n)?;
    for (name, psi) in [("product", &states.product_plus), ("rho_M", &states.max_decoherence), ("cat", &states.cat)] {
        let r = DecoherenceReport::for_model(&model, psi)?;
        println!("{name:>8}: tau_D = {:.4e}, bound = {:.4e}", r.tau_d_variance, r.tau_d_bound);
    }
    Ok(())
}
