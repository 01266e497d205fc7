//! Closed-form dynamics of the dephasing Ising chain: fidelity revivals,
//! long-time purity with its parity effect, and the special states.
//!
//! cargo run --example ising_exact

use noisesim::ising_exact::{
    asymptotic_purity, exact_rho, fidelity_curve, fixed_point, max_decoherence_gap, special_states, IsingSpectra,
};
use noisesim::metrics;
use noisesim::models::IsingSpec;

fn main() -> noisesim::error::Result<()> {
    let gamma = 0.2;
    let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
    for j in [5.0, 0.0] {
        let spec = IsingSpec::power_law(3, j, 0.0, 0.0)?;
        let psi = special_states(3)?.product_plus;
        let f = fidelity_curve(&spec, &psi.projector(), gamma, &times)?;
        let row: Vec<String> = f.iter().map(|x| format!("{x:.3}")).collect();
        println!("J={j}: F(t) = {}", row.join(" "));
    }

    for n in 2..=8 {
        let p = asymptotic_purity(n)?;
        println!("N={n}: p(inf) = {p} = {:.6}", *p.numer() as f64 / *p.denom() as f64);
    }

    let n = 4;
    let spec = IsingSpec::power_law(n, 5.0, 1.0, 0.0)?;
    let spectra = IsingSpectra::new(&spec)?;
    let states = special_states(n)?;
    let (norm, e) = (spectra.seminorm(), max_decoherence_gap(&spec)?);
    for t in [0.0, 0.1, 0.5, 2.0] {
        let rho = exact_rho(&spec, &states.max_decoherence.projector(), gamma, t)?;
        let closed = 0.5 + 0.5 * (-0.5 * gamma * norm * norm * t).exp() * (e * t).cos();
        let cat = exact_rho(&spec, &states.cat.projector(), gamma, t)?;
        println!(
            "t={t:<4} rho_M: F={:.10} closed form {:.10}; cat F={:.12}",
            metrics::fidelity(&rho, &states.max_decoherence)?,
            closed,
            metrics::fidelity(&cat, &states.cat)?
        );
    }

    let uniform = IsingSpec::uniform(n, 1.0)?;
    let fp = fixed_point(&uniform)?;
    println!("uniform-J fixed point purity = {:.6}", fp.purity());
    Ok(())
}
