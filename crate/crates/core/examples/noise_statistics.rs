//! Reproducible noise streams: white increments, Ornstein-Uhlenbeck paths
//! and their statistical checks, and a tabulated kernel.
//!
//! cargo run --example noise_statistics

use noisesim::grid::TimeGrid;
use noisesim::noise::{
    check_autocorrelation, check_white, complex_pair, sample_white, KernelSpec, NoiseSpec, StreamSeed,
};

fn main() -> noisesim::error::Result<()> {
    let a = sample_white(5, 0.01, StreamSeed::new(7, 3))?;
    let b = sample_white(5, 0.01, StreamSeed::new(7, 3))?;
    println!("same stream, same increments: {}", a.increments == b.increments);

    let w = check_white(1_000_000, 1e-3, StreamSeed::new(1, 0))?;
    println!("white: mean {:.3e} (z {:.2}), variance {:.6e} (z {:.2})", w.mean, w.z_mean, w.variance, w.z_variance);

    let ou = KernelSpec::OrnsteinUhlenbeck { tau_c: 0.05 };
    let grid = TimeGrid::new(0.01, 100)?;
    for c in check_autocorrelation(&ou, &grid, 2_000, &[0, 1, 3, 10], 2)? {
        println!("OU lag {:.2}: expected {:.4}, estimate {:.4} +- {:.4}", c.lag, c.expected, c.estimate, c.stderr);
    }

    let table = KernelSpec::parse_two_column("0.0 2.0\n0.01 1.0\n0.02 0.25\n")?;
    table.check_psd(&TimeGrid::new(0.01, 3)?)?;
    println!("tabulated kernel at lag 0.015: {:.4}", table.stationary_value(0.015)?);

    let spec = NoiseSpec::complex_colored(0.1, ou);
    let (re, im) = complex_pair(&spec, &grid, 9, 0, 1)?;
    println!("complex OU pair, first increments: {:.4e}, {:.4e}", re.increments[0], im.increments[0]);
    Ok(())
}
