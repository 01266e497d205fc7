pub mod error;
pub mod grid;
pub mod noise;
pub mod propagate;
pub mod qcore;
pub mod ising_exact;
pub mod metrics;
pub mod models;
pub mod cli;
