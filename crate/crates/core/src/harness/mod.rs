pub mod config;
pub mod selftest;
pub mod sweep;

pub use config::ExperimentConfig;
pub use sweep::{run_sweep, SweepOutcome, SweepRecord};
