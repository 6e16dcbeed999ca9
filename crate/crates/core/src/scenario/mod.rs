//! Configuration-driven sweeps that write CSV tables, gnuplot scripts and a
//! run manifest.

pub mod config;
pub mod input;
pub mod output;
pub mod registry;
pub mod runner;

pub use config::{CompareConfig, ScenarioConfig, ScenarioFile};
pub use input::make_input_mode;
pub use runner::{evaluate, run_file, run_scenario, sweep_compare, RunOptions, RunReport, Table, OUT_ENV};
