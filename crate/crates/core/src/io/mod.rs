//! Files in and out: datasets, run configuration, chains and result tables.

pub mod chain_file;
pub mod config;
pub mod dataset;
pub mod outputs;

pub use chain_file::{load_chain, read_chain, save_chain, write_chain};
pub use config::RunConfig;
pub use dataset::{load_dataset, read_dataset, write_dataset, write_simulation_csv, Schema, Term};
