//! Posterior sampling.

pub mod am;
pub mod chain;
pub mod conditionals;
pub mod init;
pub mod labels;
pub mod relabel;

pub use am::{am_accept, am_step, AmState};
pub use chain::{
    parameter_blocks, run_chain, run_chain_from, AcceptanceCounts, AmSnapshot, Block, BlockCounts, BlockTally, Chain,
    McmcConfig,
};
pub use conditionals::{sample_beta, sample_lambda_step, sample_sigma_u, sample_tau};
pub use labels::sample_labels;
