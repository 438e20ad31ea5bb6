//! Bayesian joint latent class model for longitudinal and time-to-event data
//! with time-varying class membership.
//!
//! Each visit `j` of subject `i` belongs to a latent class `R_ij` drawn from
//! a multinomial logit in the membership covariates. Given the class, the
//! response follows a linear mixed model with shared random effects `U_i`,
//! and the event time follows a class-specific proportional hazard with a
//! piecewise-constant baseline, linked to `U_i` through `delta_k`. Fitting
//! is by a Gibbs / adaptive Metropolis sampler; outputs include posterior
//! summaries, DIC, class membership and dynamic survival prediction.

pub mod cli;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod mcmc;
pub mod model;
pub mod pipeline;
pub mod quadrature;
pub mod simulation;

pub use error::{JlcmError, Result};
pub use mcmc::{run_chain, Chain, McmcConfig};
pub use model::{Dataset, MembershipMode, ModelSpec, ParamState, Priors};
