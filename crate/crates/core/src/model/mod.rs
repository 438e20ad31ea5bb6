//! Submodels, cumulative hazard, and the joint likelihood.

pub mod hazard;
pub mod likelihood;
pub mod longitudinal;
pub mod membership;
pub mod types;

pub use hazard::{cumulative_hazard, hazard, ClassHazard};
pub use likelihood::{data_log_likelihood, joint_log_likelihood, marginal_log_likelihood, subject_terms, survival_logdensity, SubjectTerms};
pub use longitudinal::longitudinal_logdensity;
pub use membership::{log_membership_probs, membership_probs};
pub use types::{
    BaselineGrid, Dataset, LongitudinalRecord, MembershipMode, ModelSpec, ParamState, Priors,
    RandomEffectDesign, Subject, SurvivalRecord,
};
