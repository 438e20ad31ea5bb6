//! Post-chain analytics.

pub mod auc;
pub mod classify;
pub mod dic;
pub mod integrated;
pub mod km;
pub mod prediction;
pub mod summary;

pub use auc::auc_ipcw;
pub use classify::{error_rate, hard_assignments, matched_error_rate, posterior_membership};
pub use dic::{dic, DicMethod, DicPenalty, DicReport, DicVariant};
pub use integrated::{ObservedLikelihood, SubjectIntegrand};
pub use km::KaplanMeier;
pub use prediction::{conditional_survival, mix, PredictionCurve, Predictor};
pub use summary::{named_parameters, posterior_mean_state, quantile_sorted, ParamSummary, PosteriorSummary};
