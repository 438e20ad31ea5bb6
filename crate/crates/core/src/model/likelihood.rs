//! Complete-data joint log-likelihood given labels and random effects.

use crate::error::{JlcmError, Result};
use crate::linalg::MvnDensity;
use crate::model::hazard::ClassHazard;
use crate::model::longitudinal::{longitudinal_logdensity, longitudinal_mean, normal_logpdf};
use crate::model::membership::log_membership_probs;
use crate::model::types::{Dataset, MembershipMode, ModelSpec, ParamState, Subject, SurvivalRecord};

/// Survival log-density of subject `i` under class `k`.
pub fn survival_logdensity(
    surv: &SurvivalRecord,
    k: usize,
    state: &ParamState,
    spec: &ModelSpec,
    u_i: &[f64],
) -> Result<f64> {
    if !(surv.followup_time > 0.0) {
        return Err(JlcmError::Domain(format!(
            "follow-up time must be > 0, got {}",
            surv.followup_time
        )));
    }
    class_hazard(surv, k, state, spec, u_i)?.survival_logdensity(surv.followup_time, surv.event)
}

pub(crate) fn class_hazard<'a>(
    surv: &SurvivalRecord,
    k: usize,
    state: &'a ParamState,
    spec: &'a ModelSpec,
    u_i: &[f64],
) -> Result<ClassHazard<'a>> {
    ClassHazard::new(
        &surv.x3,
        &state.omega[k],
        &state.delta[k],
        u_i,
        &state.lambda0[k],
        &spec.baseline[k],
    )
}

/// Per-subject decomposition of the log-likelihood.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SubjectTerms {
    pub random_effect: f64,
    pub membership: f64,
    pub longitudinal: f64,
    pub survival: f64,
}

impl SubjectTerms {
    pub fn total(&self) -> f64 {
        self.random_effect + self.membership + self.longitudinal + self.survival
    }
}

/// Evaluates subject `i` with random effects `u_i` (which may differ from `state.u[i]`).
pub fn subject_terms(
    subject: &Subject,
    i: usize,
    u_i: &[f64],
    state: &ParamState,
    spec: &ModelSpec,
    re_density: &MvnDensity,
) -> Result<SubjectTerms> {
    let labels = state
        .labels
        .get(i)
        .filter(|l| l.len() == subject.n_visits())
        .ok_or_else(|| JlcmError::State(format!("missing labels for subject `{}`", subject.id)))?;
    let mut terms = SubjectTerms { random_effect: re_density.log_pdf(u_i), ..Default::default() };
    for (j, (v, &k)) in subject.visits.iter().zip(labels).enumerate() {
        if k >= spec.n_classes {
            return Err(JlcmError::State(format!("label {k} out of range")));
        }
        let counts_membership = match spec.membership {
            MembershipMode::TimeVarying => true,
            MembershipMode::Static => j == 0,
        };
        if counts_membership {
            terms.membership += log_membership_probs(&v.x1, &state.xi)?[k];
        }
        terms.longitudinal += longitudinal_logdensity(v, &state.beta[k], u_i, state.tau[k])?;
    }
    let last = *labels.last().expect("subject has visits");
    terms.survival = survival_logdensity(&subject.survival, last, state, spec, u_i)?;
    Ok(terms)
}

/// Log of the joint likelihood: membership, longitudinal and random-effect
/// factors for every visit, plus one survival factor per subject attached to
/// the class of the final visit.
pub fn joint_log_likelihood(data: &Dataset, state: &ParamState, spec: &ModelSpec) -> Result<f64> {
    if data.n_subjects() == 0 {
        return Ok(0.0);
    }
    if state.labels.len() != data.n_subjects() || state.u.len() != data.n_subjects() {
        return Err(JlcmError::State("labels or random effects missing for some subjects".into()));
    }
    let re = MvnDensity::new(&state.sigma_u)?;
    let mut total = 0.0;
    for (i, s) in data.subjects().iter().enumerate() {
        total += subject_terms(s, i, &state.u[i], state, spec, &re)?.total();
    }
    Ok(total)
}

/// Log density of the observed responses and survival outcomes given labels
/// and random effects; the membership and random-effect factors are left out.
pub fn data_log_likelihood(data: &Dataset, state: &ParamState, spec: &ModelSpec) -> Result<f64> {
    if state.labels.len() != data.n_subjects() || state.u.len() != data.n_subjects() {
        return Err(JlcmError::State("labels or random effects missing for some subjects".into()));
    }
    let re = MvnDensity::new(&state.sigma_u)?;
    let mut total = 0.0;
    for (i, s) in data.subjects().iter().enumerate() {
        let t = subject_terms(s, i, &state.u[i], state, spec, &re)?;
        total += t.longitudinal + t.survival;
    }
    Ok(total)
}

/// Log-likelihood with the labels summed out visit by visit.
///
/// The final visit's term carries the survival factor, so the sum over its
/// class includes the survival density. The random-effect density is included.
pub fn marginal_log_likelihood(data: &Dataset, state: &ParamState, spec: &ModelSpec) -> Result<f64> {
    let re = MvnDensity::new(&state.sigma_u)?;
    let mut total = 0.0;
    for (i, s) in data.subjects().iter().enumerate() {
        let u = &state.u[i];
        total += re.log_pdf(u) + subject_label_marginal(s, u, state, spec)?;
    }
    Ok(total)
}

/// Log density of one subject's responses and survival given `u_i`, with the
/// labels summed out. Excludes the random-effect density.
pub fn subject_label_marginal(
    s: &Subject,
    u: &[f64],
    state: &ParamState,
    spec: &ModelSpec,
) -> Result<f64> {
    let k_classes = spec.n_classes;
    let mut surv = Vec::with_capacity(k_classes);
    for k in 0..k_classes {
        surv.push(survival_logdensity(&s.survival, k, state, spec, u)?);
    }
    let mut total = 0.0;
    match spec.membership {
        MembershipMode::TimeVarying => {
            let m = s.n_visits();
            for (j, v) in s.visits.iter().enumerate() {
                let lp = log_membership_probs(&v.x1, &state.xi)?;
                let mut terms: Vec<f64> = (0..k_classes)
                    .map(|k| {
                        lp[k] + normal_logpdf(
                            v.response - longitudinal_mean(v, &state.beta[k], u),
                            state.tau[k],
                        )
                    })
                    .collect();
                if j + 1 == m {
                    for k in 0..k_classes {
                        terms[k] += surv[k];
                    }
                }
                total += log_sum_exp(&terms);
            }
        }
        MembershipMode::Static => {
            let lp = log_membership_probs(&s.visits[0].x1, &state.xi)?;
            let terms: Vec<f64> = (0..k_classes)
                .map(|k| {
                    lp[k]
                        + surv[k]
                        + s.visits
                            .iter()
                            .map(|v| {
                                normal_logpdf(
                                    v.response - longitudinal_mean(v, &state.beta[k], u),
                                    state.tau[k],
                                )
                            })
                            .sum::<f64>()
                })
                .collect();
            total += log_sum_exp(&terms);
        }
    }
    Ok(total)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::types::{BaselineGrid, LongitudinalRecord, RandomEffectDesign};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn subject(id: &str, y: f64, t_follow: f64, event: bool) -> Subject {
        Subject {
            id: id.into(),
            visits: vec![LongitudinalRecord {
                visit_time: 0.0,
                response: y,
                x1: vec![1.0],
                x2: vec![1.0],
                z: vec![1.0],
            }],
            survival: crate::model::types::SurvivalRecord { followup_time: t_follow, event, x3: vec![1.0] },
        }
    }

    fn spec() -> ModelSpec {
        ModelSpec {
            n_classes: 2,
            dim_x1: 1,
            dim_x2: 1,
            dim_x3: 1,
            random_effects: RandomEffectDesign::new(1).unwrap(),
            baseline: vec![BaselineGrid::constant(); 2],
            membership: MembershipMode::TimeVarying,
            reference_class: true,
        }
    }

    fn state(data: &Dataset) -> ParamState {
        let mut st = ParamState::zeros(&spec(), data);
        st.xi = vec![vec![0.4], vec![0.0]];
        st.beta = vec![vec![1.0], vec![3.0]];
        st.omega = vec![vec![0.2], vec![-0.1]];
        st.delta = vec![vec![0.5], vec![0.0]];
        st.tau = vec![0.5, 2.0];
        st.lambda0 = vec![vec![0.3], vec![0.1]];
        st.sigma_u = DMatrix::from_element(1, 1, 0.8);
        st.u = vec![vec![0.25]; data.n_subjects()];
        st
    }

    #[test]
    fn empty_dataset_is_zero() {
        let data = Dataset::new(vec![]).unwrap();
        let st = ParamState::zeros(&spec(), &data);
        assert_eq!(joint_log_likelihood(&data, &st, &spec()).unwrap(), 0.0);
    }

    #[test]
    fn single_visit_matches_hand_product() {
        let data = Dataset::new(vec![subject("a", 1.7, 0.6, true)]).unwrap();
        let st = state(&data);
        let ll = joint_log_likelihood(&data, &st, &spec()).unwrap();

        // class 0 for the single visit; evaluate each factor by hand
        let p_class = 0.4f64.exp() / (0.4f64.exp() + 1.0);
        let mean = 1.0 + 0.25;
        let f_y = (2.0 * PI * 0.5).powf(-0.5) * (-(1.7f64 - mean).powi(2) / (2.0 * 0.5)).exp();
        let rate = 0.3 * (0.2 + 0.5 * 0.25f64).exp();
        let f_t = rate * (-rate * 0.6f64).exp();
        let f_u = (2.0 * PI * 0.8).powf(-0.5) * (-(0.25f64).powi(2) / (2.0 * 0.8)).exp();
        let expected = (p_class * f_y * f_t * f_u).ln();
        assert!((ll - expected).abs() < 1e-12, "{ll} vs {expected}");
    }

    #[test]
    fn duplicate_subject_doubles() {
        let one = Dataset::new(vec![subject("a", 1.7, 0.6, true)]).unwrap();
        let two = Dataset::new(vec![subject("a", 1.7, 0.6, true), subject("b", 1.7, 0.6, true)]).unwrap();
        let l1 = joint_log_likelihood(&one, &state(&one), &spec()).unwrap();
        let l2 = joint_log_likelihood(&two, &state(&two), &spec()).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn censored_subject_contributes_minus_cumulative_hazard() {
        let data = Dataset::new(vec![subject("a", 1.7, 0.6, false)]).unwrap();
        let st = state(&data);
        let v = survival_logdensity(&data.subjects()[0].survival, 1, &st, &spec(), &st.u[0]).unwrap();
        assert!((v + 0.1 * (-0.1f64).exp() * 0.6).abs() < 1e-15);
    }

    #[test]
    fn exponential_event_oracle() {
        let surv = crate::model::types::SurvivalRecord { followup_time: 2.5, event: true, x3: vec![0.0] };
        let data = Dataset::new(vec![subject("a", 0.0, 2.5, true)]).unwrap();
        let mut st = state(&data);
        st.omega[0] = vec![0.0];
        st.delta[0] = vec![0.0];
        st.lambda0[0] = vec![0.7];
        let v = survival_logdensity(&surv, 0, &st, &spec(), &[0.0]).unwrap();
        assert!((v - (0.7f64.ln() - 0.7 * 2.5)).abs() < 1e-14);
    }

    #[test]
    fn missing_labels_are_a_state_error() {
        let data = Dataset::new(vec![subject("a", 1.7, 0.6, true)]).unwrap();
        let mut st = state(&data);
        st.labels[0].clear();
        assert!(matches!(joint_log_likelihood(&data, &st, &spec()), Err(JlcmError::State(_))));
    }
}
