//! Discrete update of the latent class labels.

use rand::Rng;

use crate::error::{JlcmError, Result};
use crate::model::likelihood::survival_logdensity;
use crate::model::longitudinal::{longitudinal_mean, normal_logpdf};
use crate::model::membership::{log_membership_probs, log_softmax_in_place};
use crate::model::types::{Dataset, MembershipMode, ModelSpec, ParamState, Subject};

/// Unnormalised log `P_ijk` for every visit of subject `i`.
///
/// Time-varying mode: membership x longitudinal density, times the survival
/// density at the final visit. Static mode: one row (repeated per visit)
/// holding the subject-level product over all visits.
pub fn label_log_weights(
    subject: &Subject,
    i: usize,
    state: &ParamState,
    spec: &ModelSpec,
) -> Result<Vec<Vec<f64>>> {
    let k_classes = spec.n_classes;
    let u = &state.u[i];
    let m = subject.n_visits();
    let mut surv = Vec::with_capacity(k_classes);
    for k in 0..k_classes {
        surv.push(survival_logdensity(&subject.survival, k, state, spec, u)?);
    }
    let dens = |k: usize, j: usize| {
        let v = &subject.visits[j];
        normal_logpdf(v.response - longitudinal_mean(v, &state.beta[k], u), state.tau[k])
    };
    match spec.membership {
        MembershipMode::TimeVarying => {
            let mut out = Vec::with_capacity(m);
            for (j, v) in subject.visits.iter().enumerate() {
                let mut w = log_membership_probs(&v.x1, &state.xi)?;
                for (k, wk) in w.iter_mut().enumerate() {
                    *wk += dens(k, j);
                    if j + 1 == m {
                        *wk += surv[k];
                    }
                }
                out.push(w);
            }
            Ok(out)
        }
        MembershipMode::Static => {
            let mut w = log_membership_probs(&subject.visits[0].x1, &state.xi)?;
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += surv[k] + (0..m).map(|j| dens(k, j)).sum::<f64>();
            }
            Ok(vec![w; m])
        }
    }
}

/// Normalised label probabilities for every visit of subject `i`.
pub fn label_probabilities(
    subject: &Subject,
    i: usize,
    state: &ParamState,
    spec: &ModelSpec,
) -> Result<Vec<Vec<f64>>> {
    let mut w = label_log_weights(subject, i, state, spec)?;
    for row in w.iter_mut() {
        if row.iter().all(|x| !x.is_finite()) {
            return Err(JlcmError::State(format!(
                "all class weights vanish for subject `{}`",
                subject.id
            )));
        }
        log_softmax_in_place(row);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = x.exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    Ok(w)
}

fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Draws new labels for every visit (every subject in static mode).
pub fn sample_labels<R: Rng + ?Sized>(
    data: &Dataset,
    state: &ParamState,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(data.n_subjects());
    for (i, s) in data.subjects().iter().enumerate() {
        if spec.n_classes == 1 {
            out.push(vec![0; s.n_visits()]);
            continue;
        }
        let probs = label_probabilities(s, i, state, spec)?;
        match spec.membership {
            MembershipMode::TimeVarying => {
                out.push(probs.iter().map(|p| draw_categorical(p, rng)).collect());
            }
            MembershipMode::Static => {
                let k = draw_categorical(&probs[0], rng);
                out.push(vec![k; s.n_visits()]);
            }
        }
    }
    Ok(out)
}
