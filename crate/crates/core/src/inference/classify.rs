//! Posterior class membership and misclassification rates.

use crate::error::{JlcmError, Result};
use crate::inference::summary::posterior_mean_state;
use crate::mcmc::labels::label_probabilities;
use crate::mcmc::Chain;
use crate::model::types::{Dataset, ParamState};

/// Posterior membership `pi_hat[i][j][k]` evaluated at the posterior means.
///
/// Each row is proportional to the prior membership probability times the
/// class-specific longitudinal density (and survival density at the final
/// visit), the same weights used by the label update. The random-effect
/// density is common to all classes and cancels.
pub fn posterior_membership(data: &Dataset, chain: &Chain) -> Result<Vec<Vec<Vec<f64>>>> {
    let mean = posterior_mean_state(chain)?;
    membership_at(data, &mean, chain)
}

pub(crate) fn membership_at(data: &Dataset, state: &ParamState, chain: &Chain) -> Result<Vec<Vec<Vec<f64>>>> {
    chain.spec.check_dataset(data)?;
    if state.u.len() != data.n_subjects() {
        return Err(JlcmError::State("chain and dataset have different subject counts".into()));
    }
    data.subjects()
        .iter()
        .enumerate()
        .map(|(i, s)| label_probabilities(s, i, state, &chain.spec))
        .collect()
}

/// Argmax of each membership row (ties go to the lower class).
pub fn hard_assignments(probs: &[Vec<Vec<f64>>]) -> Vec<Vec<usize>> {
    probs
        .iter()
        .map(|subj| {
            subj.iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
                        .0
                })
                .collect()
        })
        .collect()
}

/// Share of subject-visits whose assigned label differs from the true one.
pub fn error_rate(assigned: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    if assigned.len() != truth.len() {
        return Err(JlcmError::Design("label arrays cover different subjects".into()));
    }
    let mut total = 0usize;
    let mut wrong = 0usize;
    for (a, t) in assigned.iter().zip(truth) {
        if a.len() != t.len() {
            return Err(JlcmError::Design("label arrays cover different visits".into()));
        }
        total += a.len();
        wrong += a.iter().zip(t).filter(|(x, y)| x != y).count();
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(wrong as f64 / total as f64)
}

/// Smallest error rate over injective matchings of fitted classes to true
/// classes; fitted classes left unmatched always count as errors.
///
/// Used to compare fits whose class count differs from the truth.
pub fn matched_error_rate(assigned: &[Vec<usize>], truth: &[Vec<usize>], fitted_k: usize, true_k: usize) -> Result<f64> {
    let slots = fitted_k.max(true_k);
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..slots).collect();
    permute(&mut perm, 0, &mut |p| {
        // p[fitted] = true label (values >= true_k never match)
        let mapped: Vec<Vec<usize>> = assigned
            .iter()
            .map(|row| row.iter().map(|&a| if a < fitted_k { p[a] } else { usize::MAX }).collect())
            .collect();
        if let Ok(e) = error_rate(&mapped, truth) {
            best = best.min(e);
        }
    });
    if best.is_finite() {
        Ok(best)
    } else {
        Err(JlcmError::Design("label arrays are not conformable".into()))
    }
}

fn permute(v: &mut Vec<usize>, start: usize, f: &mut dyn FnMut(&[usize])) {
    if start == v.len() {
        f(v);
        return;
    }
    for i in start..v.len() {
        v.swap(start, i);
        permute(v, start + 1, f);
        v.swap(start, i);
    }
}
