//! Multinomial-logit class membership.

use crate::error::{JlcmError, Result};
use crate::linalg::dot;

/// Log of the class membership probabilities for one design row.
///
/// Uses max-subtraction so large linear predictors cannot overflow.
pub fn log_membership_probs(x1_row: &[f64], xi: &[Vec<f64>]) -> Result<Vec<f64>> {
    if xi.is_empty() {
        return Err(JlcmError::Design("membership needs at least one class".into()));
    }
    let mut eta = Vec::with_capacity(xi.len());
    for coef in xi {
        if coef.len() != x1_row.len() {
            return Err(JlcmError::Design(format!(
                "membership coefficients have length {}, design row has length {}",
                coef.len(),
                x1_row.len()
            )));
        }
        eta.push(dot(x1_row, coef));
    }
    log_softmax_in_place(&mut eta);
    Ok(eta)
}

/// `pi_ijk` for `k = 1..K`; entries are positive and sum to one.
pub fn membership_probs(x1_row: &[f64], xi: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut p = log_membership_probs(x1_row, xi)?;
    for v in p.iter_mut() {
        *v = v.exp();
    }
    let s: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= s;
    }
    Ok(p)
}

pub(crate) fn log_softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return;
    }
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    for x in v.iter_mut() {
        *x -= lse;
    }
}
