use crate::error::{JlcmError, Result};
use crate::linalg::dot;
use crate::model::types::LongitudinalRecord;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Mean `X_2' beta_k + Z' u_i` of a response under class `k`.
#[inline]
pub fn longitudinal_mean(record: &LongitudinalRecord, beta_k: &[f64], u_i: &[f64]) -> f64 {
    dot(&record.x2, beta_k) + dot(&record.z, u_i)
}

/// Normal log-density of `y_ij` given class `k`, random effects and error variance `tau_k`.
pub fn longitudinal_logdensity(
    record: &LongitudinalRecord,
    beta_k: &[f64],
    u_i: &[f64],
    tau_k: f64,
) -> Result<f64> {
    if !(tau_k > 0.0) {
        return Err(JlcmError::Domain(format!("error variance must be > 0, got {tau_k}")));
    }
    if beta_k.len() != record.x2.len() || u_i.len() != record.z.len() {
        return Err(JlcmError::Design("longitudinal coefficient length mismatch".into()));
    }
    Ok(normal_logpdf(record.response - longitudinal_mean(record, beta_k, u_i), tau_k))
}

#[inline]
pub(crate) fn normal_logpdf(resid: f64, var: f64) -> f64 {
    -HALF_LN_2PI - 0.5 * var.ln() - 0.5 * resid * resid / var
}
