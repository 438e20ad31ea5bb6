//! Conjugate full-conditional updates.
//!
//! Each sampler has a companion function returning the parameters of its
//! conditional distribution so the draws can be checked against them.
//! Classes with no assigned observations fall back to the prior.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{JlcmError, Result};
use crate::linalg::{dot, sample_mvn, symmetrize};
use crate::model::likelihood::class_hazard;
use crate::model::longitudinal::longitudinal_mean;
use crate::model::types::{Dataset, ModelSpec, ParamState, Priors};

/// Gaussian conditional of `beta_k`: mean and covariance.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// True when no observation is assigned to the class and the prior is returned.
    pub from_prior: bool,
}

pub fn beta_conditional(k: usize, data: &Dataset, state: &ParamState, priors: &Priors) -> Result<GaussianConditional> {
    let p = priors.beta_mean.len();
    let prior_prec = priors
        .beta_cov
        .clone()
        .try_inverse()
        .ok_or_else(|| JlcmError::Numeric("beta prior covariance is singular".into()))?;
    let tau = state.tau[k];
    if !(tau > 0.0) {
        return Err(JlcmError::Domain(format!("tau_{k} must be > 0")));
    }
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut count = 0usize;
    for (i, s) in data.subjects().iter().enumerate() {
        let u = &state.u[i];
        for (v, &r) in s.visits.iter().zip(&state.labels[i]) {
            if r != k {
                continue;
            }
            count += 1;
            let resid = v.response - dot(&v.z, u);
            for a in 0..p {
                xty[a] += resid * v.x2[a];
                for b in 0..=a {
                    xtx[(a, b)] += v.x2[a] * v.x2[b];
                }
            }
        }
    }
    let prior_mean = DVector::from_column_slice(&priors.beta_mean);
    if count == 0 {
        return Ok(GaussianConditional { mean: prior_mean, cov: priors.beta_cov.clone(), from_prior: true });
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    let precision = xtx / tau + &prior_prec;
    let rhs = xty / tau + &prior_prec * prior_mean;
    let chol = precision.clone().cholesky().ok_or_else(|| {
        JlcmError::Numeric(format!(
            "beta_{k} posterior precision is not positive-definite (condition estimate {:.3e})",
            condition_estimate(&precision)
        ))
    })?;
    let mean = chol.solve(&rhs);
    let mut cov = chol.inverse();
    symmetrize(&mut cov);
    Ok(GaussianConditional { mean, cov, from_prior: false })
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigen().eigenvalues;
    let max = ev.iter().cloned().fold(f64::MIN, f64::max);
    let min = ev.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

/// Draws `beta_k` from `N(A^{-1} B, A^{-1})`.
pub fn sample_beta<R: Rng + ?Sized>(
    k: usize,
    data: &Dataset,
    state: &ParamState,
    priors: &Priors,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let cond = beta_conditional(k, data, state, priors)?;
    let l = cond
        .cov
        .clone()
        .cholesky()
        .ok_or_else(|| JlcmError::Numeric(format!("beta_{k} conditional covariance is not positive-definite")))?
        .l();
    Ok(sample_mvn(&cond.mean, &l, rng).iter().copied().collect())
}

/// Shape and rate of a gamma or inverse-gamma conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeRate {
    pub shape: f64,
    pub rate: f64,
    pub from_prior: bool,
}

/// `Gamma(E, F)` conditional of baseline step `s` in class `k`.
///
/// Only subjects whose final label is `k` contribute: the survival factor
/// is attached to the last visit's class.
pub fn lambda_conditional(
    k: usize,
    s: usize,
    data: &Dataset,
    state: &ParamState,
    spec: &ModelSpec,
    priors: &Priors,
) -> Result<ShapeRate> {
    let grid = &spec.baseline[k];
    if s >= grid.n_steps() {
        return Err(JlcmError::Design(format!("class {k} has no baseline step {s}")));
    }
    let mut events = 0.0;
    let mut exposure = 0.0;
    let mut members = 0usize;
    for (i, subj) in data.subjects().iter().enumerate() {
        if *state.labels[i].last().expect("non-empty") != k {
            continue;
        }
        members += 1;
        let surv = &subj.survival;
        let h = class_hazard(surv, k, state, spec, &state.u[i])?;
        exposure += h.step_exposure(s, surv.followup_time);
        if surv.event && grid.step_of(surv.followup_time) == s {
            events += 1.0;
        }
    }
    if members == 0 {
        return Ok(ShapeRate { shape: priors.lambda_shape, rate: priors.lambda_rate, from_prior: true });
    }
    Ok(ShapeRate {
        shape: priors.lambda_shape + events,
        rate: priors.lambda_rate + exposure,
        from_prior: false,
    })
}

pub fn sample_lambda_step<R: Rng + ?Sized>(
    k: usize,
    s: usize,
    data: &Dataset,
    state: &ParamState,
    spec: &ModelSpec,
    priors: &Priors,
    rng: &mut R,
) -> Result<f64> {
    let c = lambda_conditional(k, s, data, state, spec, priors)?;
    draw_gamma(c.shape, c.rate, rng)
}

/// Inverse-gamma conditional of `tau_k`: shape `n_k/2 + alpha*`, rate `SSR_k/2 + beta*`.
pub fn tau_conditional(k: usize, data: &Dataset, state: &ParamState, priors: &Priors) -> ShapeRate {
    let mut n = 0usize;
    let mut ssr = 0.0;
    for (i, s) in data.subjects().iter().enumerate() {
        let u = &state.u[i];
        for (v, &r) in s.visits.iter().zip(&state.labels[i]) {
            if r == k {
                n += 1;
                let e = v.response - longitudinal_mean(v, &state.beta[k], u);
                ssr += e * e;
            }
        }
    }
    if n == 0 {
        return ShapeRate { shape: priors.tau_shape, rate: priors.tau_rate, from_prior: true };
    }
    ShapeRate {
        shape: n as f64 / 2.0 + priors.tau_shape,
        rate: ssr / 2.0 + priors.tau_rate,
        from_prior: false,
    }
}

pub fn sample_tau<R: Rng + ?Sized>(
    k: usize,
    data: &Dataset,
    state: &ParamState,
    priors: &Priors,
    rng: &mut R,
) -> Result<f64> {
    let c = tau_conditional(k, data, state, priors);
    Ok(1.0 / draw_gamma(c.shape, c.rate, rng)?)
}

/// Inverse-Wishart conditional of the shared random-effect covariance.
#[derive(Debug, Clone)]
pub struct InverseWishartParams {
    pub df: f64,
    /// Scale matrix `Psi`; the mean is `Psi / (df - q - 1)`.
    pub scale: DMatrix<f64>,
}

/// Pooled update `IW(nu* + N, S* + sum_i U_i U_i^T)`.
pub fn sigma_u_conditional(state: &ParamState, priors: &Priors) -> InverseWishartParams {
    let mut scale = priors.sigma_scale.clone();
    for u in &state.u {
        let v = DVector::from_column_slice(u);
        scale += &v * v.transpose();
    }
    InverseWishartParams { df: priors.sigma_df + state.u.len() as f64, scale }
}

pub fn sample_sigma_u<R: Rng + ?Sized>(state: &ParamState, priors: &Priors, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = sigma_u_conditional(state, priors);
    draw_inverse_wishart(p.df, &p.scale, rng)
}

pub(crate) fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| JlcmError::Numeric(format!("invalid gamma({shape}, {rate}): {e}")))?;
    // Tiny shapes can underflow to exactly zero; keep the draw inside the support.
    Ok(g.sample(rng).max(f64::MIN_POSITIVE))
}

/// Bartlett-decomposition draw from `IW(df, scale)`.
pub fn draw_inverse_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let q = scale.nrows();
    if !(df > q as f64 - 1.0) {
        return Err(JlcmError::Domain(format!("inverse-Wishart df {df} must exceed {}", q as f64 - 1.0)));
    }
    let inv_scale = scale
        .clone()
        .cholesky()
        .ok_or_else(|| JlcmError::Numeric("inverse-Wishart scale is not positive-definite".into()))?
        .inverse();
    let l = inv_scale
        .cholesky()
        .ok_or_else(|| JlcmError::Numeric("inverse-Wishart scale inverse is not positive-definite".into()))?
        .l();
    let mut a = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        let chi = ChiSquared::new(df - i as f64)
            .map_err(|e| JlcmError::Numeric(format!("chi-square({}) failed: {e}", df - i as f64)))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let wishart = &la * la.transpose();
    let mut sigma = wishart
        .cholesky()
        .ok_or_else(|| JlcmError::Numeric("Wishart draw is singular".into()))?
        .inverse();
    symmetrize(&mut sigma);
    Ok(sigma)
}
