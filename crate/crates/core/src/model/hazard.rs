//! Class-specific Cox frailty hazard with a piecewise-constant baseline.
//!
//! With `Z(u) = (1, u, ..., u^(q-1))` the log relative hazard is the
//! polynomial `X_3' omega_k + sum_l delta_kl U_il u^l`. For `q <= 2` it is
//! linear in `u` and each step of the cumulative hazard integrates in closed
//! form; higher degrees fall back to adaptive quadrature.

use crate::error::{JlcmError, Result};
use crate::linalg::dot;
use crate::model::types::BaselineGrid;
use crate::quadrature;

/// Below this slope the closed-form step integral switches to its linear limit.
pub const SLOPE_EPSILON: f64 = 1e-10;

pub const QUADRATURE_REL_TOL: f64 = 1e-10;

/// Hazard of one subject under one class, with the subject-level terms folded in.
#[derive(Debug, Clone)]
pub struct ClassHazard<'a> {
    /// `coefs[l]` multiplies `u^l` in the log relative hazard; `coefs[0]` includes `X_3' omega_k`.
    coefs: Vec<f64>,
    lambda0: &'a [f64],
    grid: &'a BaselineGrid,
}

impl<'a> ClassHazard<'a> {
    pub fn new(
        x3: &[f64],
        omega_k: &[f64],
        delta_k: &[f64],
        u_i: &[f64],
        lambda0_k: &'a [f64],
        grid: &'a BaselineGrid,
    ) -> Result<Self> {
        if x3.len() != omega_k.len() {
            return Err(JlcmError::Design(format!(
                "survival covariates have length {}, omega has length {}",
                x3.len(),
                omega_k.len()
            )));
        }
        if delta_k.len() != u_i.len() {
            return Err(JlcmError::Design("association vector and random effects differ in length".into()));
        }
        if lambda0_k.len() != grid.n_steps() {
            return Err(JlcmError::Design(format!(
                "{} baseline heights for {} steps",
                lambda0_k.len(),
                grid.n_steps()
            )));
        }
        let mut coefs: Vec<f64> = delta_k.iter().zip(u_i).map(|(d, u)| d * u).collect();
        if coefs.is_empty() {
            coefs.push(0.0);
        }
        coefs[0] += dot(x3, omega_k);
        Ok(Self { coefs, lambda0: lambda0_k, grid })
    }

    /// Builds directly from the log-linear coefficients `a + b u`.
    pub fn linear(a: f64, b: f64, lambda0_k: &'a [f64], grid: &'a BaselineGrid) -> Self {
        Self { coefs: vec![a, b], lambda0: lambda0_k, grid }
    }

    #[inline]
    fn log_relative(&self, t: f64) -> f64 {
        self.coefs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn log_hazard(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(JlcmError::Domain(format!("hazard needs t > 0, got {t}")));
        }
        let s = self.grid.step_of(t);
        Ok(self.lambda0[s].ln() + self.log_relative(t))
    }

    pub fn hazard(&self, t: f64) -> Result<f64> {
        self.log_hazard(t).map(f64::exp)
    }

    fn is_linear(&self) -> bool {
        self.coefs.len() <= 2 || self.coefs[2..].iter().all(|&c| c == 0.0)
    }

    /// `int_lo^hi exp(log relative hazard)`, closed form when linear.
    fn relative_integral(&self, lo: f64, hi: f64, force_quadrature: bool) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if !force_quadrature && self.is_linear() {
            let a = self.coefs[0];
            let b = self.coefs.get(1).copied().unwrap_or(0.0);
            if b.abs() < SLOPE_EPSILON {
                (a + b * 0.5 * (lo + hi)).exp() * (hi - lo)
            } else {
                (a + b * lo).exp() * (b * (hi - lo)).exp_m1() / b
            }
        } else {
            quadrature::integrate(|u| self.log_relative(u).exp(), lo, hi, QUADRATURE_REL_TOL, 0.0)
        }
    }

    /// Exposure integral restricted to step `s` and `(0, t]`.
    pub fn step_exposure(&self, s: usize, t: f64) -> f64 {
        let (lo, hi) = self.grid.step_bounds(s);
        if t <= lo {
            return 0.0;
        }
        self.relative_integral(lo, hi.min(t), false)
    }

    fn cumulative_impl(&self, t: f64, force_quadrature: bool) -> Result<f64> {
        if !(t > 0.0) {
            return Err(JlcmError::Domain(format!("cumulative hazard needs t > 0, got {t}")));
        }
        let mut total = 0.0;
        for s in 0..self.grid.n_steps() {
            let (lo, hi) = self.grid.step_bounds(s);
            if t <= lo {
                break;
            }
            total += self.lambda0[s] * self.relative_integral(lo, hi.min(t), force_quadrature);
        }
        Ok(total)
    }

    pub fn cumulative(&self, t: f64) -> Result<f64> {
        self.cumulative_impl(t, false)
    }

    /// Cumulative hazard by adaptive quadrature regardless of the design degree.
    pub fn cumulative_by_quadrature(&self, t: f64) -> Result<f64> {
        self.cumulative_impl(t, true)
    }

    /// `event * log hazard(T) - H(T)`.
    pub fn survival_logdensity(&self, followup: f64, event: bool) -> Result<f64> {
        let h = self.cumulative(followup)?;
        if event {
            Ok(self.log_hazard(followup)? - h)
        } else {
            Ok(-h)
        }
    }
}

/// `lambda_0k(t) exp(X_3' omega_k + Z(t)'(delta_k o U_i))`.
pub fn hazard(
    t: f64,
    x3: &[f64],
    omega_k: &[f64],
    delta_k: &[f64],
    u_i: &[f64],
    lambda0_k: &[f64],
    grid: &BaselineGrid,
) -> Result<f64> {
    ClassHazard::new(x3, omega_k, delta_k, u_i, lambda0_k, grid)?.hazard(t)
}

/// `H_ik(t)`, the integral of [`hazard`] over `(0, t]`.
pub fn cumulative_hazard(
    t: f64,
    x3: &[f64],
    omega_k: &[f64],
    delta_k: &[f64],
    u_i: &[f64],
    lambda0_k: &[f64],
    grid: &BaselineGrid,
) -> Result<f64> {
    ClassHazard::new(x3, omega_k, delta_k, u_i, lambda0_k, grid)?.cumulative(t)
}
