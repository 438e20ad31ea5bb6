//! Kaplan–Meier product-limit estimator.

use crate::error::{JlcmError, Result};

/// Right-continuous step function `S(t)`, starting at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeier {
    /// Distinct event times, ascending.
    times: Vec<f64>,
    /// Survival just after each entry of `times`.
    surv: Vec<f64>,
}

impl KaplanMeier {
    /// Fits the estimator with `events[i]` marking an observed event.
    pub fn fit(times: &[f64], events: &[bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(JlcmError::Design(format!(
                "{} times but {} event flags",
                times.len(),
                events.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(JlcmError::Domain(format!("times must be finite and > 0, got {t}")));
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut at_risk = times.len();
        let mut s = 1.0;
        let mut out_t = Vec::new();
        let mut out_s = Vec::new();
        let mut idx = 0;
        while idx < order.len() {
            let t = times[order[idx]];
            let mut d = 0usize;
            let mut n_here = 0usize;
            while idx < order.len() && times[order[idx]] == t {
                d += events[order[idx]] as usize;
                n_here += 1;
                idx += 1;
            }
            if d > 0 {
                s *= 1.0 - d as f64 / at_risk as f64;
                out_t.push(t);
                out_s.push(s);
            }
            at_risk -= n_here;
        }
        Ok(Self { times: out_t, surv: out_s })
    }

    /// Estimator of the censoring distribution: censorings become the events.
    pub fn censoring(times: &[f64], events: &[bool]) -> Result<Self> {
        let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
        Self::fit(times, &flipped)
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    /// `S(t)`, including any drop at `t` itself.
    pub fn survival(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&x| x <= t);
        if n == 0 { 1.0 } else { self.surv[n - 1] }
    }

    /// Left limit `S(t-)`.
    pub fn survival_before(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&x| x < t);
        if n == 0 { 1.0 } else { self.surv[n - 1] }
    }

    /// `S(u | s) = S(u) / S(s)` for `u >= s`.
    pub fn conditional(&self, u: f64, s: f64) -> Result<f64> {
        Self::ratio(self.survival(u), self.survival(s), s)
    }

    /// `S(u- | s)`, the conditional value just before `u`.
    pub fn conditional_before(&self, u: f64, s: f64) -> Result<f64> {
        Self::ratio(self.survival_before(u), self.survival(s), s)
    }

    fn ratio(num: f64, den: f64, s: f64) -> Result<f64> {
        if den <= 0.0 {
            return Err(JlcmError::UndefinedWeight(s));
        }
        Ok(num / den)
    }
}
