//! Dynamic survival prediction.

use crate::error::{JlcmError, Result};
use crate::inference::summary::posterior_mean_state;
use crate::mcmc::Chain;
use crate::model::likelihood::class_hazard;
use crate::model::longitudinal::{longitudinal_mean, normal_logpdf};
use crate::model::membership::{log_membership_probs, log_softmax_in_place};
use crate::model::types::{Dataset, MembershipMode, ModelSpec, ParamState, Subject};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionCurve {
    pub subject_id: String,
    pub base_time: f64,
    pub horizons: Vec<f64>,
    pub survival: Vec<f64>,
}

/// `S_k(t + dt) / S_k(t)` for subject random effects `u_i` under class `k`.
pub fn conditional_survival(
    subject: &Subject,
    u_i: &[f64],
    t: f64,
    dt: f64,
    k: usize,
    state: &ParamState,
    spec: &ModelSpec,
) -> Result<f64> {
    if !(t > 0.0) || !(dt >= 0.0) || !t.is_finite() || !dt.is_finite() {
        return Err(JlcmError::Domain(format!("need t > 0 and dt >= 0, got t={t}, dt={dt}")));
    }
    if dt == 0.0 {
        return Ok(1.0);
    }
    let h = class_hazard(&subject.survival, k, state, spec, u_i)?;
    let diff = h.cumulative(t + dt)? - h.cumulative(t)?;
    Ok((-diff.max(0.0)).exp())
}

/// Convex combination of per-class values.
pub fn mix(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Posterior-mean parameters bound to a chain's model, for repeated prediction.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub state: ParamState,
    pub spec: ModelSpec,
}

impl Predictor {
    pub fn from_chain(chain: &Chain) -> Result<Self> {
        Ok(Self { state: posterior_mean_state(chain)?, spec: chain.spec.clone() })
    }

    pub fn new(state: ParamState, spec: ModelSpec) -> Self {
        Self { state, spec }
    }

    /// Class probabilities at the last visit observed by time `t`, given the
    /// longitudinal history up to `t` and survival to `t`.
    pub fn class_weights(&self, subject: &Subject, i: usize, t: f64) -> Result<Vec<f64>> {
        let st = &self.state;
        let u = st
            .u
            .get(i)
            .ok_or_else(|| JlcmError::State(format!("no random effects for subject index {i}")))?;
        let seen = subject.visits.partition_point(|v| v.visit_time <= t).max(1);
        let k_classes = self.spec.n_classes;
        let dens = |k: usize, j: usize| {
            let v = &subject.visits[j];
            normal_logpdf(v.response - longitudinal_mean(v, &st.beta[k], u), st.tau[k])
        };
        let mut w = match self.spec.membership {
            MembershipMode::TimeVarying => {
                let j = seen - 1;
                let mut w = log_membership_probs(&subject.visits[j].x1, &st.xi)?;
                for (k, wk) in w.iter_mut().enumerate() {
                    *wk += dens(k, j);
                }
                w
            }
            MembershipMode::Static => {
                let mut w = log_membership_probs(&subject.visits[0].x1, &st.xi)?;
                for (k, wk) in w.iter_mut().enumerate() {
                    *wk += (0..seen).map(|j| dens(k, j)).sum::<f64>();
                }
                w
            }
        };
        if t > 0.0 {
            for (k, wk) in w.iter_mut().enumerate().take(k_classes) {
                *wk -= class_hazard(&subject.survival, k, st, &self.spec, u)?.cumulative(t)?;
            }
        }
        if w.iter().all(|x| !x.is_finite()) {
            return Err(JlcmError::Numeric(format!("class weights vanish for subject `{}`", subject.id)));
        }
        log_softmax_in_place(&mut w);
        Ok(w.into_iter().map(f64::exp).collect())
    }

    /// Mixture of per-class conditional survivals.
    pub fn survival(&self, subject: &Subject, i: usize, t: f64, dt: f64) -> Result<f64> {
        if dt == 0.0 && t > 0.0 {
            return Ok(1.0);
        }
        let w = self.class_weights(subject, i, t)?;
        let u = &self.state.u[i];
        let per_class = (0..self.spec.n_classes)
            .map(|k| conditional_survival(subject, u, t, dt, k, &self.state, &self.spec))
            .collect::<Result<Vec<_>>>()?;
        Ok(mix(&w, &per_class).clamp(f64::MIN_POSITIVE, 1.0))
    }

    pub fn curve(&self, subject: &Subject, i: usize, t: f64, horizons: &[f64]) -> Result<PredictionCurve> {
        let survival = horizons.iter().map(|&dt| self.survival(subject, i, t, dt)).collect::<Result<_>>()?;
        Ok(PredictionCurve { subject_id: subject.id.clone(), base_time: t, horizons: horizons.to_vec(), survival })
    }

    /// Predicted event probability in `(t, t + dt]` for every subject.
    pub fn risk_scores(&self, data: &Dataset, t: f64, dt: f64) -> Result<Vec<f64>> {
        data.subjects()
            .iter()
            .enumerate()
            .map(|(i, s)| self.survival(s, i, t, dt).map(|p| 1.0 - p))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::types::{BaselineGrid, LongitudinalRecord, RandomEffectDesign, SurvivalRecord};
    use nalgebra::DMatrix;

    fn subject() -> Subject {
        Subject {
            id: "a".into(),
            visits: vec![
                LongitudinalRecord { visit_time: 0.0, response: 1.0, x1: vec![1.0], x2: vec![1.0], z: vec![1.0] },
                LongitudinalRecord { visit_time: 0.4, response: 3.0, x1: vec![1.0], x2: vec![1.0], z: vec![1.0] },
            ],
            survival: SurvivalRecord { followup_time: 1.0, event: false, x3: vec![0.0] },
        }
    }

    fn model(k: usize) -> (ParamState, ModelSpec) {
        let spec = ModelSpec {
            n_classes: k,
            dim_x1: 1,
            dim_x2: 1,
            dim_x3: 1,
            random_effects: RandomEffectDesign::new(1).unwrap(),
            baseline: vec![BaselineGrid::constant(); k],
            membership: MembershipMode::TimeVarying,
            reference_class: true,
        };
        let st = ParamState {
            xi: vec![vec![0.0]; k],
            beta: (0..k).map(|c| vec![1.0 + 2.0 * c as f64]).collect(),
            omega: vec![vec![0.0]; k],
            delta: vec![vec![0.0]; k],
            tau: vec![0.5; k],
            lambda0: (0..k).map(|c| vec![0.2 + 0.3 * c as f64]).collect(),
            sigma_u: DMatrix::identity(1, 1),
            u: vec![vec![0.0]],
            labels: vec![vec![0; 2]],
        };
        (st, spec)
    }

    #[test]
    fn zero_horizon_is_one() {
        let (st, spec) = model(2);
        let p = Predictor::new(st, spec);
        assert_eq!(p.survival(&subject(), 0, 0.5, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn exponential_oracle() {
        let (st, spec) = model(1);
        let s = conditional_survival(&subject(), &[0.0], 0.5, 0.3, 0, &st, &spec).unwrap();
        assert!((s - (-0.2f64 * 0.3).exp()).abs() < 1e-14);
    }

    #[test]
    fn single_class_equals_conditional() {
        let (st, spec) = model(1);
        let direct = conditional_survival(&subject(), &[0.0], 0.5, 0.3, 0, &st, &spec).unwrap();
        let p = Predictor::new(st, spec);
        assert_eq!(p.class_weights(&subject(), 0, 0.5).unwrap(), vec![1.0]);
        assert!((p.survival(&subject(), 0, 0.5, 0.3).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn mixture_arithmetic() {
        assert_eq!(mix(&[1.0, 0.0], &[0.9, 0.7]), 0.9);
        assert!((mix(&[0.5, 0.5], &[0.9, 0.7]) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn later_history_moves_weights() {
        // the visit at 0.4 sits on class 2's mean, so weight shifts once it is seen
        let (st, spec) = model(2);
        let p = Predictor::new(st, spec);
        let early = p.class_weights(&subject(), 0, 0.2).unwrap();
        let late = p.class_weights(&subject(), 0, 0.45).unwrap();
        assert!(early[0] > 0.5);
        assert!(late[1] > 0.5);
        assert!((late.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_non_increasing() {
        let (st, spec) = model(2);
        let p = Predictor::new(st, spec);
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let c = p.curve(&subject(), 0, 0.5, &grid).unwrap();
        assert_eq!(c.survival[0], 1.0);
        for w in c.survival.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn rejects_bad_time() {
        let (st, spec) = model(1);
        assert!(conditional_survival(&subject(), &[0.0], 0.0, 0.3, 0, &st, &spec).is_err());
        assert!(conditional_survival(&subject(), &[0.0], 0.5, -0.1, 0, &st, &spec).is_err());
    }
}
