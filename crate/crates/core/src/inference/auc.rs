//! Inverse-probability-of-censoring weighted time-dependent AUC.

use crate::error::{JlcmError, Result};
use crate::inference::km::KaplanMeier;

/// IPCW estimate of AUC over the window `[t, t + dt)`.
///
/// `risk[i]` is the predicted probability of an event in the window, so
/// higher means riskier. Cases are events inside the window, weighted by
/// `1 / G(T_i- | t)`; controls are subjects still under observation at
/// `t + dt`, weighted by `1 / G(t + dt | t)`. Subjects that fail before `t`
/// or are censored inside the window get weight zero. Pairs only score on the
/// strict ordering `risk_i > risk_j`, so tied scores earn nothing.
pub fn auc_ipcw(risk: &[f64], times: &[f64], events: &[bool], t: f64, dt: f64) -> Result<f64> {
    let n = risk.len();
    if times.len() != n || events.len() != n {
        return Err(JlcmError::Design("risk scores, times and events differ in length".into()));
    }
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(JlcmError::Domain(format!("need t >= 0 and dt > 0, got t={t}, dt={dt}")));
    }
    if let Some(r) = risk.iter().find(|r| r.is_nan()) {
        return Err(JlcmError::Numeric(format!("risk score is {r}")));
    }
    let g = KaplanMeier::censoring(times, events)?;
    let horizon = t + dt;
    let mut cases: Vec<(f64, f64)> = Vec::new();
    let mut controls: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let ti = times[i];
        if ti >= horizon {
            controls.push((risk[i], 1.0 / g.conditional(horizon, t)?));
        } else if ti >= t && events[i] {
            cases.push((risk[i], 1.0 / g.conditional_before(ti, t)?));
        }
    }
    let case_w: f64 = cases.iter().map(|c| c.1).sum();
    let control_w: f64 = controls.iter().map(|c| c.1).sum();
    let denom = case_w * control_w;
    if !(denom > 0.0) {
        return Err(JlcmError::UndefinedAuc { cases: cases.len(), controls: controls.len() });
    }
    // Sort controls by risk and accumulate weights so each case costs log n.
    controls.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = Vec::with_capacity(controls.len() + 1);
    cum.push(0.0);
    for c in &controls {
        cum.push(cum.last().unwrap() + c.1);
    }
    let mut num = 0.0;
    for (r, w) in &cases {
        let below = controls.partition_point(|c| c.0 < *r);
        num += w * cum[below];
    }
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(risk: &[f64], times: &[f64], t: f64, dt: f64) -> f64 {
        let d: Vec<bool> = times.iter().map(|&x| t <= x && x < t + dt).collect();
        let ctrl: Vec<bool> = times.iter().map(|&x| x >= t + dt).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..risk.len() {
            for j in 0..risk.len() {
                if d[i] && ctrl[j] {
                    den += 1.0;
                    if risk[i] > risk[j] {
                        num += 1.0;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_separation() {
        let times = [0.6, 0.7, 0.9, 1.2, 0.55];
        let events = [true; 5];
        let risk = [0.9, 0.8, 0.1, 0.2, 0.95];
        assert_eq!(auc_ipcw(&risk, &times, &events, 0.5, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn ties_score_zero() {
        let times = [0.6, 0.7, 0.9, 1.2];
        assert_eq!(auc_ipcw(&[0.3; 4], &times, &[true; 4], 0.5, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn uncensored_matches_pairwise_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let times: Vec<f64> = (0..200).map(|_| rng.random_range(0.05..1.5)).collect();
        let risk: Vec<f64> = times.iter().map(|t| (2.0 - t) + rng.random_range(-0.5..0.5)).collect();
        let got = auc_ipcw(&risk, &times, &[true; 200], 0.5, 0.3).unwrap();
        assert_eq!(got, brute_force(&risk, &times, 0.5, 0.3));
    }

    #[test]
    fn no_cases_is_undefined() {
        let err = auc_ipcw(&[0.1, 0.2], &[2.0, 3.0], &[true, true], 0.5, 0.3).unwrap_err();
        assert!(matches!(err, JlcmError::UndefinedAuc { cases: 0, controls: 2 }));
    }

    #[test]
    fn censoring_reweights_cases() {
        // one censoring at 0.65 inside the window lowers G for later cases
        let times = [0.6, 0.65, 0.7, 1.0, 1.1];
        let events = [true, false, true, true, false];
        let risk = [0.9, 0.5, 0.1, 0.3, 0.2];
        let g = KaplanMeier::censoring(&times, &events).unwrap();
        let w_late = 1.0 / g.conditional_before(0.7, 0.5).unwrap();
        assert!((w_late - 4.0 / 3.0).abs() < 1e-12);
        let got = auc_ipcw(&risk, &times, &events, 0.5, 0.3).unwrap();
        // case 0.6 (w=1) beats both controls; case 0.7 (w=4/3) beats neither
        let expect = (1.0 * 2.0) / ((1.0 + w_late) * 2.0);
        assert!((got - expect).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn invariant_under_monotone_transform(
            obs in proptest::collection::vec((0.05f64..1.5, proptest::bool::weighted(0.7), -3.0f64..3.0), 20..80),
        ) {
            let times: Vec<f64> = obs.iter().map(|o| o.0).collect();
            let ev: Vec<bool> = obs.iter().map(|o| o.1).collect();
            let risk: Vec<f64> = obs.iter().map(|o| o.2).collect();
            let moved: Vec<f64> = risk.iter().map(|r| (2.0 * r).exp() + 5.0).collect();
            match (auc_ipcw(&risk, &times, &ev, 0.5, 0.3), auc_ipcw(&moved, &times, &ev, 0.5, 0.3)) {
                (Ok(a), Ok(b)) => proptest::prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => proptest::prop_assert!(false),
            }
        }
    }
}
