//! Posterior summaries: mean, sd, and 89% equal-tailed intervals.

use nalgebra::DMatrix;

use crate::error::{JlcmError, Result};
use crate::mcmc::Chain;
use crate::model::types::{ModelSpec, ParamState};

pub const ETI_LEVEL: f64 = 0.89;

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Scalar model parameters of one draw in a fixed, documented order:
/// xi, beta, omega, delta, tau, lambda, then the upper triangle of Sigma_u.
/// Names are one-based (`beta_2_1` is the first coefficient of class 2).
pub fn named_parameters(state: &ParamState, spec: &ModelSpec) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut vecs = |name: &str, v: &[Vec<f64>]| {
        for (k, row) in v.iter().enumerate() {
            for (l, x) in row.iter().enumerate() {
                out.push((format!("{name}_{}_{}", k + 1, l + 1), *x));
            }
        }
    };
    vecs("xi", &state.xi);
    vecs("beta", &state.beta);
    vecs("omega", &state.omega);
    vecs("delta", &state.delta);
    vecs("lambda", &state.lambda0);
    let lambda_start = out.len() - state.lambda0.iter().map(Vec::len).sum::<usize>();
    let taus: Vec<(String, f64)> =
        state.tau.iter().enumerate().map(|(k, t)| (format!("tau_{}", k + 1), *t)).collect();
    out.splice(lambda_start..lambda_start, taus);
    let q = spec.q();
    for a in 0..q {
        for b in a..q {
            out.push((format!("sigma_u_{}_{}", a + 1, b + 1), state.sigma_u[(a, b)]));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSummary {
    pub fn from_samples(name: impl Into<String>, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let tail = (1.0 - ETI_LEVEL) / 2.0;
        Self {
            name: name.into(),
            mean,
            sd: var.sqrt(),
            lower: quantile_sorted(&sorted, tail),
            upper: quantile_sorted(&sorted, 1.0 - tail),
        }
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.lower <= truth && truth <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub rows: Vec<ParamSummary>,
}

impl PosteriorSummary {
    pub fn from_chain(chain: &Chain) -> Result<Self> {
        let draws = chain.post_burn_in();
        if draws.is_empty() {
            return Err(JlcmError::State("chain has no post-burn-in draws".into()));
        }
        let per_draw: Vec<Vec<(String, f64)>> =
            draws.iter().map(|d| named_parameters(d, &chain.spec)).collect();
        let names: Vec<String> = per_draw[0].iter().map(|(n, _)| n.clone()).collect();
        let rows = names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let samples: Vec<f64> = per_draw.iter().map(|d| d[c].1).collect();
                ParamSummary::from_samples(name.clone(), &samples)
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Posterior-mean parameters and random effects, with each label set to
/// its modal class across draws.
pub fn posterior_mean_state(chain: &Chain) -> Result<ParamState> {
    let draws = chain.post_burn_in();
    let first = draws
        .first()
        .ok_or_else(|| JlcmError::State("chain has no post-burn-in draws".into()))?;
    let n = draws.len() as f64;
    let mut mean = first.clone();
    let avg_vecs = |get: &dyn Fn(&ParamState) -> &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut acc: Vec<Vec<f64>> = get(first).iter().map(|r| vec![0.0; r.len()]).collect();
        for d in draws {
            for (a, row) in acc.iter_mut().zip(get(d)) {
                for (x, y) in a.iter_mut().zip(row) {
                    *x += y;
                }
            }
        }
        for a in acc.iter_mut() {
            for x in a.iter_mut() {
                *x /= n;
            }
        }
        acc
    };
    mean.xi = avg_vecs(&|d| &d.xi);
    mean.beta = avg_vecs(&|d| &d.beta);
    mean.omega = avg_vecs(&|d| &d.omega);
    mean.delta = avg_vecs(&|d| &d.delta);
    mean.lambda0 = avg_vecs(&|d| &d.lambda0);
    mean.u = avg_vecs(&|d| &d.u);
    mean.tau = (0..first.tau.len()).map(|k| draws.iter().map(|d| d.tau[k]).sum::<f64>() / n).collect();
    let q = first.sigma_u.nrows();
    let mut sigma = DMatrix::<f64>::zeros(q, q);
    for d in draws {
        sigma += &d.sigma_u;
    }
    mean.sigma_u = sigma / n;
    let k_classes = first.n_classes();
    mean.labels = first
        .labels
        .iter()
        .enumerate()
        .map(|(i, labs)| {
            (0..labs.len())
                .map(|j| {
                    let mut counts = vec![0usize; k_classes];
                    for d in draws {
                        counts[d.labels[i][j]] += 1;
                    }
                    (0..k_classes).max_by_key(|&k| (counts[k], std::cmp::Reverse(k))).unwrap()
                })
                .collect()
        })
        .collect();
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert!((quantile_sorted(&s, 0.1) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn interval_bounds_are_ordered() {
        let s: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let p = ParamSummary::from_samples("x", &s);
        assert!(p.lower <= p.upper);
        assert!((p.lower - 54.945).abs() < 1e-9);
        assert!((p.upper - 944.055).abs() < 1e-9);
    }
}
