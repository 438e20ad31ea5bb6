//! Deterministic starting state.
//!
//! Labels come from a visit-level mixture of regressions; coefficients,
//! random effects and variances follow by least squares.

use nalgebra::{DMatrix, DVector};

use crate::inference::summary::quantile_sorted;
use crate::model::hazard::ClassHazard;
use crate::model::types::{Dataset, MembershipMode, ModelSpec, ParamState};

const MIN_VARIANCE: f64 = 1e-3;
const KMEANS_ITERS: usize = 100;
const EM_ITERS: usize = 500;

/// 1-D k-means; returns cluster indices ordered by ascending centre.
pub fn kmeans_1d(values: &[f64], k: usize) -> Vec<usize> {
    if k <= 1 || values.is_empty() {
        return vec![0; values.len()];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut centres: Vec<f64> =
        (0..k).map(|c| quantile_sorted(&sorted, (c as f64 + 0.5) / k as f64)).collect();
    let mut assign = vec![0usize; values.len()];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (a, &v) in assign.iter_mut().zip(values) {
            let best = (0..k)
                .min_by(|&x, &y| (v - centres[x]).abs().total_cmp(&(v - centres[y]).abs()))
                .unwrap();
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        for (c, centre) in centres.iter_mut().enumerate() {
            let members: Vec<f64> = values.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(v, _)| *v).collect();
            if !members.is_empty() {
                *centre = members.iter().sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centres[a].total_cmp(&centres[b]));
    let mut rank = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    assign.into_iter().map(|a| rank[a]).collect()
}

/// Least squares with a small ridge; `None` when there are no rows.
fn least_squares(rows: &[(&[f64], f64)], p: usize) -> Option<(Vec<f64>, f64)> {
    if rows.is_empty() {
        return None;
    }
    let mut xtx = DMatrix::<f64>::identity(p, p) * 1e-6;
    let mut xty = DVector::<f64>::zeros(p);
    for (x, y) in rows {
        for a in 0..p {
            xty[a] += x[a] * y;
            for b in 0..p {
                xtx[(a, b)] += x[a] * x[b];
            }
        }
    }
    let beta = xtx.cholesky()?.solve(&xty);
    let ssr: f64 = rows
        .iter()
        .map(|(x, y)| {
            let fit: f64 = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            (y - fit).powi(2)
        })
        .sum();
    let dof = (rows.len() as f64 - p as f64).max(1.0);
    Some((beta.iter().copied().collect(), (ssr / dof).max(MIN_VARIANCE)))
}

/// Visit-level mixture of linear regressions fitted by EM, ignoring random
/// effects. Returns per-visit log-likelihood and responsibilities.
struct MixtureFit {
    loglik: f64,
    resp: Vec<Vec<f64>>,
}

fn em_mixture(rows: &[(&[f64], f64)], p: usize, start: &[usize], k: usize) -> Option<MixtureFit> {
    let n = rows.len();
    let mut resp: Vec<Vec<f64>> =
        start.iter().map(|&c| (0..k).map(|j| if j == c { 1.0 } else { 0.0 }).collect()).collect();
    let mut loglik = f64::NEG_INFINITY;
    for _ in 0..EM_ITERS {
        // M step
        let mut params = Vec::with_capacity(k);
        for c in 0..k {
            let w: f64 = resp.iter().map(|r| r[c]).sum();
            if w < p as f64 + 1.0 {
                return None;
            }
            let mut xtx = DMatrix::<f64>::identity(p, p) * 1e-6;
            let mut xty = DVector::<f64>::zeros(p);
            for ((x, y), r) in rows.iter().zip(&resp) {
                for a in 0..p {
                    xty[a] += r[c] * x[a] * y;
                    for b in 0..p {
                        xtx[(a, b)] += r[c] * x[a] * x[b];
                    }
                }
            }
            let beta = xtx.cholesky()?.solve(&xty);
            let ssr: f64 = rows
                .iter()
                .zip(&resp)
                .map(|((x, y), r)| r[c] * (y - x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>()).powi(2))
                .sum();
            params.push((beta, (ssr / w).max(MIN_VARIANCE), w / n as f64));
        }
        // E step
        let mut ll = 0.0;
        for ((x, y), r) in rows.iter().zip(resp.iter_mut()) {
            let logs: Vec<f64> = params
                .iter()
                .map(|(beta, var, pi)| {
                    let fit: f64 = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
                    pi.ln() - 0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (y - fit).powi(2) / var
                })
                .collect();
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            ll += m + total.ln();
            for (rc, l) in r.iter_mut().zip(&logs) {
                *rc = (l - m).exp() / total;
            }
        }
        let done = (ll - loglik).abs() < 1e-8 * ll.abs().max(1.0);
        loglik = ll;
        if done {
            break;
        }
    }
    Some(MixtureFit { loglik, resp })
}

/// Starting state: EM mixture-of-regressions labels (best of several
/// deterministic starts), per-class least squares for beta, shrunken
/// per-subject residual fits for `U`, then tau from the remaining residuals.
pub fn initial_state(data: &Dataset, spec: &ModelSpec) -> ParamState {
    let k_classes = spec.n_classes;
    let p = spec.dim_x2;
    let mut state = ParamState::zeros(spec, data);
    let rows: Vec<(&[f64], f64)> = data
        .subjects()
        .iter()
        .flat_map(|s| s.visits.iter().map(|v| (v.x2.as_slice(), v.response)))
        .collect();

    // candidate starts: subject-mean clusters, response clusters, pooled-residual clusters
    let means: Vec<f64> = data
        .subjects()
        .iter()
        .map(|s| s.visits.iter().map(|v| v.response).sum::<f64>() / s.n_visits() as f64)
        .collect();
    let by_subject = kmeans_1d(&means, k_classes);
    let subject_start: Vec<usize> =
        data.subjects().iter().zip(&by_subject).flat_map(|(s, &c)| std::iter::repeat(c).take(s.n_visits())).collect();
    let responses: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let pooled = least_squares(&rows, p).unwrap_or((vec![0.0; p], 1.0));
    let residuals: Vec<f64> = rows
        .iter()
        .map(|(x, y)| y - x.iter().zip(&pooled.0).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let starts = [subject_start, kmeans_1d(&responses, k_classes), kmeans_1d(&residuals, k_classes)];

    let visit_labels: Vec<usize> = if k_classes == 1 {
        vec![0; rows.len()]
    } else {
        let best = starts
            .iter()
            .filter_map(|s| em_mixture(&rows, p, s, k_classes))
            .max_by(|a, b| a.loglik.total_cmp(&b.loglik));
        match best {
            Some(fit) => fit
                .resp
                .iter()
                .map(|r| (0..k_classes).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap_or(0))
                .collect(),
            None => starts[0].clone(),
        }
    };

    let mut offset = 0;
    for (i, s) in data.subjects().iter().enumerate() {
        let m = s.n_visits();
        let labs = &visit_labels[offset..offset + m];
        state.labels[i] = match spec.membership {
            MembershipMode::TimeVarying => labs.to_vec(),
            MembershipMode::Static => {
                let mut counts = vec![0usize; k_classes];
                labs.iter().for_each(|&c| counts[c] += 1);
                let c = (0..k_classes).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
                vec![c; m]
            }
        };
        offset += m;
    }

    let class_rows = |k: usize, state: &ParamState, with_u: bool| -> Vec<(Vec<f64>, f64)> {
        data.subjects()
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                s.visits.iter().zip(&state.labels[i]).filter(move |(_, &c)| c == k).map(move |(v, _)| {
                    let shift = if with_u { v.z.iter().zip(&state.u[i]).map(|(a, b)| a * b).sum() } else { 0.0 };
                    (v.x2.clone(), v.response - shift)
                })
            })
            .collect()
    };
    let fit_classes = |state: &mut ParamState, with_u: bool| {
        for k in 0..k_classes {
            let owned = class_rows(k, state, with_u);
            let rows: Vec<(&[f64], f64)> = owned.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
            let (beta, var) = if rows.len() > p { least_squares(&rows, p).unwrap_or_else(|| pooled.clone()) } else { pooled.clone() };
            state.beta[k] = beta;
            state.tau[k] = var;
        }
    };
    fit_classes(&mut state, false);

    // U_i: ridge fit of each subject's residuals on Z, shrinking towards zero
    let q = spec.q();
    for (i, s) in data.subjects().iter().enumerate() {
        let mut a = DMatrix::<f64>::identity(q, q);
        let mut b = DVector::<f64>::zeros(q);
        for (v, &k) in s.visits.iter().zip(&state.labels[i]) {
            let r = v.response - v.x2.iter().zip(&state.beta[k]).map(|(x, c)| x * c).sum::<f64>();
            let w = 1.0 / state.tau[k];
            for c in 0..q {
                b[c] += w * v.z[c] * r;
                for d in 0..q {
                    a[(c, d)] += w * v.z[c] * v.z[d];
                }
            }
        }
        if let Some(ch) = a.cholesky() {
            state.u[i] = ch.solve(&b).iter().copied().collect();
        }
    }
    fit_classes(&mut state, true);

    // events / exposure per step with all relative hazards at one
    for k in 0..k_classes {
        let grid = &spec.baseline[k];
        let ones = vec![1.0; grid.n_steps()];
        let unit = ClassHazard::linear(0.0, 0.0, &ones, grid);
        for s in 0..grid.n_steps() {
            let mut events = 0.0;
            let mut exposure = 0.0;
            for subj in data.subjects() {
                let t = subj.survival.followup_time;
                exposure += unit.step_exposure(s, t);
                if subj.survival.event && grid.step_of(t) == s {
                    events += 1.0;
                }
            }
            state.lambda0[k][s] = if events > 0.0 && exposure > 0.0 { events / exposure } else { 0.01 };
        }
    }
    state
}
