//! Observed-data log-likelihood: labels summed out and random effects
//! integrated against `N(0, Sigma_u)`.
//!
//! Each subject gets a Gaussian mixture built from the sampled `U_i` moments
//! plus any separated modes of the integrand found at a reference state. The
//! integral is Gauss-Hermite quadrature of `g / q_mix` under each component.
//! Summing the labels can leave a second mode that the sampler never visits,
//! because jointly relabelling every visit and shifting `U_i` is a move no
//! single-site update makes.

use nalgebra::{DMatrix, DVector};

use crate::error::{JlcmError, Result};
use crate::linalg::{cholesky_with_ridge, dot, MvnDensity};
use crate::model::likelihood::{log_sum_exp, survival_logdensity};
use crate::model::longitudinal::normal_logpdf;
use crate::model::membership::log_membership_probs;
use crate::model::types::{Dataset, MembershipMode, ModelSpec, ParamState, Subject};
use crate::quadrature::gauss_hermite;

/// Gauss-Hermite nodes per random-effect dimension.
pub const HERMITE_NODES: usize = 15;
/// Approximate size of the mode-search lattice, shared across dimensions.
const SEARCH_POINTS: usize = 1681;
/// Modes more than this far (in log density) below the best one are dropped.
const MODE_WINDOW: f64 = 15.0;
/// Minimum Mahalanobis distance between mixture centres.
const MODE_SEPARATION: f64 = 3.0;

/// Integrand `log N(u; 0, Sigma_u) + log f(y_i, T_i | u, Psi)` with labels
/// summed, for one subject and one parameter state.
pub struct SubjectIntegrand<'a> {
    subject: &'a Subject,
    state: &'a ParamState,
    spec: &'a ModelSpec,
    re: &'a MvnDensity,
    /// `y_ij - x2_ij' beta_k`, per visit and class.
    fixed: Vec<Vec<f64>>,
    log_pi: Vec<Vec<f64>>,
}

impl<'a> SubjectIntegrand<'a> {
    pub fn new(subject: &'a Subject, state: &'a ParamState, spec: &'a ModelSpec, re: &'a MvnDensity) -> Result<Self> {
        let k_classes = spec.n_classes;
        let mut fixed = Vec::with_capacity(subject.n_visits());
        let mut log_pi = Vec::with_capacity(subject.n_visits());
        for (j, v) in subject.visits.iter().enumerate() {
            fixed.push((0..k_classes).map(|k| v.response - dot(&v.x2, &state.beta[k])).collect());
            if j == 0 || spec.membership == MembershipMode::TimeVarying {
                log_pi.push(log_membership_probs(&v.x1, &state.xi)?);
            }
        }
        Ok(Self { subject, state, spec, re, fixed, log_pi })
    }

    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let k_classes = self.spec.n_classes;
        let st = self.state;
        let mut per_class = Vec::with_capacity(k_classes);
        for k in 0..k_classes {
            per_class.push(survival_logdensity(&self.subject.survival, k, st, self.spec, u)?);
        }
        let mut ll = self.re.log_pdf(u);
        let m = self.subject.n_visits();
        match self.spec.membership {
            MembershipMode::TimeVarying => {
                let mut visit_terms = vec![0.0; k_classes];
                for (j, v) in self.subject.visits.iter().enumerate() {
                    let zu = dot(&v.z, u);
                    for k in 0..k_classes {
                        visit_terms[k] = self.log_pi[j][k] + normal_logpdf(self.fixed[j][k] - zu, st.tau[k]);
                        if j + 1 == m {
                            visit_terms[k] += per_class[k];
                        }
                    }
                    ll += log_sum_exp(&visit_terms);
                }
            }
            MembershipMode::Static => {
                for (k, pk) in per_class.iter_mut().enumerate() {
                    *pk += self.log_pi[0][k];
                }
                for (j, v) in self.subject.visits.iter().enumerate() {
                    let zu = dot(&v.z, u);
                    for k in 0..k_classes {
                        per_class[k] += normal_logpdf(self.fixed[j][k] - zu, st.tau[k]);
                    }
                }
                ll += log_sum_exp(&per_class);
            }
        }
        Ok(ll)
    }
}

#[derive(Debug, Clone)]
struct Component {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    log_alpha: f64,
}

/// Fixed quadrature points per subject: `(u, log weight)`, where the weight
/// already includes the mixture proportion and the `1 / q_mix(u)` factor.
#[derive(Debug, Clone)]
pub struct ObservedLikelihood {
    points: Vec<Vec<(Vec<f64>, f64)>>,
    n_components: Vec<usize>,
}

impl ObservedLikelihood {
    /// Builds the per-subject rules from sampled random effects `draws` and a
    /// reference state (typically the posterior mean) used for the mode search.
    pub fn new(
        data: &Dataset,
        draws: &[ParamState],
        reference: &ParamState,
        spec: &ModelSpec,
        n_nodes: usize,
    ) -> Result<Self> {
        if draws.is_empty() {
            return Err(JlcmError::State("no draws to centre the quadrature on".into()));
        }
        let q = spec.q();
        let (x, w) = gauss_hermite(n_nodes);
        let mut std_nodes: Vec<(Vec<f64>, f64)> = vec![(Vec::with_capacity(q), 0.0)];
        for _ in 0..q {
            std_nodes = std_nodes
                .into_iter()
                .flat_map(|(z, lw)| {
                    x.iter().zip(&w).map(move |(&xi, &wi)| {
                        let mut z = z.clone();
                        z.push(xi);
                        (z, lw + wi.ln())
                    })
                })
                .collect();
        }
        let re = MvnDensity::new(&reference.sigma_u)?;
        let mut points = Vec::with_capacity(data.n_subjects());
        let mut n_components = Vec::with_capacity(data.n_subjects());
        for (i, s) in data.subjects().iter().enumerate() {
            let g = SubjectIntegrand::new(s, reference, spec, &re)?;
            let comps = components(&g, draws, i, &reference.sigma_u)?;
            n_components.push(comps.len());
            let factors: Vec<DMatrix<f64>> = comps
                .iter()
                .map(|c| chol(&c.cov).map(|l| l.l()))
                .collect::<Result<_>>()?;
            let densities: Vec<MvnDensity> = comps.iter().map(|c| MvnDensity::new(&c.cov)).collect::<Result<_>>()?;
            let mut subject_points = Vec::with_capacity(comps.len() * std_nodes.len());
            for (c, l) in comps.iter().zip(&factors) {
                for (z, lw) in &std_nodes {
                    let u = &c.mean + l * DVector::from_column_slice(z);
                    let mix: Vec<f64> = comps
                        .iter()
                        .zip(&densities)
                        .map(|(c2, d)| c2.log_alpha + d.log_pdf((&u - &c2.mean).as_slice()))
                        .collect();
                    subject_points.push((u.as_slice().to_vec(), c.log_alpha + lw - log_sum_exp(&mix)));
                }
            }
            points.push(subject_points);
        }
        Ok(Self { points, n_components })
    }

    /// Mixture components used for subject `i`.
    pub fn n_components(&self, i: usize) -> usize {
        self.n_components[i]
    }

    pub fn subject_log_likelihood(&self, i: usize, g: &SubjectIntegrand<'_>) -> Result<f64> {
        let terms: Vec<f64> = self.points[i]
            .iter()
            .map(|(u, lw)| Ok(lw + g.log_density(u)?))
            .collect::<Result<_>>()?;
        Ok(log_sum_exp(&terms))
    }

    pub fn log_likelihood(&self, data: &Dataset, state: &ParamState, spec: &ModelSpec) -> Result<f64> {
        if data.n_subjects() != self.points.len() {
            return Err(JlcmError::State("quadrature was built for a different dataset".into()));
        }
        let re = MvnDensity::new(&state.sigma_u)?;
        let mut total = 0.0;
        for (i, s) in data.subjects().iter().enumerate() {
            let g = SubjectIntegrand::new(s, state, spec, &re)?;
            total += self.subject_log_likelihood(i, &g)?;
        }
        Ok(total)
    }
}

fn chol(cov: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    cholesky_with_ridge(cov, 1e-10)
        .ok_or_else(|| JlcmError::Numeric("quadrature covariance is degenerate".into()))
}

fn mahalanobis2(x: &DVector<f64>, c: &Component) -> Result<f64> {
    let d = x - &c.mean;
    Ok(d.dot(&chol(&c.cov)?.solve(&d)))
}

/// Sampled moments of `U_i`, then any separated modes of `g`.
fn components(g: &SubjectIntegrand<'_>, draws: &[ParamState], i: usize, sigma_u: &DMatrix<f64>) -> Result<Vec<Component>> {
    let q = sigma_u.nrows();
    let n = draws.len() as f64;
    let mut mean = DVector::zeros(q);
    for d in draws {
        mean += DVector::from_column_slice(&d.u[i]);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(q, q);
    for d in draws {
        let r = DVector::from_column_slice(&d.u[i]) - &mean;
        cov += &r * r.transpose();
    }
    cov /= (n - 1.0).max(1.0);
    for j in 0..q {
        cov[(j, j)] = cov[(j, j)].max(1e-10);
    }
    let sampled = Component { log_alpha: laplace_mass(g, &mean, &cov)?, mean, cov };

    let half: Vec<f64> = (0..q)
        .map(|j| (4.0 * sigma_u[(j, j)].sqrt()).max(sampled.mean[j].abs() + 4.0 * sampled.cov[(j, j)].sqrt()))
        .collect();
    let mut comps = vec![sampled];
    let mut modes = Vec::new();
    for start in lattice_maxima(g, &half)? {
        if let Some((m, c, v)) = refine_mode(g, start)? {
            modes.push((m, c, v));
        }
    }
    let best = modes.iter().map(|m| m.2).fold(f64::NEG_INFINITY, f64::max);
    modes.sort_by(|a, b| b.2.total_cmp(&a.2));
    for (m, c, v) in modes {
        if v < best - MODE_WINDOW {
            continue;
        }
        let cand = Component { log_alpha: laplace_mass(g, &m, &c)?, mean: m, cov: c };
        let mut separated = true;
        for existing in &comps {
            let d2 = mahalanobis2(&cand.mean, existing)?.min(mahalanobis2(&existing.mean, &cand)?);
            if d2 < MODE_SEPARATION * MODE_SEPARATION {
                separated = false;
                break;
            }
        }
        if separated {
            comps.push(cand);
        }
    }
    let total = log_sum_exp(&comps.iter().map(|c| c.log_alpha).collect::<Vec<_>>());
    for c in &mut comps {
        c.log_alpha -= total;
    }
    Ok(comps)
}

/// Log of `g(mu) * sqrt(det cov)`, the Laplace estimate of a component's mass.
fn laplace_mass(g: &SubjectIntegrand<'_>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let l = chol(cov)?.l();
    let log_det_half: f64 = (0..cov.nrows()).map(|j| l[(j, j)].ln()).sum();
    Ok(g.log_density(mean.as_slice())? + log_det_half)
}

/// Local maxima of `g` on a regular lattice over `[-half, half]`.
fn lattice_maxima(g: &SubjectIntegrand<'_>, half: &[f64]) -> Result<Vec<DVector<f64>>> {
    let q = half.len();
    let per_dim = ((SEARCH_POINTS as f64).powf(1.0 / q as f64).round() as usize).max(5) | 1;
    let total = per_dim.pow(q as u32);
    let coord = |idx: usize, j: usize| {
        let step = 2.0 * half[j] / (per_dim - 1) as f64;
        -half[j] + step * idx as f64
    };
    let unflatten = |mut flat: usize| {
        let mut idx = vec![0usize; q];
        for slot in idx.iter_mut() {
            *slot = flat % per_dim;
            flat /= per_dim;
        }
        idx
    };
    let mut values = Vec::with_capacity(total);
    for flat in 0..total {
        let idx = unflatten(flat);
        let u: Vec<f64> = (0..q).map(|j| coord(idx[j], j)).collect();
        values.push(g.log_density(&u)?);
    }
    let mut out = Vec::new();
    'outer: for flat in 0..total {
        let idx = unflatten(flat);
        let v = values[flat];
        if !v.is_finite() {
            continue;
        }
        // compare against the 3^q - 1 neighbours
        for offset in 0..3usize.pow(q as u32) {
            let mut o = offset;
            let mut nb = 0usize;
            let mut mult = 1usize;
            let mut is_self = true;
            for &ij in &idx {
                let step = (o % 3) as isize - 1;
                o /= 3;
                is_self &= step == 0;
                let nj = ij as isize + step;
                if nj < 0 || nj >= per_dim as isize {
                    nb = usize::MAX;
                    break;
                }
                nb += nj as usize * mult;
                mult *= per_dim;
            }
            if is_self || nb == usize::MAX {
                continue;
            }
            if values[nb] > v {
                continue 'outer;
            }
        }
        out.push(DVector::from_iterator(q, (0..q).map(|j| coord(idx[j], j))));
    }
    Ok(out)
}

/// Damped Newton ascent with finite-difference derivatives. Returns the mode,
/// the inverse negative Hessian and the log density there, or `None` when the
/// Hessian is not negative definite.
fn refine_mode(g: &SubjectIntegrand<'_>, start: DVector<f64>) -> Result<Option<(DVector<f64>, DMatrix<f64>, f64)>> {
    let q = start.len();
    let mut x = start;
    let mut fx = g.log_density(x.as_slice())?;
    for _ in 0..50 {
        let (grad, hess) = derivatives(g, &x, fx)?;
        let neg = -&hess;
        let Some(c) = neg.clone().cholesky() else {
            return Ok(None);
        };
        let step = c.solve(&grad);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let cand = &x + &step * t;
            let fc = g.log_density(cand.as_slice())?;
            if fc >= fx {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || step.norm() * t < 1e-9 {
            break;
        }
    }
    let (_, hess) = derivatives(g, &x, fx)?;
    let neg = -hess;
    match neg.clone().cholesky() {
        Some(c) => {
            let mut cov = c.inverse();
            for i in 0..q {
                for j in 0..i {
                    let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                    cov[(i, j)] = v;
                    cov[(j, i)] = v;
                }
            }
            Ok(Some((x, cov, fx)))
        }
        None => Ok(None),
    }
}

fn derivatives(g: &SubjectIntegrand<'_>, x: &DVector<f64>, fx: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let q = x.len();
    let h: Vec<f64> = (0..q).map(|j| 1e-4 * x[j].abs().max(1.0)).collect();
    let at = |d: &[(usize, f64)]| -> Result<f64> {
        let mut y = x.clone();
        for &(j, s) in d {
            y[j] += s;
        }
        g.log_density(y.as_slice())
    };
    let mut grad = DVector::zeros(q);
    let mut hess = DMatrix::zeros(q, q);
    for j in 0..q {
        let fp = at(&[(j, h[j])])?;
        let fm = at(&[(j, -h[j])])?;
        grad[j] = (fp - fm) / (2.0 * h[j]);
        hess[(j, j)] = (fp - 2.0 * fx + fm) / (h[j] * h[j]);
        for k in 0..j {
            let v = (at(&[(j, h[j]), (k, h[k])])? - at(&[(j, h[j]), (k, -h[k])])? - at(&[(j, -h[j]), (k, h[k])])?
                + at(&[(j, -h[j]), (k, -h[k])])?)
                / (4.0 * h[j] * h[k]);
            hess[(j, k)] = v;
            hess[(k, j)] = v;
        }
    }
    Ok((grad, hess))
}
