//! Adaptive Metropolis with a fixed-component mixture proposal.
//!
//! For the first `2d` iterations proposals come from `N(x, 0.1^2 I / d)`.
//! Afterwards they come from `N(x, sigma2 * Sigma_m / d)` with probability
//! `1 - alpha_prop` and from the fixed component otherwise, where `Sigma_m`
//! is the running empirical covariance of the block.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::cholesky_with_ridge;

pub const FIXED_SCALE: f64 = 0.1;
pub const DEFAULT_SIGMA2: f64 = 2.38 * 2.38;
pub const DEFAULT_ALPHA_PROP: f64 = 0.05;
pub const DEFAULT_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AmState {
    pub dim: usize,
    /// Number of states recorded so far; the next proposal is iteration `iteration + 1`.
    pub iteration: usize,
    pub mean: DVector<f64>,
    /// Sum of outer products of deviations from the running mean.
    pub scatter: DMatrix<f64>,
    pub sigma2: f64,
    pub alpha_prop: f64,
    pub ridge: f64,
}

/// Which mixture component produced a proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalKind {
    Fixed,
    Adapted,
}

impl AmState {
    pub fn new(dim: usize, sigma2: f64, alpha_prop: f64, ridge: f64) -> Self {
        assert!(alpha_prop > 0.0 && alpha_prop <= 1.0, "alpha_prop must lie in (0, 1]");
        Self {
            dim,
            iteration: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
            sigma2,
            alpha_prop,
            ridge,
        }
    }

    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, DEFAULT_SIGMA2, DEFAULT_ALPHA_PROP, DEFAULT_RIDGE)
    }

    /// `(0.1)^2 I_d / d`.
    pub fn seed_cov(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * (FIXED_SCALE * FIXED_SCALE / self.dim as f64)
    }

    /// Running empirical covariance `Sigma_m` (with ridge), once two states are recorded.
    pub fn empirical_cov(&self) -> Option<DMatrix<f64>> {
        if self.iteration < 2 {
            return None;
        }
        let mut c = &self.scatter / (self.iteration as f64 - 1.0);
        for i in 0..self.dim {
            c[(i, i)] += self.ridge;
        }
        Some(c)
    }

    /// True once the proposal for the upcoming iteration may use `Sigma_m`.
    pub fn is_adapting(&self) -> bool {
        self.iteration + 1 > 2 * self.dim
    }

    /// Records the chain state after an iteration (accepted or not).
    pub fn record(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.iteration += 1;
        let n = self.iteration as f64;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / n;
        let delta2 = &x - &self.mean;
        self.scatter += &delta * delta2.transpose();
    }

    fn draw_with_cov<R: Rng + ?Sized>(current: &[f64], l: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
        let d = current.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        (0..d)
            .map(|i| current[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }

    /// Draws a proposal around `current`.
    pub fn propose<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> (Vec<f64>, ProposalKind) {
        let fixed_sd = FIXED_SCALE / (self.dim as f64).sqrt();
        let fixed = |rng: &mut R| -> Vec<f64> {
            current.iter().map(|&c| c + fixed_sd * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        if !self.is_adapting() || rng.random::<f64>() < self.alpha_prop {
            return (fixed(rng), ProposalKind::Fixed);
        }
        let Some(emp) = self.empirical_cov() else {
            return (fixed(rng), ProposalKind::Fixed);
        };
        let scaled = emp * (self.sigma2 / self.dim as f64);
        match cholesky_with_ridge(&scaled, self.ridge) {
            Some(ch) => (Self::draw_with_cov(current, &ch.l(), rng), ProposalKind::Adapted),
            None => {
                warn!("empirical covariance is not positive semi-definite; using the fixed proposal");
                (fixed(rng), ProposalKind::Fixed)
            }
        }
    }
}

/// Metropolis accept/reject on log-target values; non-finite proposals are rejected.
pub fn am_accept<R: Rng + ?Sized>(current_log_target: f64, proposal_log_target: f64, rng: &mut R) -> bool {
    if proposal_log_target.is_nan() || proposal_log_target == f64::NEG_INFINITY {
        return false;
    }
    let log_ratio = proposal_log_target - current_log_target;
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// One AM iteration: propose, accept or reject, record. Returns whether the move was accepted.
pub fn am_step<R, F>(
    am: &mut AmState,
    current: &mut Vec<f64>,
    current_log_target: &mut f64,
    mut log_target: F,
    rng: &mut R,
) -> bool
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    let (proposal, _) = am.propose(current, rng);
    let lp = log_target(&proposal);
    let accepted = am_accept(*current_log_target, lp, rng);
    if accepted {
        *current = proposal;
        *current_log_target = lp;
    }
    am.record(current);
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pre_adaptation_covariance_is_fixed() {
        let am = AmState::with_defaults(4);
        assert!(!am.is_adapting());
        assert!((am.seed_cov() - DMatrix::identity(4, 4) * 0.0025).abs().max() < 1e-18);
    }

    #[test]
    fn equal_proposal_is_always_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..10_000).all(|_| am_accept(-3.2, -3.2, &mut rng)));
    }

    #[test]
    fn impossible_proposal_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| !am_accept(-3.2, f64::NEG_INFINITY, &mut rng)));
        assert!(!am_accept(-3.2, f64::NAN, &mut rng));
    }

    #[test]
    fn running_covariance_matches_batch() {
        let mut am = AmState::new(2, DEFAULT_SIGMA2, 0.05, 0.0);
        let pts = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 4.0], [-1.0, 0.0]];
        for p in &pts {
            am.record(p);
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        let cxy = pts.iter().map(|p| (p[0] - mx) * (p[1] - my)).sum::<f64>() / (n - 1.0);
        let cxx = pts.iter().map(|p| (p[0] - mx).powi(2)).sum::<f64>() / (n - 1.0);
        let c = am.empirical_cov().unwrap();
        assert!((c[(0, 1)] - cxy).abs() < 1e-12);
        assert!((c[(0, 0)] - cxx).abs() < 1e-12);
    }

    #[test]
    fn alpha_one_uses_fixed_component() {
        let mut am = AmState::new(2, DEFAULT_SIGMA2, 1.0, 0.0);
        for i in 0..100 {
            am.record(&[i as f64, -(i as f64)]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(am.propose(&[0.0, 0.0], &mut rng).1, ProposalKind::Fixed);
        }
    }

    #[test]
    fn adapted_covariance_tracks_recorded_states() {
        let target = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let l = target.clone().cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut am = AmState::with_defaults(2);
        for _ in 0..10_000 {
            let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            am.record((&l * z).as_slice());
        }
        let err = (am.empirical_cov().unwrap() - &target).norm() / target.norm();
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn recovers_gaussian_target() {
        let mean = DVector::from_column_slice(&[1.0, -2.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let prec = cov.clone().try_inverse().unwrap();
        let log_target = |x: &[f64]| {
            let d = DVector::from_column_slice(x) - &mean;
            -0.5 * (d.transpose() * &prec * &d)[0]
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut am = AmState::with_defaults(2);
        let mut x = vec![0.0, 0.0];
        let mut lp = log_target(&x);
        for _ in 0..5_000 {
            am_step(&mut am, &mut x, &mut lp, log_target, &mut rng);
        }
        let n = 50_000;
        let mut sum = DVector::zeros(2);
        let mut outer = DMatrix::zeros(2, 2);
        for _ in 0..n {
            am_step(&mut am, &mut x, &mut lp, log_target, &mut rng);
            let v = DVector::from_column_slice(&x);
            sum += &v;
            outer += &v * v.transpose();
        }
        let m = &sum / n as f64;
        let c = &outer / n as f64 - &m * m.transpose();
        assert!((&m - &mean).amax() < 0.05, "mean {m}");
        assert!((&c - &cov).norm() / cov.norm() < 0.1, "cov {c}");
    }
}
