//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{JlcmError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Cholesky factor, retrying with a growing ridge when `m` is only semi-definite.
pub fn cholesky_with_ridge(m: &DMatrix<f64>, ridge: f64) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut eps = ridge.max(f64::EPSILON) * scale;
    for _ in 0..12 {
        let shifted = m + DMatrix::identity(n, n) * eps;
        if let Some(c) = shifted.cholesky() {
            return Some(c);
        }
        eps *= 10.0;
    }
    None
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Draw from `N(mean, L L^T)` given the lower factor `l`.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, l: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    mean + l * z
}

/// Zero-mean multivariate normal log-density with a cached factorisation.
#[derive(Debug, Clone)]
pub struct MvnDensity {
    l: DMatrix<f64>,
    log_norm: f64,
}

impl MvnDensity {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| JlcmError::Numeric("random-effect covariance is not positive-definite".into()))?;
        let l = chol.l();
        let log_det_half: f64 = (0..l.nrows()).map(|i| l[(i, i)].ln()).sum();
        let log_norm = -0.5 * cov.nrows() as f64 * LN_2PI - log_det_half;
        Ok(Self { l, log_norm })
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        // forward substitution for L^{-1} x
        let n = x.len();
        let mut y = [0.0f64; 8];
        let mut heap;
        let w: &mut [f64] = if n <= 8 {
            &mut y[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap[..]
        };
        let mut quad = 0.0;
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.l[(i, j)] * w[j];
            }
            w[i] = s / self.l[(i, i)];
            quad += w[i] * w[i];
        }
        self.log_norm - 0.5 * quad
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
