//! Domain types shared by every stage of the pipeline.

use nalgebra::DMatrix;

use crate::error::{JlcmError, Result};

/// One longitudinal measurement `y_ij` taken at visit time `t_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalRecord {
    pub visit_time: f64,
    pub response: f64,
    /// Membership design row `X_1i(t_ij)`, time terms included.
    pub x1: Vec<f64>,
    /// Fixed-effect design row `X_2i(t_ij)`.
    pub x2: Vec<f64>,
    /// Random-effect design row `Z_i(t_ij)`.
    pub z: Vec<f64>,
}

/// Observed follow-up `T_i = min(T*_i, C_i)` with its event flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub followup_time: f64,
    pub event: bool,
    /// Baseline survival covariates `X_3i`.
    pub x3: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub visits: Vec<LongitudinalRecord>,
    pub survival: SurvivalRecord,
}

impl Subject {
    pub fn n_visits(&self) -> usize {
        self.visits.len()
    }

    pub fn last_visit_time(&self) -> f64 {
        self.visits.last().map_or(0.0, |v| v.visit_time)
    }
}

/// Random-effect design as a function of time: `Z(t) = (1, t, ..., t^(q-1))`.
///
/// The hazard integrates `Z(u)` over time, so the design has to be a known
/// function of `u` rather than a free column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomEffectDesign {
    pub q: usize,
}

impl RandomEffectDesign {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(JlcmError::Design("random-effect dimension q must be >= 1".into()));
        }
        Ok(Self { q })
    }

    pub fn row(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.q);
        let mut p = 1.0;
        for _ in 0..self.q {
            out.push(p);
            p *= t;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    subjects: Vec<Subject>,
    dim_x1: usize,
    dim_x2: usize,
    dim_x3: usize,
    q: usize,
}

impl Dataset {
    /// Validates every record and fixes the design dimensions from the first subject.
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        let (dim_x1, dim_x2, dim_x3, q) = match subjects.first() {
            Some(s) => {
                let v = s.visits.first().ok_or_else(|| {
                    JlcmError::Data(format!("subject `{}` has no longitudinal records", s.id))
                })?;
                (v.x1.len(), v.x2.len(), s.survival.x3.len(), v.z.len())
            }
            None => (0, 0, 0, 0),
        };
        for s in &subjects {
            if s.visits.is_empty() {
                return Err(JlcmError::Data(format!(
                    "subject `{}` has no longitudinal records",
                    s.id
                )));
            }
            let mut prev = f64::NEG_INFINITY;
            for v in &s.visits {
                if !(v.visit_time >= 0.0) || !v.visit_time.is_finite() {
                    return Err(JlcmError::Data(format!(
                        "subject `{}`: visit time {} must be finite and >= 0",
                        s.id, v.visit_time
                    )));
                }
                if v.visit_time <= prev {
                    return Err(JlcmError::Data(format!(
                        "subject `{}`: visit times must be strictly increasing",
                        s.id
                    )));
                }
                prev = v.visit_time;
                if !v.response.is_finite() {
                    return Err(JlcmError::Data(format!("subject `{}`: non-finite response", s.id)));
                }
                if v.x1.len() != dim_x1 || v.x2.len() != dim_x2 || v.z.len() != q {
                    return Err(JlcmError::Design(format!(
                        "subject `{}`: design rows have inconsistent lengths",
                        s.id
                    )));
                }
            }
            if s.survival.x3.len() != dim_x3 {
                return Err(JlcmError::Design(format!(
                    "subject `{}`: survival covariates have length {}, expected {}",
                    s.id,
                    s.survival.x3.len(),
                    dim_x3
                )));
            }
            let t = s.survival.followup_time;
            if !(t > 0.0) || !t.is_finite() {
                return Err(JlcmError::Data(format!(
                    "subject `{}`: follow-up time {} must be finite and > 0",
                    s.id, t
                )));
            }
            if t < s.last_visit_time() {
                return Err(JlcmError::Data(format!(
                    "subject `{}`: follow-up time {} precedes last visit {}",
                    s.id,
                    t,
                    s.last_visit_time()
                )));
            }
        }
        Ok(Self { subjects, dim_x1, dim_x2, dim_x3, q })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_visits(&self) -> usize {
        self.subjects.iter().map(Subject::n_visits).sum()
    }

    pub fn visit_counts(&self) -> Vec<usize> {
        self.subjects.iter().map(Subject::n_visits).collect()
    }

    pub fn dim_x1(&self) -> usize {
        self.dim_x1
    }

    pub fn dim_x2(&self) -> usize {
        self.dim_x2
    }

    pub fn dim_x3(&self) -> usize {
        self.dim_x3
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.subjects
            .iter()
            .filter(|s| s.survival.event)
            .map(|s| s.survival.followup_time)
            .collect()
    }
}

/// Interior cut points of a piecewise-constant baseline hazard.
///
/// Step `s` covers `(cuts[s-1], cuts[s]]` with `cuts[-1] = 0`; the last step
/// is open-ended so the hazard is defined at every follow-up time.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineGrid {
    cuts: Vec<f64>,
}

impl BaselineGrid {
    pub fn constant() -> Self {
        Self { cuts: Vec::new() }
    }

    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        let mut prev = 0.0;
        for &c in &cuts {
            if !(c > prev) || !c.is_finite() {
                return Err(JlcmError::Design(format!(
                    "baseline cut points must be positive and strictly increasing, got {cuts:?}"
                )));
            }
            prev = c;
        }
        Ok(Self { cuts })
    }

    /// `n_steps` equal-count steps at empirical quantiles of `event_times`.
    pub fn from_quantiles(event_times: &[f64], n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(JlcmError::Design("baseline needs at least one step".into()));
        }
        if n_steps == 1 {
            return Ok(Self::constant());
        }
        let mut sorted: Vec<f64> = event_times.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.len() < n_steps {
            return Err(JlcmError::Design(format!(
                "{} events cannot support {} baseline steps",
                sorted.len(),
                n_steps
            )));
        }
        let mut cuts = Vec::with_capacity(n_steps - 1);
        for s in 1..n_steps {
            let c = crate::inference::summary::quantile_sorted(&sorted, s as f64 / n_steps as f64);
            if cuts.last().map_or(c > 0.0, |&last| c > last) {
                cuts.push(c);
            }
        }
        Self::new(cuts)
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn n_steps(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Index of the step containing `t` (left-open, right-closed intervals).
    pub fn step_of(&self, t: f64) -> usize {
        self.cuts.iter().take_while(|&&c| t > c).count()
    }

    /// `(lower, upper)` bounds of step `s`; the last upper bound is `+inf`.
    pub fn step_bounds(&self, s: usize) -> (f64, f64) {
        let lo = if s == 0 { 0.0 } else { self.cuts[s - 1] };
        let hi = self.cuts.get(s).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipMode {
    /// One label per visit, membership probabilities evaluated per visit.
    TimeVarying,
    /// One label per subject (basic JLCM); membership uses the first visit's row.
    Static,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub n_classes: usize,
    pub dim_x1: usize,
    pub dim_x2: usize,
    pub dim_x3: usize,
    pub random_effects: RandomEffectDesign,
    /// One grid per class.
    pub baseline: Vec<BaselineGrid>,
    pub membership: MembershipMode,
    /// Pins `xi_K = 0` when set.
    pub reference_class: bool,
}

impl ModelSpec {
    /// Spec matching `data`'s design dimensions with `n_steps` quantile steps per class.
    pub fn for_dataset(data: &Dataset, n_classes: usize, n_steps: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(JlcmError::Design("K must be >= 1".into()));
        }
        let grid = BaselineGrid::from_quantiles(&data.event_times(), n_steps)?;
        Ok(Self {
            n_classes,
            dim_x1: data.dim_x1(),
            dim_x2: data.dim_x2(),
            dim_x3: data.dim_x3(),
            random_effects: RandomEffectDesign::new(data.q().max(1))?,
            baseline: vec![grid; n_classes],
            membership: MembershipMode::TimeVarying,
            reference_class: true,
        })
    }

    pub fn q(&self) -> usize {
        self.random_effects.q
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.n_subjects() == 0 {
            return Ok(());
        }
        if data.dim_x1() != self.dim_x1
            || data.dim_x2() != self.dim_x2
            || data.dim_x3() != self.dim_x3
            || data.q() != self.q()
        {
            return Err(JlcmError::Design(format!(
                "dataset dims (x1={}, x2={}, x3={}, q={}) do not match model (x1={}, x2={}, x3={}, q={})",
                data.dim_x1(),
                data.dim_x2(),
                data.dim_x3(),
                data.q(),
                self.dim_x1,
                self.dim_x2,
                self.dim_x3,
                self.q()
            )));
        }
        if self.baseline.len() != self.n_classes {
            return Err(JlcmError::Design("one baseline grid per class is required".into()));
        }
        Ok(())
    }

    /// Number of free membership coefficient vectors.
    pub fn n_free_xi(&self) -> usize {
        if self.reference_class {
            self.n_classes - 1
        } else {
            self.n_classes
        }
    }

    pub fn shares_baseline_grid(&self) -> bool {
        self.baseline.windows(2).all(|w| w[0] == w[1])
    }
}

/// One full draw of the model parameters plus random effects and latent labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub xi: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub lambda0: Vec<Vec<f64>>,
    pub sigma_u: DMatrix<f64>,
    pub u: Vec<Vec<f64>>,
    /// Zero-based class labels `R_ij`.
    pub labels: Vec<Vec<usize>>,
}

impl ParamState {
    /// All-zero coefficients, unit variances and hazards, identity `Sigma_u`, labels in class 0.
    pub fn zeros(spec: &ModelSpec, data: &Dataset) -> Self {
        let k = spec.n_classes;
        let q = spec.q();
        Self {
            xi: vec![vec![0.0; spec.dim_x1]; k],
            beta: vec![vec![0.0; spec.dim_x2]; k],
            omega: vec![vec![0.0; spec.dim_x3]; k],
            delta: vec![vec![0.0; q]; k],
            tau: vec![1.0; k],
            lambda0: spec.baseline.iter().map(|g| vec![1.0; g.n_steps()]).collect(),
            sigma_u: DMatrix::identity(q, q),
            u: vec![vec![0.0; q]; data.n_subjects()],
            labels: data.subjects().iter().map(|s| vec![0; s.n_visits()]).collect(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.beta.len()
    }

    pub fn check(&self, spec: &ModelSpec, data: &Dataset) -> Result<()> {
        let k = spec.n_classes;
        let bad = |what: &str| Err(JlcmError::State(format!("{what} inconsistent with model")));
        if self.xi.len() != k || self.xi.iter().any(|v| v.len() != spec.dim_x1) {
            return bad("xi");
        }
        if self.beta.len() != k || self.beta.iter().any(|v| v.len() != spec.dim_x2) {
            return bad("beta");
        }
        if self.omega.len() != k || self.omega.iter().any(|v| v.len() != spec.dim_x3) {
            return bad("omega");
        }
        if self.delta.len() != k || self.delta.iter().any(|v| v.len() != spec.q()) {
            return bad("delta");
        }
        if self.tau.len() != k || self.tau.iter().any(|&t| !(t > 0.0)) {
            return bad("tau");
        }
        if self.lambda0.len() != k
            || self
                .lambda0
                .iter()
                .zip(&spec.baseline)
                .any(|(l, g)| l.len() != g.n_steps() || l.iter().any(|&x| !(x > 0.0)))
        {
            return bad("lambda0");
        }
        if self.sigma_u.nrows() != spec.q() || self.sigma_u.ncols() != spec.q() {
            return bad("sigma_u");
        }
        if self.u.len() != data.n_subjects() || self.u.iter().any(|v| v.len() != spec.q()) {
            return bad("random effects");
        }
        if self.labels.len() != data.n_subjects() {
            return Err(JlcmError::State("missing labels".into()));
        }
        for (lab, s) in self.labels.iter().zip(data.subjects()) {
            if lab.len() != s.n_visits() {
                return Err(JlcmError::State(format!("missing labels for subject `{}`", s.id)));
            }
            if lab.iter().any(|&r| r >= k) {
                return Err(JlcmError::State(format!("label out of range for subject `{}`", s.id)));
            }
        }
        if spec.reference_class && self.xi[k - 1].iter().any(|&x| x != 0.0) {
            return bad("reference-class xi");
        }
        Ok(())
    }
}

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub beta_mean: Vec<f64>,
    pub beta_cov: DMatrix<f64>,
    pub lambda_shape: f64,
    pub lambda_rate: f64,
    pub tau_shape: f64,
    pub tau_rate: f64,
    pub sigma_df: f64,
    pub sigma_scale: DMatrix<f64>,
    /// Standard deviation of the independent normal priors on `omega`, `delta`, `xi`.
    pub normal_sd: f64,
}

impl Priors {
    pub fn defaults(spec: &ModelSpec) -> Self {
        let q = spec.q();
        Self {
            beta_mean: vec![0.0; spec.dim_x2],
            beta_cov: DMatrix::identity(spec.dim_x2, spec.dim_x2) * 100.0,
            lambda_shape: 0.01,
            lambda_rate: 0.01,
            tau_shape: 0.01,
            tau_rate: 0.01,
            sigma_df: q as f64 + 2.0,
            sigma_scale: DMatrix::identity(q, q),
            normal_sd: 1.0,
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let positive = [
            ("lambda_shape", self.lambda_shape),
            ("lambda_rate", self.lambda_rate),
            ("tau_shape", self.tau_shape),
            ("tau_rate", self.tau_rate),
            ("normal_sd", self.normal_sd),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(JlcmError::Config(format!("prior {name} must be > 0, got {v}")));
            }
        }
        if self.beta_mean.len() != spec.dim_x2
            || self.beta_cov.nrows() != spec.dim_x2
            || self.beta_cov.ncols() != spec.dim_x2
        {
            return Err(JlcmError::Design("beta prior dimensions do not match X2".into()));
        }
        if self.beta_cov.clone().cholesky().is_none() {
            return Err(JlcmError::Config("beta prior covariance is not positive-definite".into()));
        }
        let q = spec.q();
        if !(self.sigma_df > q as f64 - 1.0) {
            return Err(JlcmError::Config(format!(
                "inverse-Wishart df {} must exceed q - 1 = {}",
                self.sigma_df,
                q as f64 - 1.0
            )));
        }
        if self.sigma_scale.nrows() != q || self.sigma_scale.clone().cholesky().is_none() {
            return Err(JlcmError::Config("inverse-Wishart scale must be q x q positive-definite".into()));
        }
        Ok(())
    }
}
