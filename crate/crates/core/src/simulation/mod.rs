//! Synthetic data from the two-class time-varying design.

pub mod aids;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{JlcmError, Result};
use crate::model::membership::membership_probs;
use crate::model::types::{
    BaselineGrid, Dataset, LongitudinalRecord, MembershipMode, ModelSpec, ParamState, RandomEffectDesign,
    Subject, SurvivalRecord,
};

/// Regeneration attempts per subject before giving up.
const MAX_ATTEMPTS: u64 = 10_000;

/// Generating parameters of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct SimClass {
    /// Membership coefficients on `(X1, time)`.
    pub xi: Vec<f64>,
    /// Longitudinal coefficients on `(X1, time)`.
    pub beta: Vec<f64>,
    /// Residual variance.
    pub tau: f64,
    /// Constant baseline hazard.
    pub lambda0: f64,
    /// Coefficient on `X3`.
    pub omega: f64,
    /// Association with `(U1, U2 t)`.
    pub delta: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub n_subjects: usize,
    pub time_grid: Vec<f64>,
    pub min_visits: usize,
    pub classes: Vec<SimClass>,
    pub censor_mean: f64,
    /// End of study: follow-up is cut at this time when set.
    pub admin_censor: Option<f64>,
    /// `P(X3 = 1)`.
    pub treatment_prob: f64,
    pub seed: u64,
}

impl Default for SimDesign {
    fn default() -> Self {
        let time_grid: Vec<f64> = (0..18).map(|j| j as f64 * 0.05).collect();
        let admin = time_grid.last().copied();
        Self {
            n_subjects: 50,
            time_grid,
            min_visits: 6,
            classes: vec![
                SimClass {
                    xi: vec![0.01, 0.2],
                    beta: vec![2.0, 0.5],
                    tau: 0.1,
                    lambda0: 0.2,
                    omega: 0.5,
                    delta: [-0.5, -0.8],
                },
                SimClass {
                    xi: vec![0.0, 1.0],
                    beta: vec![4.0, 3.0],
                    tau: 0.5,
                    lambda0: 0.1,
                    omega: 0.8,
                    delta: [-1.5, -0.4],
                },
            ],
            censor_mean: 6.0,
            admin_censor: admin,
            treatment_prob: 0.5,
            seed: 1,
        }
    }
}

impl SimDesign {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(JlcmError::Design("design needs at least one class".into()));
        }
        for c in &self.classes {
            if c.xi.len() != 2 || c.beta.len() != 2 {
                return Err(JlcmError::Design("xi and beta must have two coefficients (X1, time)".into()));
            }
            if !(c.tau > 0.0) || !(c.lambda0 > 0.0) {
                return Err(JlcmError::Domain("tau and lambda0 must be > 0".into()));
            }
        }
        if !(self.censor_mean > 0.0) {
            return Err(JlcmError::Domain(format!("censor_mean must be > 0, got {}", self.censor_mean)));
        }
        if self.time_grid.is_empty() || self.time_grid.windows(2).any(|w| w[1] <= w[0]) || self.time_grid[0] < 0.0 {
            return Err(JlcmError::Design("time grid must be non-empty, non-negative and increasing".into()));
        }
        if self.min_visits == 0 || self.min_visits > self.time_grid.len() {
            return Err(JlcmError::Design(format!(
                "min_visits must lie in 1..={}",
                self.time_grid.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.treatment_prob) {
            return Err(JlcmError::Domain("treatment_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Model spec matching the generated design (constant baseline, q = 2).
    pub fn model_spec(&self) -> ModelSpec {
        let k = self.classes.len();
        ModelSpec {
            n_classes: k,
            dim_x1: 2,
            dim_x2: 2,
            dim_x3: 1,
            random_effects: RandomEffectDesign { q: 2 },
            baseline: vec![BaselineGrid::constant(); k],
            membership: MembershipMode::TimeVarying,
            reference_class: false,
        }
    }
}

/// Inverts `H(T) = -log u` for the hazard `lambda0 * exp(linear + slope * t)`.
///
/// `linear` collects `w X3 + delta_1 U1` and `slope` is `delta_2 U2`. Returns
/// `+inf` when the cumulative hazard stays below `-log u` for all time.
pub fn invert_survival_time(u: f64, lambda0: f64, linear: f64, slope: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(JlcmError::Domain(format!("u must lie in (0, 1), got {u}")));
    }
    if !(lambda0 > 0.0) {
        return Err(JlcmError::Domain(format!("lambda0 must be > 0, got {lambda0}")));
    }
    let target = -u.ln();
    let scale = lambda0 * linear.exp();
    if slope.abs() < 1e-10 {
        return Ok(target / scale);
    }
    let arg = slope * target / scale;
    if arg <= -1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(arg.ln_1p() / slope)
}

/// Shape of a subject's label path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpPattern {
    NoJump,
    SingleJump,
    MultipleJumps,
}

pub fn count_jumps(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] != w[1]).count()
}

pub fn classify_trajectory(labels: &[usize]) -> JumpPattern {
    match count_jumps(labels) {
        0 => JumpPattern::NoJump,
        1 => JumpPattern::SingleJump,
        _ => JumpPattern::MultipleJumps,
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub truth: ParamState,
    pub spec: ModelSpec,
}

impl Simulated {
    pub fn true_labels(&self) -> &[Vec<usize>] {
        &self.truth.labels
    }

    pub fn censoring_rate(&self) -> f64 {
        let n = self.data.n_subjects();
        if n == 0 {
            return 0.0;
        }
        self.data.subjects().iter().filter(|s| !s.survival.event).count() as f64 / n as f64
    }
}

struct SubjectDraw {
    subject: Subject,
    u: Vec<f64>,
    labels: Vec<usize>,
}

fn subject_rng(seed: u64, i: usize, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((attempt << 32) | i as u64);
    rng
}

fn draw_subject(design: &SimDesign, i: usize) -> Result<SubjectDraw> {
    let grid = &design.time_grid;
    let censor = Exp::new(1.0 / design.censor_mean).map_err(|e| JlcmError::Domain(e.to_string()))?;
    let treat = Bernoulli::new(design.treatment_prob).map_err(|e| JlcmError::Domain(e.to_string()))?;
    let xi: Vec<Vec<f64>> = design.classes.iter().map(|c| c.xi.clone()).collect();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = subject_rng(design.seed, i, attempt);
        let x1: f64 = rng.sample(StandardNormal);
        let x3 = if treat.sample(&mut rng) { 1.0 } else { 0.0 };
        let u = [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)];
        let mut labels = Vec::with_capacity(grid.len());
        let mut responses = Vec::with_capacity(grid.len());
        for &t in grid {
            let p = membership_probs(&[x1, t], &xi)?;
            let r: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = p.len() - 1;
            for (c, pc) in p.iter().enumerate() {
                acc += pc;
                if r < acc {
                    k = c;
                    break;
                }
            }
            let c = &design.classes[k];
            let mean = c.beta[0] * x1 + c.beta[1] * t + u[0] + u[1] * t;
            let eps = Normal::new(0.0, c.tau.sqrt()).map_err(|e| JlcmError::Domain(e.to_string()))?;
            labels.push(k);
            responses.push(mean + eps.sample(&mut rng));
        }
        let uniform: f64 = loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        };
        let event_times = design
            .classes
            .iter()
            .map(|c| invert_survival_time(uniform, c.lambda0, c.omega * x3 + c.delta[0] * u[0], c.delta[1] * u[1]))
            .collect::<Result<Vec<_>>>()?;
        let c_time = censor.sample(&mut rng);
        let admin = design.admin_censor.unwrap_or(f64::INFINITY);
        // Find the visit whose class generates a follow-up inside its own interval.
        let mut chosen = None;
        for j in 0..grid.len() {
            let t_k = event_times[labels[j]];
            let end = t_k.min(c_time).min(admin);
            let next = grid.get(j + 1).copied().unwrap_or(f64::INFINITY);
            if grid[j] <= end && end < next {
                chosen = Some((j, end, t_k <= c_time && t_k < admin));
                break;
            }
        }
        let Some((last, followup, event)) = chosen else { continue };
        if last + 1 < design.min_visits || !(followup > 0.0) {
            continue;
        }
        let visits = (0..=last)
            .map(|j| LongitudinalRecord {
                visit_time: grid[j],
                response: responses[j],
                x1: vec![x1, grid[j]],
                x2: vec![x1, grid[j]],
                z: vec![1.0, grid[j]],
            })
            .collect();
        labels.truncate(last + 1);
        return Ok(SubjectDraw {
            subject: Subject {
                id: format!("{}", i + 1),
                visits,
                survival: SurvivalRecord { followup_time: followup, event, x3: vec![x3] },
            },
            u: u.to_vec(),
            labels,
        });
    }
    Err(JlcmError::Design(format!(
        "subject {} could not meet min_visits after {MAX_ATTEMPTS} attempts",
        i + 1
    )))
}

/// Draws a dataset plus the generating parameters, random effects and labels.
///
/// Each subject gets its own random stream keyed by the seed and its index,
/// so results do not depend on thread count.
pub fn simulate_dataset(design: &SimDesign) -> Result<Simulated> {
    design.validate()?;
    let draws: Vec<SubjectDraw> =
        (0..design.n_subjects).into_par_iter().map(|i| draw_subject(design, i)).collect::<Result<_>>()?;
    let mut subjects = Vec::with_capacity(draws.len());
    let mut u = Vec::with_capacity(draws.len());
    let mut labels = Vec::with_capacity(draws.len());
    for d in draws {
        subjects.push(d.subject);
        u.push(d.u);
        labels.push(d.labels);
    }
    let data = Dataset::new(subjects)?;
    let spec = design.model_spec();
    let truth = ParamState {
        xi: design.classes.iter().map(|c| c.xi.clone()).collect(),
        beta: design.classes.iter().map(|c| c.beta.clone()).collect(),
        omega: design.classes.iter().map(|c| vec![c.omega]).collect(),
        delta: design.classes.iter().map(|c| c.delta.to_vec()).collect(),
        tau: design.classes.iter().map(|c| c.tau).collect(),
        lambda0: design.classes.iter().map(|c| vec![c.lambda0]).collect(),
        sigma_u: DMatrix::identity(2, 2),
        u,
        labels,
    };
    Ok(Simulated { data, truth, spec })
}
