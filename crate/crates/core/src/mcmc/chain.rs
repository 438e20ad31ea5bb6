//! Chain orchestration. One sweep updates labels, beta and Sigma_u by Gibbs
//! steps (tau and lambda too when configured), then runs adaptive Metropolis
//! on the membership block (free xi), the survival block (omega, delta and
//! lambda), the tau block, and one block per subject for `U_i`.
//!
//! Each AM block targets the joint posterior; likelihood factors that do not
//! involve the block cancel in the acceptance ratio and are not evaluated.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{JlcmError, Result};
use crate::linalg::MvnDensity;
use crate::mcmc::am::{am_step, AmState, DEFAULT_ALPHA_PROP, DEFAULT_RIDGE, DEFAULT_SIGMA2};
use crate::mcmc::conditionals::{sample_beta, sample_lambda_step, sample_sigma_u, sample_tau};
use crate::mcmc::init::initial_state;
use crate::mcmc::labels::sample_labels;
use crate::mcmc::relabel::{default_relabel_coef, relabel_draw};
use crate::model::likelihood::{subject_terms, survival_logdensity};
use crate::model::longitudinal::longitudinal_logdensity;
use crate::model::membership::log_membership_probs;
use crate::model::types::{Dataset, MembershipMode, ModelSpec, ParamState, Priors};

const TRACE_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Update tau and lambda from their conjugate conditionals instead of the AM block.
    pub gibbs_tau_lambda: bool,
    pub am_sigma2: f64,
    pub am_alpha_prop: f64,
    pub am_ridge: f64,
    /// Relabel draws after sampling; `None` disables relabelling.
    pub relabel_coef: Option<usize>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 2000,
            seed: 1,
            gibbs_tau_lambda: false,
            am_sigma2: DEFAULT_SIGMA2,
            am_alpha_prop: DEFAULT_ALPHA_PROP,
            am_ridge: DEFAULT_RIDGE,
            relabel_coef: Some(1),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(JlcmError::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.am_alpha_prop > 0.0 && self.am_alpha_prop <= 1.0) {
            return Err(JlcmError::Config("am_alpha_prop must lie in (0, 1]".into()));
        }
        if !(self.am_sigma2 > 0.0) {
            return Err(JlcmError::Config("am_sigma2 must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockTally {
    pub accepted: u64,
    pub proposed: u64,
}

impl BlockTally {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn add(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }
}

pub const BLOCK_MEMBERSHIP: &str = "membership";
pub const BLOCK_SURVIVAL: &str = "survival";
pub const BLOCK_TAU: &str = "tau";
pub const BLOCK_RANDOM_EFFECTS: &str = "random_effects";

/// Acceptance tallies of one AM block (all subjects pooled for `U`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCounts {
    pub name: String,
    pub all: BlockTally,
    pub post_burn_in: BlockTally,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AcceptanceCounts {
    pub blocks: Vec<BlockCounts>,
}

impl AcceptanceCounts {
    pub fn get(&self, name: &str) -> Option<&BlockCounts> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Post-burn-in acceptance rate of a block, 0 when absent.
    pub fn rate(&self, name: &str) -> f64 {
        self.get(name).map_or(0.0, |b| b.post_burn_in.rate())
    }

    fn add(&mut self, idx: usize, accepted: bool, post: bool) {
        let b = &mut self.blocks[idx];
        b.all.add(accepted);
        if post {
            b.post_burn_in.add(accepted);
        }
    }
}

/// Running acceptance rate and proposal-covariance trace of every block,
/// in the order of [`AcceptanceCounts::blocks`]. The random-effects entry
/// averages the trace over subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct AmSnapshot {
    pub iteration: usize,
    pub accept_rates: Vec<f64>,
    pub cov_traces: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub draws: Vec<ParamState>,
    pub burn_in: usize,
    pub seed: u64,
    pub acceptance: AcceptanceCounts,
    pub am_trace: Vec<AmSnapshot>,
    /// Final AM states of the parameter blocks (not persisted to disk).
    pub am_states: Vec<(String, AmState)>,
    pub spec: ModelSpec,
    pub priors: Priors,
    pub config: McmcConfig,
}

impl Chain {
    pub fn post_burn_in(&self) -> &[ParamState] {
        &self.draws[self.burn_in.min(self.draws.len())..]
    }

    pub fn relabel_coef(&self) -> Option<usize> {
        self.config.relabel_coef
    }
}

/// Parameter blocks updated by adaptive Metropolis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Free `xi` rows.
    Membership,
    /// `omega`, `delta`, and `lambda` unless it is Gibbs-updated.
    Survival { with_lambda: bool },
    Tau,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Membership => BLOCK_MEMBERSHIP,
            Block::Survival { .. } => BLOCK_SURVIVAL,
            Block::Tau => BLOCK_TAU,
        }
    }

    pub fn dim(self, spec: &ModelSpec) -> usize {
        match self {
            Block::Membership => spec.n_free_xi() * spec.dim_x1,
            Block::Survival { with_lambda } => {
                let base = spec.n_classes * (spec.dim_x3 + spec.q());
                let lam: usize = spec.baseline.iter().map(|g| g.n_steps()).sum();
                base + if with_lambda { lam } else { 0 }
            }
            Block::Tau => spec.n_classes,
        }
    }

    pub fn pack(self, st: &ParamState, spec: &ModelSpec) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim(spec));
        match self {
            Block::Membership => st.xi[..spec.n_free_xi()].iter().for_each(|r| v.extend_from_slice(r)),
            Block::Survival { with_lambda } => {
                st.omega.iter().for_each(|r| v.extend_from_slice(r));
                st.delta.iter().for_each(|r| v.extend_from_slice(r));
                if with_lambda {
                    st.lambda0.iter().for_each(|r| v.extend_from_slice(r));
                }
            }
            Block::Tau => v.extend_from_slice(&st.tau),
        }
        v
    }

    pub fn unpack(self, v: &[f64], st: &mut ParamState, spec: &ModelSpec) {
        let mut it = v.iter().copied();
        let mut fill = |rows: &mut [Vec<f64>]| {
            for x in rows.iter_mut().flat_map(|r| r.iter_mut()) {
                *x = it.next().expect("vector matches block layout");
            }
        };
        match self {
            Block::Membership => fill(&mut st.xi[..spec.n_free_xi()]),
            Block::Survival { with_lambda } => {
                fill(&mut st.omega);
                fill(&mut st.delta);
                if with_lambda {
                    fill(&mut st.lambda0);
                }
            }
            Block::Tau => {
                for x in st.tau.iter_mut() {
                    *x = it.next().expect("vector matches block layout");
                }
            }
        }
    }

    /// Log prior of the block's parameters; `-inf` outside the support.
    pub fn log_prior(self, st: &ParamState, spec: &ModelSpec, priors: &Priors) -> f64 {
        let inv_var = 1.0 / (priors.normal_sd * priors.normal_sd);
        let sq = |rows: &[Vec<f64>]| rows.iter().flatten().map(|x| x * x).sum::<f64>();
        match self {
            Block::Membership => -0.5 * inv_var * sq(&st.xi[..spec.n_free_xi()]),
            Block::Survival { with_lambda } => {
                let mut lp = -0.5 * inv_var * (sq(&st.omega) + sq(&st.delta));
                if with_lambda {
                    for &x in st.lambda0.iter().flatten() {
                        if !(x > 0.0) {
                            return f64::NEG_INFINITY;
                        }
                        lp += (priors.lambda_shape - 1.0) * x.ln() - priors.lambda_rate * x;
                    }
                }
                lp
            }
            Block::Tau => {
                let mut lp = 0.0;
                for &t in &st.tau {
                    if !(t > 0.0) {
                        return f64::NEG_INFINITY;
                    }
                    lp += -(priors.tau_shape + 1.0) * t.ln() - priors.tau_rate / t;
                }
                lp
            }
        }
    }

    /// Likelihood factors that involve the block.
    pub fn log_likelihood(self, data: &Dataset, st: &ParamState, spec: &ModelSpec) -> Result<f64> {
        let mut total = 0.0;
        for (i, s) in data.subjects().iter().enumerate() {
            let labels = &st.labels[i];
            match self {
                Block::Membership => {
                    let visits = match spec.membership {
                        MembershipMode::TimeVarying => s.n_visits(),
                        MembershipMode::Static => 1,
                    };
                    for (v, &k) in s.visits.iter().zip(labels).take(visits) {
                        total += log_membership_probs(&v.x1, &st.xi)?[k];
                    }
                }
                Block::Survival { .. } => {
                    let k = *labels.last().expect("subject has visits");
                    total += survival_logdensity(&s.survival, k, st, spec, &st.u[i])?;
                }
                Block::Tau => {
                    for (v, &k) in s.visits.iter().zip(labels) {
                        total += longitudinal_logdensity(v, &st.beta[k], &st.u[i], st.tau[k])?;
                    }
                }
            }
        }
        Ok(total)
    }

    /// Block log-target: prior plus the likelihood factors that involve it.
    pub fn log_target(self, data: &Dataset, st: &ParamState, spec: &ModelSpec, priors: &Priors) -> f64 {
        let prior = self.log_prior(st, spec, priors);
        if !prior.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.log_likelihood(data, st, spec) {
            Ok(ll) if ll.is_finite() => ll + prior,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// AM blocks used for a given spec and configuration, in update order.
pub fn parameter_blocks(spec: &ModelSpec, config: &McmcConfig) -> Vec<Block> {
    let mut out = Vec::new();
    if Block::Membership.dim(spec) > 0 {
        out.push(Block::Membership);
    }
    out.push(Block::Survival { with_lambda: !config.gibbs_tau_lambda });
    if !config.gibbs_tau_lambda {
        out.push(Block::Tau);
    }
    out
}

pub fn run_chain(data: &Dataset, spec: &ModelSpec, priors: &Priors, config: &McmcConfig) -> Result<Chain> {
    let init = initial_state(data, spec);
    run_chain_from(data, spec, priors, config, init)
}

pub fn run_chain_from(
    data: &Dataset,
    spec: &ModelSpec,
    priors: &Priors,
    config: &McmcConfig,
    init: ParamState,
) -> Result<Chain> {
    config.validate()?;
    spec.check_dataset(data)?;
    priors.validate(spec)?;
    init.check(spec, data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = init;
    let new_am = |d: usize| AmState::new(d, config.am_sigma2, config.am_alpha_prop, config.am_ridge);
    let blocks = parameter_blocks(spec, config);
    let mut am_blocks: Vec<AmState> = blocks.iter().map(|b| new_am(b.dim(spec))).collect();
    let q = spec.q();
    let mut am_u: Vec<AmState> = (0..data.n_subjects()).map(|_| new_am(q)).collect();

    let mut acceptance = AcceptanceCounts {
        blocks: blocks
            .iter()
            .map(|b| b.name())
            .chain([BLOCK_RANDOM_EFFECTS])
            .map(|name| BlockCounts { name: name.to_string(), all: BlockTally::default(), post_burn_in: BlockTally::default() })
            .collect(),
    };
    let re_idx = blocks.len();
    let mut draws = Vec::with_capacity(config.iterations);
    let mut am_trace = Vec::new();

    for iter in 0..config.iterations {
        let post = iter >= config.burn_in;

        state.labels = sample_labels(data, &state, spec, &mut rng)?;
        for k in 0..spec.n_classes {
            state.beta[k] = sample_beta(k, data, &state, priors, &mut rng)?;
        }
        state.sigma_u = sample_sigma_u(&state, priors, &mut rng)?;
        if config.gibbs_tau_lambda {
            for k in 0..spec.n_classes {
                state.tau[k] = sample_tau(k, data, &state, priors, &mut rng)?;
                for s in 0..spec.baseline[k].n_steps() {
                    state.lambda0[k][s] = sample_lambda_step(k, s, data, &state, spec, priors, &mut rng)?;
                }
            }
        }

        for (b, (block, am)) in blocks.iter().zip(am_blocks.iter_mut()).enumerate() {
            let mut current = block.pack(&state, spec);
            let mut lp = block.log_target(data, &state, spec, priors);
            if !lp.is_finite() {
                return Err(JlcmError::Divergence {
                    iteration: iter,
                    reason: format!("non-finite log-target for the {} block", block.name()),
                });
            }
            let mut scratch = state.clone();
            let accepted = am_step(
                am,
                &mut current,
                &mut lp,
                |v| {
                    block.unpack(v, &mut scratch, spec);
                    block.log_target(data, &scratch, spec, priors)
                },
                &mut rng,
            );
            block.unpack(&current, &mut state, spec);
            acceptance.add(b, accepted, post);
        }

        let re = MvnDensity::new(&state.sigma_u)?;
        for (i, subj) in data.subjects().iter().enumerate() {
            let mut current = state.u[i].clone();
            let mut lp = subject_terms(subj, i, &current, &state, spec, &re)?.total();
            if !lp.is_finite() {
                return Err(JlcmError::Divergence {
                    iteration: iter,
                    reason: format!("non-finite log-target for random effects of subject `{}`", subj.id),
                });
            }
            let accepted = am_step(
                &mut am_u[i],
                &mut current,
                &mut lp,
                |u| subject_terms(subj, i, u, &state, spec, &re).map_or(f64::NEG_INFINITY, |t| t.total()),
                &mut rng,
            );
            state.u[i] = current;
            acceptance.add(re_idx, accepted, post);
        }

        if (iter + 1) % TRACE_EVERY == 0 || iter + 1 == config.iterations {
            let trace = |am: &AmState| am.empirical_cov().map_or(0.0, |c| c.trace());
            let mut cov_traces: Vec<f64> = am_blocks.iter().map(trace).collect();
            cov_traces.push(if am_u.is_empty() { 0.0 } else { am_u.iter().map(trace).sum::<f64>() / am_u.len() as f64 });
            let snap = AmSnapshot {
                iteration: iter + 1,
                accept_rates: acceptance.blocks.iter().map(|b| b.all.rate()).collect(),
                cov_traces,
            };
            debug!("iter {}: acceptance {:?}", snap.iteration, snap.accept_rates);
            am_trace.push(snap);
        }
        draws.push(state.clone());
    }

    if let Some(coef) = config.relabel_coef {
        let coef = if coef < spec.dim_x2 { coef } else { default_relabel_coef(spec) };
        for d in draws.iter_mut() {
            relabel_draw(d, spec, coef);
        }
    }

    Ok(Chain {
        draws,
        burn_in: config.burn_in,
        seed: config.seed,
        acceptance,
        am_trace,
        am_states: blocks.iter().map(|b| b.name().to_string()).zip(am_blocks).collect(),
        spec: spec.clone(),
        priors: priors.clone(),
        config: config.clone(),
    })
}
