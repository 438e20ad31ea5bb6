//! Deviance information criterion.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{JlcmError, Result};
use crate::inference::integrated::{ObservedLikelihood, HERMITE_NODES};
use crate::inference::summary::posterior_mean_state;
use crate::mcmc::Chain;
use crate::model::likelihood::{data_log_likelihood, joint_log_likelihood, marginal_log_likelihood};
use crate::model::types::{Dataset, ModelSpec, ParamState};

/// Which deviance the criterion is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DicVariant {
    /// `-2 log f(Y, T | R, U, Psi)`: only the observed outcomes, with labels
    /// and random effects as parameters.
    #[default]
    Conditional,
    /// `-2 log f(Y, T, R, U | Psi)`: adds the membership and random-effect factors.
    Complete,
    /// Labels summed out visit by visit; random effects kept.
    Marginal,
    /// Labels summed out and random effects integrated against `N(0, Sigma_u)`.
    /// See [`crate::inference::integrated`].
    Observed,
}

impl DicVariant {
    pub const ALL: [DicVariant; 4] = [Self::Conditional, Self::Complete, Self::Marginal, Self::Observed];

    pub fn deviance_formula(self) -> &'static str {
        match self {
            Self::Conditional => "D=-2*log f(Y,T|R,U,Psi)",
            Self::Complete => "D=-2*log f(Y,T,R,U|Psi)",
            Self::Marginal => "D=-2*log f(Y,T,U|Psi) with labels summed",
            Self::Observed => "D=-2*log f(Y,T|Psi) with labels summed and U integrated (Gauss-Hermite mixture)",
        }
    }
}

impl fmt::Display for DicVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Conditional => "conditional",
            Self::Complete => "complete",
            Self::Marginal => "marginal",
            Self::Observed => "observed",
        })
    }
}

impl FromStr for DicVariant {
    type Err = JlcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(Self::Conditional),
            "complete" => Ok(Self::Complete),
            "marginal" => Ok(Self::Marginal),
            "observed" => Ok(Self::Observed),
            other => Err(JlcmError::Config(format!("unknown DIC variant `{other}`"))),
        }
    }
}

/// Effective-parameter penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DicPenalty {
    /// `pD = var(D) / 2`.
    #[default]
    HalfVariance,
    /// `pD = mean(D) - D(posterior means)`, labels at their per-visit mode.
    PlugIn,
}

impl DicPenalty {
    pub fn formula(self) -> &'static str {
        match self {
            Self::HalfVariance => "pD=var(D)/2",
            Self::PlugIn => "pD=mean(D)-D(posterior means, modal labels)",
        }
    }
}

impl fmt::Display for DicPenalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::HalfVariance => "half_variance",
            Self::PlugIn => "plug_in",
        })
    }
}

impl FromStr for DicPenalty {
    type Err = JlcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half_variance" => Ok(Self::HalfVariance),
            "plug_in" => Ok(Self::PlugIn),
            other => Err(JlcmError::Config(format!("unknown DIC penalty `{other}`"))),
        }
    }
}

/// Deviance and penalty together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DicMethod {
    pub variant: DicVariant,
    pub penalty: DicPenalty,
}

impl DicMethod {
    pub fn new(variant: DicVariant, penalty: DicPenalty) -> Self {
        Self { variant, penalty }
    }

    pub fn formula(self) -> String {
        format!("{}; DIC=mean(D)+pD; {}", self.variant.deviance_formula(), self.penalty.formula())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicReport {
    pub method: DicMethod,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    pub deviance_var: f64,
    pub p_d: f64,
    pub dic: f64,
}

/// Upper bound on the draws the observed-data deviance is averaged over;
/// longer chains are thinned evenly.
pub const OBSERVED_MAX_DRAWS: usize = 300;

fn deviance(
    data: &Dataset,
    st: &ParamState,
    spec: &ModelSpec,
    variant: DicVariant,
    observed: Option<&ObservedLikelihood>,
) -> Result<f64> {
    let ll = match (variant, observed) {
        (DicVariant::Conditional, _) => data_log_likelihood(data, st, spec)?,
        (DicVariant::Complete, _) => joint_log_likelihood(data, st, spec)?,
        (DicVariant::Marginal, _) => marginal_log_likelihood(data, st, spec)?,
        (DicVariant::Observed, Some(g)) => g.log_likelihood(data, st, spec)?,
        (DicVariant::Observed, None) => unreachable!("observed deviance needs its quadrature rule"),
    };
    Ok(-2.0 * ll)
}

pub fn dic(data: &Dataset, chain: &Chain, method: DicMethod) -> Result<DicReport> {
    let draws = chain.post_burn_in();
    if draws.is_empty() {
        return Err(JlcmError::State("chain has no post-burn-in draws".into()));
    }
    let spec = &chain.spec;
    spec.check_dataset(data)?;
    let variant = method.variant;
    let mean_state = posterior_mean_state(chain)?;
    let (observed, stride) = match variant {
        DicVariant::Observed => (
            Some(ObservedLikelihood::new(data, draws, &mean_state, spec, HERMITE_NODES)?),
            draws.len().div_ceil(OBSERVED_MAX_DRAWS),
        ),
        _ => (None, 1),
    };
    let devs: Vec<f64> = draws
        .par_iter()
        .step_by(stride)
        .map(|d| deviance(data, d, spec, variant, observed.as_ref()))
        .collect::<Result<_>>()?;
    let n = devs.len() as f64;
    let mean_deviance = devs.iter().sum::<f64>() / n;
    let deviance_var = if devs.len() > 1 {
        devs.iter().map(|d| (d - mean_deviance).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let deviance_at_mean = deviance(data, &mean_state, spec, variant, observed.as_ref())?;
    let p_d = match method.penalty {
        DicPenalty::HalfVariance => 0.5 * deviance_var,
        DicPenalty::PlugIn => mean_deviance - deviance_at_mean,
    };
    Ok(DicReport { method, mean_deviance, deviance_at_mean, deviance_var, p_d, dic: mean_deviance + p_d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{run_chain, McmcConfig};
    use crate::model::types::{MembershipMode, Priors};
    use crate::simulation::{simulate_dataset, SimDesign};

    fn small_fit(k: usize, mode: MembershipMode) -> (Dataset, Chain) {
        let design = SimDesign { n_subjects: 8, ..SimDesign::with_seed(3) };
        let sim = simulate_dataset(&design).unwrap();
        let mut spec = ModelSpec::for_dataset(&sim.data, k, 1).unwrap();
        spec.membership = mode;
        let cfg = McmcConfig { iterations: 400, burn_in: 200, seed: 5, ..Default::default() };
        let chain = run_chain(&sim.data, &spec, &Priors::defaults(&spec), &cfg).unwrap();
        (sim.data, chain)
    }

    #[test]
    fn names_round_trip() {
        for v in DicVariant::ALL {
            assert_eq!(v.to_string().parse::<DicVariant>().unwrap(), v);
            assert!(v.deviance_formula().starts_with("D=-2*log f("));
        }
        for p in [DicPenalty::HalfVariance, DicPenalty::PlugIn] {
            assert_eq!(p.to_string().parse::<DicPenalty>().unwrap(), p);
        }
        assert!("bayes".parse::<DicVariant>().is_err());
        assert!("bayes".parse::<DicPenalty>().is_err());
        assert_eq!(DicMethod::default().formula(), "D=-2*log f(Y,T|R,U,Psi); DIC=mean(D)+pD; pD=var(D)/2");
    }

    #[test]
    fn report_identities() {
        let (data, chain) = small_fit(2, MembershipMode::TimeVarying);
        for v in DicVariant::ALL {
            let plug = dic(&data, &chain, DicMethod::new(v, DicPenalty::PlugIn)).unwrap();
            assert_eq!(plug.method.variant, v);
            assert_eq!(plug.p_d, plug.mean_deviance - plug.deviance_at_mean);
            assert_eq!(plug.dic, plug.mean_deviance + plug.p_d);
            let half = dic(&data, &chain, DicMethod::new(v, DicPenalty::HalfVariance)).unwrap();
            assert_eq!(half.p_d, 0.5 * half.deviance_var);
            assert_eq!(half.mean_deviance, plug.mean_deviance);
        }
    }

    #[test]
    fn one_class_complete_equals_marginal() {
        let (data, chain) = small_fit(1, MembershipMode::TimeVarying);
        let c = dic(&data, &chain, DicMethod::new(DicVariant::Complete, DicPenalty::PlugIn)).unwrap();
        let m = dic(&data, &chain, DicMethod::new(DicVariant::Marginal, DicPenalty::PlugIn)).unwrap();
        assert!((c.dic - m.dic).abs() < 1e-8 * c.dic.abs());
    }

    #[test]
    fn moments_by_hand() {
        let (data, chain) = small_fit(2, MembershipMode::TimeVarying);
        let devs: Vec<f64> = chain
            .post_burn_in()
            .iter()
            .map(|d| -2.0 * data_log_likelihood(&data, d, &chain.spec).unwrap())
            .collect();
        let n = devs.len() as f64;
        let mean = devs.iter().sum::<f64>() / n;
        let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let r = dic(&data, &chain, DicMethod::default()).unwrap();
        assert!((r.mean_deviance - mean).abs() < 1e-9 * mean.abs());
        assert!((r.deviance_var - var).abs() < 1e-9 * var);
        assert!((r.dic - (mean + var / 2.0)).abs() < 1e-9 * mean.abs());
    }

    #[test]
    fn conditional_excludes_latent_factors() {
        // the complete deviance adds -2 log pi and -2 log N(U; 0, Sigma_u)
        let (data, chain) = small_fit(2, MembershipMode::TimeVarying);
        let st = &chain.draws[chain.draws.len() - 1];
        let re = crate::linalg::MvnDensity::new(&st.sigma_u).unwrap();
        let mut latent = 0.0;
        for (i, s) in data.subjects().iter().enumerate() {
            let t = crate::model::likelihood::subject_terms(s, i, &st.u[i], st, &chain.spec, &re).unwrap();
            latent += t.membership + t.random_effect;
        }
        let c = data_log_likelihood(&data, st, &chain.spec).unwrap();
        let full = joint_log_likelihood(&data, st, &chain.spec).unwrap();
        assert!((full - c - latent).abs() < 1e-9 * full.abs());
    }
}
