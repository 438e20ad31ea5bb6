//! Run configuration in a flat `key = value` grammar.
//!
//! ```text
//! # comment
//! k = 2
//! membership = time_varying      # or static
//! schema.x1 = X1, time
//! ```
//!
//! Keys are unique; unknown keys are rejected. See [`RunConfig::KEYS`].

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{JlcmError, Result};
use crate::inference::dic::{DicMethod, DicPenalty, DicVariant};
use crate::io::dataset::{format_terms, parse_terms, Schema};
use crate::mcmc::McmcConfig;
use crate::model::types::{Dataset, MembershipMode, ModelSpec, Priors};

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSettings {
    pub normal_sd: f64,
    pub tau_shape: f64,
    pub tau_rate: f64,
    pub lambda_shape: f64,
    pub lambda_rate: f64,
    /// Diagonal of the beta prior covariance.
    pub beta_var: f64,
    /// Inverse-Wishart degrees of freedom; `None` means `q + 2`.
    pub sigma_df: Option<f64>,
}

impl Default for PriorSettings {
    fn default() -> Self {
        Self {
            normal_sd: 1.0,
            tau_shape: 0.01,
            tau_rate: 0.01,
            lambda_shape: 0.01,
            lambda_rate: 0.01,
            beta_var: 100.0,
            sigma_df: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_classes: usize,
    /// Baseline hazard steps per class (cuts at event-time quantiles).
    pub baseline_steps: usize,
    pub membership: MembershipMode,
    pub reference_class: bool,
    pub mcmc: McmcConfig,
    pub priors: PriorSettings,
    pub dic: DicMethod,
    pub predict_t: f64,
    pub predict_dt: f64,
    pub schema: Schema,
    pub data: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_classes: 2,
            baseline_steps: 1,
            membership: MembershipMode::TimeVarying,
            reference_class: true,
            mcmc: McmcConfig::default(),
            priors: PriorSettings::default(),
            dic: DicMethod::default(),
            predict_t: 0.5,
            predict_dt: 0.3,
            schema: Schema::simulation(),
            data: None,
            output: None,
        }
    }
}

pub fn parse_membership(s: &str) -> Result<MembershipMode> {
    match s {
        "time_varying" => Ok(MembershipMode::TimeVarying),
        "static" => Ok(MembershipMode::Static),
        other => Err(JlcmError::Config(format!("membership must be time_varying or static, got `{other}`"))),
    }
}

pub fn membership_name(m: MembershipMode) -> &'static str {
    match m {
        MembershipMode::TimeVarying => "time_varying",
        MembershipMode::Static => "static",
    }
}

fn num<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| JlcmError::Parse { line, message: format!("`{key}`: cannot parse `{v}`") })
}

fn boolean(key: &str, v: &str, line: usize) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(JlcmError::Parse { line, message: format!("`{key}`: expected true or false, got `{v}`") }),
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 34] = [
        "k",
        "baseline_steps",
        "membership",
        "reference_class",
        "iterations",
        "burn_in",
        "seed",
        "gibbs_tau_lambda",
        "am_sigma2",
        "am_alpha",
        "am_ridge",
        "relabel_coef",
        "prior.normal_sd",
        "prior.tau_shape",
        "prior.tau_rate",
        "prior.lambda_shape",
        "prior.lambda_rate",
        "prior.beta_var",
        "prior.sigma_df",
        "dic_variant",
        "dic_penalty",
        "predict_t",
        "predict_dt",
        "schema.subject",
        "schema.response",
        "schema.visit_time",
        "schema.followup",
        "schema.event",
        "schema.x1",
        "schema.x2",
        "schema.x3",
        "schema.q",
        "data",
        "output",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| JlcmError::Parse { line, message: format!("expected `key = value`, got `{body}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(JlcmError::Parse { line, message: format!("duplicate key `{key}`") });
            }
            cfg.set(key, value, line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one `key = value` pair; `line` is only used in error messages.
    pub fn set(&mut self, key: &str, v: &str, line: usize) -> Result<()> {
        match key {
            "k" => self.n_classes = num(key, v, line)?,
            "baseline_steps" => self.baseline_steps = num(key, v, line)?,
            "membership" => self.membership = parse_membership(v)?,
            "reference_class" => self.reference_class = boolean(key, v, line)?,
            "iterations" => self.mcmc.iterations = num(key, v, line)?,
            "burn_in" => self.mcmc.burn_in = num(key, v, line)?,
            "seed" => self.mcmc.seed = num(key, v, line)?,
            "gibbs_tau_lambda" => self.mcmc.gibbs_tau_lambda = boolean(key, v, line)?,
            "am_sigma2" => self.mcmc.am_sigma2 = num(key, v, line)?,
            "am_alpha" => self.mcmc.am_alpha_prop = num(key, v, line)?,
            "am_ridge" => self.mcmc.am_ridge = num(key, v, line)?,
            "relabel_coef" => {
                self.mcmc.relabel_coef = if v == "none" {
                    None
                } else {
                    let c: usize = num(key, v, line)?;
                    if c == 0 {
                        return Err(JlcmError::Parse { line, message: "`relabel_coef` is one-based".into() });
                    }
                    Some(c - 1)
                }
            }
            "prior.normal_sd" => self.priors.normal_sd = num(key, v, line)?,
            "prior.tau_shape" => self.priors.tau_shape = num(key, v, line)?,
            "prior.tau_rate" => self.priors.tau_rate = num(key, v, line)?,
            "prior.lambda_shape" => self.priors.lambda_shape = num(key, v, line)?,
            "prior.lambda_rate" => self.priors.lambda_rate = num(key, v, line)?,
            "prior.beta_var" => self.priors.beta_var = num(key, v, line)?,
            "prior.sigma_df" => self.priors.sigma_df = Some(num(key, v, line)?),
            "dic_variant" => self.dic.variant = v.parse::<DicVariant>()?,
            "dic_penalty" => self.dic.penalty = v.parse::<DicPenalty>()?,
            "predict_t" => self.predict_t = num(key, v, line)?,
            "predict_dt" => self.predict_dt = num(key, v, line)?,
            "schema.subject" => self.schema.subject = v.to_string(),
            "schema.response" => self.schema.response = v.to_string(),
            "schema.visit_time" => self.schema.visit_time = v.to_string(),
            "schema.followup" => self.schema.followup = v.to_string(),
            "schema.event" => self.schema.event = v.to_string(),
            "schema.x1" => self.schema.x1 = parse_terms(v),
            "schema.x2" => self.schema.x2 = parse_terms(v),
            "schema.x3" => self.schema.x3 = parse_terms(v),
            "schema.q" => self.schema.q = num(key, v, line)?,
            "data" => self.data = Some(PathBuf::from(v)),
            "output" => self.output = Some(PathBuf::from(v)),
            other => return Err(JlcmError::Parse { line, message: format!("unknown key `{other}`") }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return Err(JlcmError::Config("k must be >= 1".into()));
        }
        if self.baseline_steps == 0 {
            return Err(JlcmError::Config("baseline_steps must be >= 1".into()));
        }
        if self.schema.q == 0 {
            return Err(JlcmError::Config("schema.q must be >= 1".into()));
        }
        if self.schema.x1.is_empty() || self.schema.x2.is_empty() {
            return Err(JlcmError::Config("schema.x1 and schema.x2 need at least one term".into()));
        }
        if !(self.predict_t >= 0.0) || !(self.predict_dt >= 0.0) {
            return Err(JlcmError::Config("predict_t and predict_dt must be >= 0".into()));
        }
        self.mcmc.validate()
    }

    pub fn model_spec(&self, data: &Dataset) -> Result<ModelSpec> {
        let mut spec = ModelSpec::for_dataset(data, self.n_classes, self.baseline_steps)?;
        spec.membership = self.membership;
        spec.reference_class = self.reference_class;
        Ok(spec)
    }

    pub fn priors(&self, spec: &ModelSpec) -> Priors {
        let mut p = Priors::defaults(spec);
        p.normal_sd = self.priors.normal_sd;
        p.tau_shape = self.priors.tau_shape;
        p.tau_rate = self.priors.tau_rate;
        p.lambda_shape = self.priors.lambda_shape;
        p.lambda_rate = self.priors.lambda_rate;
        p.beta_cov *= self.priors.beta_var / 100.0;
        if let Some(df) = self.priors.sigma_df {
            p.sigma_df = df;
        }
        p
    }

    /// Renders the config back into the grammar accepted by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let m = &self.mcmc;
        let p = &self.priors;
        let s = &self.schema;
        let mut out = vec![
            format!("k = {}", self.n_classes),
            format!("baseline_steps = {}", self.baseline_steps),
            format!("membership = {}", membership_name(self.membership)),
            format!("reference_class = {}", self.reference_class),
            format!("iterations = {}", m.iterations),
            format!("burn_in = {}", m.burn_in),
            format!("seed = {}", m.seed),
            format!("gibbs_tau_lambda = {}", m.gibbs_tau_lambda),
            format!("am_sigma2 = {}", m.am_sigma2),
            format!("am_alpha = {}", m.am_alpha_prop),
            format!("am_ridge = {}", m.am_ridge),
            format!("relabel_coef = {}", m.relabel_coef.map_or("none".to_string(), |c| (c + 1).to_string())),
            format!("prior.normal_sd = {}", p.normal_sd),
            format!("prior.tau_shape = {}", p.tau_shape),
            format!("prior.tau_rate = {}", p.tau_rate),
            format!("prior.lambda_shape = {}", p.lambda_shape),
            format!("prior.lambda_rate = {}", p.lambda_rate),
            format!("prior.beta_var = {}", p.beta_var),
        ];
        if let Some(df) = p.sigma_df {
            out.push(format!("prior.sigma_df = {df}"));
        }
        out.extend([
            format!("dic_variant = {}", self.dic.variant),
            format!("dic_penalty = {}", self.dic.penalty),
            format!("predict_t = {}", self.predict_t),
            format!("predict_dt = {}", self.predict_dt),
            format!("schema.subject = {}", s.subject),
            format!("schema.response = {}", s.response),
            format!("schema.visit_time = {}", s.visit_time),
            format!("schema.followup = {}", s.followup),
            format!("schema.event = {}", s.event),
            format!("schema.x1 = {}", format_terms(&s.x1)),
            format!("schema.x2 = {}", format_terms(&s.x2)),
            format!("schema.x3 = {}", format_terms(&s.x3)),
            format!("schema.q = {}", s.q),
        ]);
        if let Some(d) = &self.data {
            out.push(format!("data = {}", d.display()));
        }
        if let Some(o) = &self.output {
            out.push(format!("output = {}", o.display()));
        }
        out.join("\n") + "\n"
    }
}
