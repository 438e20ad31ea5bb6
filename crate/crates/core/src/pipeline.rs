//! End-to-end helpers shared by the CLI and the C ABI.

use rayon::prelude::*;

use crate::error::Result;
use crate::inference::classify::{hard_assignments, matched_error_rate, posterior_membership};
use crate::inference::dic::dic;
use crate::io::config::{membership_name, RunConfig};
use crate::io::outputs::SelectionRow;
use crate::mcmc::{run_chain, Chain};
use crate::model::types::{Dataset, MembershipMode};

/// Fits the model described by `cfg` to `data`.
pub fn fit_dataset(data: &Dataset, cfg: &RunConfig) -> Result<Chain> {
    cfg.validate()?;
    let spec = cfg.model_spec(data)?;
    let priors = cfg.priors(&spec);
    run_chain(data, &spec, &priors, &cfg.mcmc)
}

/// Fits every `(K, membership)` combination concurrently and tabulates DIC
/// (and the matched error rate when true labels are known).
pub fn select_models(
    data: &Dataset,
    cfg: &RunConfig,
    ks: &[usize],
    modes: &[MembershipMode],
    truth: Option<&[Vec<usize>]>,
) -> Result<Vec<SelectionRow>> {
    let jobs: Vec<(usize, MembershipMode)> =
        modes.iter().flat_map(|&m| ks.iter().map(move |&k| (k, m))).collect();
    jobs.par_iter()
        .map(|&(k, m)| {
            let mut c = cfg.clone();
            c.n_classes = k;
            c.membership = m;
            let chain = fit_dataset(data, &c)?;
            let report = dic(data, &chain, c.dic)?;
            let error_rate = match truth {
                Some(t) => {
                    let assigned = hard_assignments(&posterior_membership(data, &chain)?);
                    let true_k = t.iter().flatten().max().map_or(1, |m| m + 1);
                    Some(matched_error_rate(&assigned, t, k, true_k)?)
                }
                None => None,
            };
            Ok(SelectionRow { n_classes: k, membership: membership_name(m).to_string(), dic: report, error_rate })
        })
        .collect()
}
