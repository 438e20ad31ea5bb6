//! Plain-text chain files.
//!
//! Layout: a version line, `key = value` header lines, a `---` separator,
//! then a comma-separated table with one header row and one row per draw.
//! Column order: `xi_k_l`, `beta_k_l`, `omega_k_l`, `delta_k_l`, `tau_k`,
//! `lambda_k_s`, `sigma_u_a_b` (full matrix, row-major), `u_i_l`, then
//! `r_i_j` (class labels, one-based). Reals use the shortest representation
//! that parses back to the same bits.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{JlcmError, Result};
use crate::inference::dic::{DicMethod, DicPenalty, DicVariant};
use crate::io::config::{membership_name, parse_membership};
use crate::mcmc::chain::{AcceptanceCounts, AmSnapshot, BlockCounts, BlockTally, Chain, McmcConfig};
use crate::model::types::{BaselineGrid, ModelSpec, ParamState, Priors, RandomEffectDesign};

pub const FORMAT_NAME: &str = "jlcm-chain";
pub const FORMAT_VERSION: &str = "1";

fn join_f64(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn split_f64(s: &str, line: usize) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|x| parse_f64(x, line)).collect()
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| JlcmError::Parse { line, message: format!("`{s}` is not a number") })
}

fn tally(t: &BlockTally) -> String {
    format!("{}/{}", t.accepted, t.proposed)
}

fn column_names(spec: &ModelSpec, visits: &[usize]) -> Vec<String> {
    let k = spec.n_classes;
    let mut out = Vec::new();
    let mut block = |name: &str, width: usize| {
        for c in 1..=k {
            for l in 1..=width {
                out.push(format!("{name}_{c}_{l}"));
            }
        }
    };
    block("xi", spec.dim_x1);
    block("beta", spec.dim_x2);
    block("omega", spec.dim_x3);
    block("delta", spec.q());
    out.extend((1..=k).map(|c| format!("tau_{c}")));
    for (c, g) in spec.baseline.iter().enumerate() {
        out.extend((1..=g.n_steps()).map(|s| format!("lambda_{}_{s}", c + 1)));
    }
    let q = spec.q();
    for a in 1..=q {
        for b in 1..=q {
            out.push(format!("sigma_u_{a}_{b}"));
        }
    }
    for i in 1..=visits.len() {
        out.extend((1..=q).map(|l| format!("u_{i}_{l}")));
    }
    for (i, &m) in visits.iter().enumerate() {
        out.extend((1..=m).map(|j| format!("r_{}_{j}", i + 1)));
    }
    out
}

fn draw_row(st: &ParamState) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for group in [&st.xi, &st.beta, &st.omega, &st.delta] {
        out.extend(group.iter().flatten().map(f64::to_string));
    }
    out.extend(st.tau.iter().map(f64::to_string));
    out.extend(st.lambda0.iter().flatten().map(f64::to_string));
    let q = st.sigma_u.nrows();
    for a in 0..q {
        for b in 0..q {
            out.push(st.sigma_u[(a, b)].to_string());
        }
    }
    out.extend(st.u.iter().flatten().map(f64::to_string));
    out.extend(st.labels.iter().flatten().map(|r| (r + 1).to_string()));
    out
}

fn parse_draw(fields: &[&str], spec: &ModelSpec, visits: &[usize], line: usize) -> Result<ParamState> {
    let mut it = fields.iter();
    let mut next = || -> Result<f64> {
        let s = it.next().ok_or_else(|| JlcmError::Parse { line, message: "row is short".into() })?;
        parse_f64(s, line)
    };
    let k = spec.n_classes;
    let block = |width: usize, next: &mut dyn FnMut() -> Result<f64>| -> Result<Vec<Vec<f64>>> {
        (0..k).map(|_| (0..width).map(|_| next()).collect()).collect()
    };
    let xi = block(spec.dim_x1, &mut next)?;
    let beta = block(spec.dim_x2, &mut next)?;
    let omega = block(spec.dim_x3, &mut next)?;
    let delta = block(spec.q(), &mut next)?;
    let tau = (0..k).map(|_| next()).collect::<Result<_>>()?;
    let lambda0 = spec.baseline.iter().map(|g| (0..g.n_steps()).map(|_| next()).collect()).collect::<Result<_>>()?;
    let q = spec.q();
    let mut sigma_u = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in 0..q {
            sigma_u[(a, b)] = next()?;
        }
    }
    let u = visits.iter().map(|_| (0..q).map(|_| next()).collect()).collect::<Result<_>>()?;
    let labels = visits
        .iter()
        .map(|&m| {
            (0..m)
                .map(|_| {
                    let r = next()?;
                    if r < 1.0 || r > k as f64 || r.fract() != 0.0 {
                        return Err(JlcmError::Parse { line, message: format!("label {r} out of range") });
                    }
                    Ok(r as usize - 1)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(ParamState { xi, beta, omega, delta, tau, lambda0, sigma_u, u, labels })
}

/// Writes `chain` with the DIC method recorded in the header.
pub fn write_chain<W: Write>(mut w: W, chain: &Chain, dic: DicMethod) -> Result<()> {
    let spec = &chain.spec;
    let visits: Vec<usize> = chain
        .draws
        .first()
        .map(|d| d.labels.iter().map(Vec::len).collect())
        .unwrap_or_default();
    let c = &chain.config;
    let p = &chain.priors;
    writeln!(w, "{FORMAT_NAME} {FORMAT_VERSION}")?;
    let mut kv = |k: &str, v: String| writeln!(w, "{k} = {v}");
    kv("seed", chain.seed.to_string())?;
    kv("burn_in", chain.burn_in.to_string())?;
    kv("draws", chain.draws.len().to_string())?;
    kv("visits", visits.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))?;
    kv("k", spec.n_classes.to_string())?;
    kv("dim_x1", spec.dim_x1.to_string())?;
    kv("dim_x2", spec.dim_x2.to_string())?;
    kv("dim_x3", spec.dim_x3.to_string())?;
    kv("q", spec.q().to_string())?;
    kv("membership", membership_name(spec.membership).to_string())?;
    kv("reference_class", spec.reference_class.to_string())?;
    for (i, g) in spec.baseline.iter().enumerate() {
        kv(&format!("baseline_{}", i + 1), join_f64(g.cuts()))?;
    }
    kv("iterations", c.iterations.to_string())?;
    kv("gibbs_tau_lambda", c.gibbs_tau_lambda.to_string())?;
    kv("am_sigma2", c.am_sigma2.to_string())?;
    kv("am_alpha", c.am_alpha_prop.to_string())?;
    kv("am_ridge", c.am_ridge.to_string())?;
    kv(
        "relabel_rule",
        match c.relabel_coef {
            Some(coef) => format!("ascending beta_k_{}", coef + 1),
            None => "none".into(),
        },
    )?;
    kv("dic_variant", dic.variant.to_string())?;
    kv("dic_penalty", dic.penalty.to_string())?;
    kv("dic_formula", dic.formula())?;
    kv("prior.beta_mean", join_f64(&p.beta_mean))?;
    kv("prior.beta_cov", join_f64(p.beta_cov.as_slice()))?;
    kv("prior.lambda", format!("{};{}", p.lambda_shape, p.lambda_rate))?;
    kv("prior.tau", format!("{};{}", p.tau_shape, p.tau_rate))?;
    kv("prior.sigma_df", p.sigma_df.to_string())?;
    kv("prior.sigma_scale", join_f64(p.sigma_scale.as_slice()))?;
    kv("prior.normal_sd", p.normal_sd.to_string())?;
    let blocks = &chain.acceptance.blocks;
    kv("blocks", blocks.iter().map(|b| b.name.as_str()).collect::<Vec<_>>().join(";"))?;
    for b in blocks {
        kv(&format!("accept.{}", b.name), format!("{};{}", tally(&b.all), tally(&b.post_burn_in)))?;
    }
    for s in &chain.am_trace {
        kv("am_trace", format!("{}|{}|{}", s.iteration, join_f64(&s.accept_rates), join_f64(&s.cov_traces)))?;
    }
    writeln!(w, "---")?;
    writeln!(w, "{}", column_names(spec, &visits).join(","))?;
    for d in &chain.draws {
        writeln!(w, "{}", draw_row(d).join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_chain(path: impl AsRef<Path>, chain: &Chain, dic: DicMethod) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_chain(std::io::BufWriter::new(f), chain, dic)
}

struct Header {
    values: HashMap<String, (String, usize)>,
    am_trace: Vec<(String, usize)>,
}

impl Header {
    fn raw(&self, key: &str) -> Result<(&str, usize)> {
        self.values
            .get(key)
            .map(|(v, l)| (v.as_str(), *l))
            .ok_or_else(|| JlcmError::Parse { line: 0, message: format!("header key `{key}` missing") })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (v, line) = self.raw(key)?;
        v.parse().map_err(|_| JlcmError::Parse { line, message: format!("`{key}`: cannot parse `{v}`") })
    }

    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        let (v, line) = self.raw(key)?;
        split_f64(v, line)
    }

    fn tallies(&self, key: &str) -> Result<(BlockTally, BlockTally)> {
        let (v, line) = self.raw(key)?;
        let bad = || JlcmError::Parse { line, message: format!("`{key}`: expected a/p;a/p") };
        let one = |s: &str| -> Result<BlockTally> {
            let (a, p) = s.split_once('/').ok_or_else(bad)?;
            Ok(BlockTally { accepted: a.parse().map_err(|_| bad())?, proposed: p.parse().map_err(|_| bad())? })
        };
        let (all, post) = v.split_once(';').ok_or_else(bad)?;
        Ok((one(all)?, one(post)?))
    }
}

fn square(v: Vec<f64>, key: &str) -> Result<DMatrix<f64>> {
    let n = (v.len() as f64).sqrt() as usize;
    if n * n != v.len() {
        return Err(JlcmError::Parse { line: 0, message: format!("`{key}` is not a square matrix") });
    }
    Ok(DMatrix::from_vec(n, n, v))
}

/// Reads a chain file; returns the chain and its recorded DIC method.
///
/// The adaptive-Metropolis state is not stored, so `am_states` comes back empty.
pub fn read_chain<R: Read>(reader: R) -> Result<(Chain, DicMethod)> {
    let mut lines = BufReader::new(reader).lines().enumerate().map(|(n, l)| (n + 1, l));
    let (_, first) = lines.next().ok_or(JlcmError::Parse { line: 1, message: "empty chain file".into() })?;
    let first = first?;
    let mut parts = first.split_whitespace();
    if parts.next() != Some(FORMAT_NAME) {
        return Err(JlcmError::Parse { line: 1, message: format!("not a chain file: `{first}`") });
    }
    let found = parts.next().unwrap_or("");
    if found != FORMAT_VERSION {
        return Err(JlcmError::Version { found: found.to_string(), expected: FORMAT_VERSION.to_string() });
    }
    let mut header = Header { values: HashMap::new(), am_trace: Vec::new() };
    let mut separator_seen = false;
    for (line, l) in lines.by_ref() {
        let l = l?;
        if l == "---" {
            separator_seen = true;
            break;
        }
        let (k, v) = l
            .split_once(" = ")
            .ok_or_else(|| JlcmError::Parse { line, message: format!("malformed header line `{l}`") })?;
        if k == "am_trace" {
            header.am_trace.push((v.to_string(), line));
        } else {
            header.values.insert(k.to_string(), (v.to_string(), line));
        }
    }
    if !separator_seen {
        return Err(JlcmError::Parse { line: 0, message: "truncated chain file: header never ends".into() });
    }
    let k: usize = header.get("k")?;
    let (visits_raw, vline) = header.raw("visits")?;
    let visits: Vec<usize> = if visits_raw.is_empty() {
        Vec::new()
    } else {
        visits_raw
            .split(';')
            .map(|s| s.parse().map_err(|_| JlcmError::Parse { line: vline, message: "bad visit count".into() }))
            .collect::<Result<_>>()?
    };
    let baseline = (1..=k)
        .map(|c| {
            let cuts = header.floats(&format!("baseline_{c}"))?;
            if cuts.is_empty() { Ok(BaselineGrid::constant()) } else { BaselineGrid::new(cuts) }
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = ModelSpec {
        n_classes: k,
        dim_x1: header.get("dim_x1")?,
        dim_x2: header.get("dim_x2")?,
        dim_x3: header.get("dim_x3")?,
        random_effects: RandomEffectDesign::new(header.get("q")?)?,
        baseline,
        membership: parse_membership(header.raw("membership")?.0)?,
        reference_class: header.get("reference_class")?,
    };
    let (rule, rline) = header.raw("relabel_rule")?;
    let relabel_coef = if rule == "none" {
        None
    } else {
        let c = rule
            .strip_prefix("ascending beta_k_")
            .and_then(|c| c.parse::<usize>().ok())
            .filter(|&c| c >= 1)
            .ok_or_else(|| JlcmError::Parse { line: rline, message: format!("unknown relabel rule `{rule}`") })?;
        Some(c - 1)
    };
    let config = McmcConfig {
        iterations: header.get("iterations")?,
        burn_in: header.get("burn_in")?,
        seed: header.get("seed")?,
        gibbs_tau_lambda: header.get("gibbs_tau_lambda")?,
        am_sigma2: header.get("am_sigma2")?,
        am_alpha_prop: header.get("am_alpha")?,
        am_ridge: header.get("am_ridge")?,
        relabel_coef,
    };
    let pair = |key: &str| -> Result<(f64, f64)> {
        let v = header.floats(key)?;
        match v.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(JlcmError::Parse { line: header.raw(key)?.1, message: format!("`{key}` needs two values") }),
        }
    };
    let (lambda_shape, lambda_rate) = pair("prior.lambda")?;
    let (tau_shape, tau_rate) = pair("prior.tau")?;
    let priors = Priors {
        beta_mean: header.floats("prior.beta_mean")?,
        beta_cov: square(header.floats("prior.beta_cov")?, "prior.beta_cov")?,
        lambda_shape,
        lambda_rate,
        tau_shape,
        tau_rate,
        sigma_df: header.get("prior.sigma_df")?,
        sigma_scale: square(header.floats("prior.sigma_scale")?, "prior.sigma_scale")?,
        normal_sd: header.get("prior.normal_sd")?,
    };
    let (names, _) = header.raw("blocks")?;
    let acceptance = AcceptanceCounts {
        blocks: names
            .split(';')
            .filter(|n| !n.is_empty())
            .map(|name| {
                let (all, post_burn_in) = header.tallies(&format!("accept.{name}"))?;
                Ok(BlockCounts { name: name.to_string(), all, post_burn_in })
            })
            .collect::<Result<_>>()?,
    };
    let am_trace = header
        .am_trace
        .iter()
        .map(|(v, line)| {
            let f: Vec<&str> = v.split('|').collect();
            if f.len() != 3 {
                return Err(JlcmError::Parse { line: *line, message: "am_trace needs three fields".into() });
            }
            Ok(AmSnapshot {
                iteration: f[0].parse().map_err(|_| JlcmError::Parse { line: *line, message: "bad iteration".into() })?,
                accept_rates: split_f64(f[1], *line)?,
                cov_traces: split_f64(f[2], *line)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let expected_cols = column_names(&spec, &visits);
    let (cline, cols) = lines
        .next()
        .ok_or(JlcmError::Parse { line: 0, message: "truncated chain file: column header missing".into() })?;
    let cols = cols?;
    if cols.split(',').ne(expected_cols.iter().map(String::as_str)) {
        return Err(JlcmError::Parse { line: cline, message: "column header does not match the header metadata".into() });
    }
    let n_draws: usize = header.get("draws")?;
    let mut draws = Vec::with_capacity(n_draws);
    for (line, l) in lines {
        let l = l?;
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != expected_cols.len() {
            return Err(JlcmError::Parse {
                line,
                message: format!("expected {} fields, found {}", expected_cols.len(), fields.len()),
            });
        }
        draws.push(parse_draw(&fields, &spec, &visits, line)?);
    }
    if draws.len() != n_draws {
        return Err(JlcmError::Parse {
            line: 0,
            message: format!("truncated chain file: header promises {n_draws} draws, found {}", draws.len()),
        });
    }
    let chain = Chain {
        draws,
        burn_in: header.get("burn_in")?,
        seed: header.get("seed")?,
        acceptance,
        am_trace,
        am_states: Vec::new(),
        spec,
        priors,
        config,
    };
    let dic = DicMethod::new(
        header.get::<String>("dic_variant")?.parse::<DicVariant>()?,
        header.get::<String>("dic_penalty")?.parse::<DicPenalty>()?,
    );
    Ok((chain, dic))
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<(Chain, DicMethod)> {
    read_chain(std::fs::File::open(path)?)
}
