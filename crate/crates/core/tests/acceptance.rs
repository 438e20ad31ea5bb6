//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jlcm::inference::{
    auc_ipcw, dic, hard_assignments, matched_error_rate, posterior_membership, PosteriorSummary, Predictor,
};
use jlcm::io::{read_dataset, RunConfig, Schema};
use jlcm::mcmc::am::{am_step, AmState, ProposalKind};
use jlcm::mcmc::conditionals::{
    beta_conditional, lambda_conditional, sample_beta, sample_lambda_step, sample_sigma_u, sample_tau,
    sigma_u_conditional, tau_conditional,
};
use jlcm::mcmc::sample_labels;
use jlcm::model::hazard::ClassHazard;
use jlcm::model::types::{BaselineGrid, LongitudinalRecord, RandomEffectDesign, Subject, SurvivalRecord};
use jlcm::model::joint_log_likelihood;
use jlcm::pipeline::fit_dataset;
use jlcm::simulation::aids::{simulate_aids_rows, AIDS_COLUMNS};
use jlcm::simulation::{invert_survival_time, simulate_dataset, SimDesign};
use jlcm::{run_chain, Chain, Dataset, MembershipMode, McmcConfig, ModelSpec, ParamState, Priors};

const REPLICATES: u64 = 10;
const COVERAGE_MIN: usize = 7;
const BETA_BIAS_MAX: f64 = 0.2;
const ERROR_RATE_WINS: usize = 10;
const DIC_WINS_MIN: usize = 7;
const SLICE_TOL: f64 = 1e-8;
const MOMENT_DRAWS: usize = 100_000;
const MOMENT_SE: f64 = 3.0;
const HAZARD_CONFIGS: usize = 1000;
const HAZARD_REL_TOL: f64 = 1e-8;
const INVERSION_DRAWS: usize = 100_000;
const INVERSION_TOL: f64 = 1e-8;
const SURVIVAL_SUP_TOL: f64 = 0.01;
const LABEL_DRAWS: usize = 100_000;
const LABEL_TOL: f64 = 0.02;
const AM_DRAWS: usize = 50_000;
const AM_MEAN_TOL: f64 = 0.05;
const AM_COV_TOL: f64 = 0.10;
const AUC_N: usize = 200;
const AUC_WINS_MIN: usize = 7;
const PREDICT_T: f64 = 0.5;
const PREDICT_DT: f64 = 0.3;
const BASIC_K: usize = 3;
const AIDS_PATIENTS: usize = 467;
const AIDS_BUDGET: Duration = Duration::from_secs(30 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, o: &Outcome) {
    println!("criterion {n} [{}] {title}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

/// Fits shared between the selection and prediction criteria.
struct Replicate {
    data: Dataset,
    truth: ParamState,
    sim_spec: ModelSpec,
    tv2: Option<Chain>,
    basic: Option<Chain>,
    winners: (String, String),
}

fn candidate_config(seed: u64, k: usize, m: MembershipMode) -> RunConfig {
    let mut c = RunConfig::default();
    c.n_classes = k;
    c.membership = m;
    c.mcmc = McmcConfig { seed, ..McmcConfig::default() };
    c
}

fn label(k: usize, m: MembershipMode) -> String {
    format!("{}{k}", if m == MembershipMode::TimeVarying { "TV" } else { "basic" })
}

fn replicates() -> Vec<Replicate> {
    let candidates: Vec<(usize, MembershipMode)> = (1..=3)
        .map(|k| (k, MembershipMode::TimeVarying))
        .chain((1..=4).map(|k| (k, MembershipMode::Static)))
        .collect();
    (1..=REPLICATES)
        .map(|seed| {
            let sim = simulate_dataset(&SimDesign::with_seed(seed)).unwrap();
            let true_k = sim.spec.n_classes;
            let mut tv2 = None;
            let mut basic = None;
            let mut best_dic = (f64::INFINITY, String::new());
            let mut best_err = (f64::INFINITY, String::new());
            for &(k, m) in &candidates {
                let cfg = candidate_config(seed, k, m);
                let chain = fit_dataset(&sim.data, &cfg).unwrap();
                let d = dic(&sim.data, &chain, cfg.dic).unwrap().dic;
                let assigned = hard_assignments(&posterior_membership(&sim.data, &chain).unwrap());
                let err = matched_error_rate(&assigned, sim.true_labels(), k, true_k).unwrap();
                if d < best_dic.0 {
                    best_dic = (d, label(k, m));
                }
                if err < best_err.0 {
                    best_err = (err, label(k, m));
                }
                match (k, m) {
                    (2, MembershipMode::TimeVarying) => tv2 = Some(chain),
                    (BASIC_K, MembershipMode::Static) => basic = Some(chain),
                    _ => {}
                }
            }
            Replicate {
                data: sim.data,
                truth: sim.truth,
                sim_spec: sim.spec,
                tv2,
                basic,
                winners: (best_err.1, best_dic.1),
            }
        })
        .collect()
}

fn criterion_1(reps: &[Replicate]) -> Outcome {
    let mut covered: Vec<(String, usize)> = Vec::new();
    let mut beta_abs: Vec<(String, f64)> = Vec::new();
    for (r, seed) in reps.iter().zip(1..) {
        let priors = Priors::defaults(&r.sim_spec);
        let chain = run_chain(&r.data, &r.sim_spec, &priors, &McmcConfig { seed, ..McmcConfig::default() }).unwrap();
        let summary = PosteriorSummary::from_chain(&chain).unwrap();
        let truth = jlcm::inference::named_parameters(&r.truth, &r.sim_spec);
        for (name, value) in truth.into_iter().filter(|(n, _)| !n.starts_with("sigma_u")) {
            let s = summary.get(&name).unwrap();
            match covered.iter_mut().find(|c| c.0 == name) {
                Some(c) => c.1 += s.covers(value) as usize,
                None => covered.push((name.clone(), s.covers(value) as usize)),
            }
            if name.starts_with("beta") {
                let e = (s.mean - value).abs() / REPLICATES as f64;
                match beta_abs.iter_mut().find(|c| c.0 == name) {
                    Some(c) => c.1 += e,
                    None => beta_abs.push((name, e)),
                }
            }
        }
    }
    let worst_cov = covered.iter().min_by_key(|c| c.1).unwrap();
    let worst_bias = beta_abs.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    Outcome {
        pass: covered.len() == 18 && worst_cov.1 >= COVERAGE_MIN && worst_bias.1 <= BETA_BIAS_MAX,
        detail: format!(
            "{} parameters, min ETI coverage {}/{} ({}), max beta mean |bias| {:.4} ({})",
            covered.len(),
            worst_cov.1,
            REPLICATES,
            worst_cov.0,
            worst_bias.1,
            worst_bias.0
        ),
    }
}

fn criterion_2(reps: &[Replicate]) -> Outcome {
    let err_wins = reps.iter().filter(|r| r.winners.0 == "TV2").count();
    let dic_wins = reps.iter().filter(|r| r.winners.1 == "TV2").count();
    let dic_picks: Vec<&str> = reps.iter().map(|r| r.winners.1.as_str()).collect();
    Outcome {
        pass: err_wins >= ERROR_RATE_WINS && dic_wins >= DIC_WINS_MIN,
        detail: format!(
            "error rate picks TV2 {err_wins}/{REPLICATES}, DIC ({}) picks TV2 {dic_wins}/{REPLICATES} {dic_picks:?}",
            RunConfig::default().dic.formula()
        ),
    }
}

/// Largest deviation of `a - b` from its value at the first grid point.
fn slice_discrepancy(a: &[f64], b: &[f64]) -> f64 {
    let c = a[0] - b[0];
    a.iter().zip(b).map(|(x, y)| (x - y - c).abs()).fold(0.0, f64::max)
}

fn grid(centre: f64, half: f64) -> Vec<f64> {
    (0..81).map(|g| centre - half + 2.0 * half * g as f64 / 80.0).collect()
}

fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, m4)
}

/// Standardised errors of the sample mean and variance against the exact ones.
fn moment_z(xs: &[f64], mean: f64, var: f64) -> f64 {
    let n = xs.len() as f64;
    let (m, v, m4) = moments(xs);
    let z_mean = (m - mean).abs() / (var / n).sqrt();
    let z_var = (v - var).abs() / ((m4 - v * v) / n).sqrt();
    z_mean.max(z_var)
}

fn iw_kernel(s: &DMatrix<f64>, df: f64, scale: &DMatrix<f64>) -> f64 {
    let q = s.nrows() as f64;
    let inv = s.clone().try_inverse().unwrap();
    -0.5 * (df + q + 1.0) * s.determinant().ln() - 0.5 * (scale * inv).trace()
}

fn criterion_3() -> Outcome {
    let sim = simulate_dataset(&SimDesign { n_subjects: 30, ..SimDesign::with_seed(21) }).unwrap();
    let (data, state, spec) = (&sim.data, &sim.truth, &sim.spec);
    let priors = Priors::defaults(spec);
    let ll = |st: &ParamState| joint_log_likelihood(data, st, spec).unwrap();
    let mut slice = 0.0f64;
    let mut z = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let prior_prec = priors.beta_cov.clone().try_inverse().unwrap();
    let prior_mean = DVector::from_column_slice(&priors.beta_mean);
    for k in 0..spec.n_classes {
        let c = beta_conditional(k, data, state, &priors).unwrap();
        let prec = c.cov.clone().try_inverse().unwrap();
        for a in 0..spec.dim_x2 {
            let (mut target, mut sampler) = (vec![], vec![]);
            for b in grid(c.mean[a], 5.0 * c.cov[(a, a)].sqrt()) {
                let mut st = state.clone();
                st.beta[k][a] = b;
                let x = DVector::from_column_slice(&st.beta[k]);
                let (d0, d) = (&x - &prior_mean, &x - &c.mean);
                target.push(ll(&st) - 0.5 * (d0.transpose() * &prior_prec * &d0)[0]);
                sampler.push(-0.5 * (d.transpose() * &prec * &d)[0]);
            }
            slice = slice.max(slice_discrepancy(&target, &sampler));
        }
        let draws: Vec<Vec<f64>> =
            (0..MOMENT_DRAWS).map(|_| sample_beta(k, data, state, &priors, &mut rng).unwrap()).collect();
        for a in 0..spec.dim_x2 {
            let xs: Vec<f64> = draws.iter().map(|d| d[a]).collect();
            z = z.max(moment_z(&xs, c.mean[a], c.cov[(a, a)]));
        }

        let c = tau_conditional(k, data, state, &priors);
        let mode = c.rate / (c.shape + 1.0);
        let (mut target, mut sampler) = (vec![], vec![]);
        for t in grid(mode, 0.7 * mode) {
            let mut st = state.clone();
            st.tau[k] = t;
            target.push(ll(&st) - (priors.tau_shape + 1.0) * t.ln() - priors.tau_rate / t);
            sampler.push(-(c.shape + 1.0) * t.ln() - c.rate / t);
        }
        slice = slice.max(slice_discrepancy(&target, &sampler));
        let xs: Vec<f64> = (0..MOMENT_DRAWS).map(|_| sample_tau(k, data, state, &priors, &mut rng).unwrap()).collect();
        let mean = c.rate / (c.shape - 1.0);
        z = z.max(moment_z(&xs, mean, mean * mean / (c.shape - 2.0)));

        for s in 0..spec.baseline[k].n_steps() {
            let c = lambda_conditional(k, s, data, state, spec, &priors).unwrap();
            let m = c.shape / c.rate;
            let (mut target, mut sampler) = (vec![], vec![]);
            for l in grid(m, 0.9 * m) {
                let mut st = state.clone();
                st.lambda0[k][s] = l;
                target.push(ll(&st) + (priors.lambda_shape - 1.0) * l.ln() - priors.lambda_rate * l);
                sampler.push((c.shape - 1.0) * l.ln() - c.rate * l);
            }
            slice = slice.max(slice_discrepancy(&target, &sampler));
            let xs: Vec<f64> = (0..MOMENT_DRAWS)
                .map(|_| sample_lambda_step(k, s, data, state, spec, &priors, &mut rng).unwrap())
                .collect();
            z = z.max(moment_z(&xs, m, c.shape / (c.rate * c.rate)));
        }
    }

    let c = sigma_u_conditional(state, &priors);
    let q = spec.q() as f64;
    let mean = &c.scale / (c.df - q - 1.0);
    for (a, b) in [(0, 0), (1, 1), (0, 1)] {
        let half = 0.5 * (mean[(a, a)] * mean[(b, b)]).sqrt();
        let (mut target, mut sampler) = (vec![], vec![]);
        for v in grid(mean[(a, b)], half) {
            let mut st = state.clone();
            st.sigma_u = mean.clone();
            st.sigma_u[(a, b)] = v;
            st.sigma_u[(b, a)] = v;
            target.push(ll(&st) + iw_kernel(&st.sigma_u, priors.sigma_df, &priors.sigma_scale));
            sampler.push(iw_kernel(&st.sigma_u, c.df, &c.scale));
        }
        slice = slice.max(slice_discrepancy(&target, &sampler));
    }
    let draws: Vec<DMatrix<f64>> =
        (0..MOMENT_DRAWS).map(|_| sample_sigma_u(state, &priors, &mut rng).unwrap()).collect();
    let (nu, psi) = (c.df, &c.scale);
    for (a, b) in [(0, 0), (1, 1), (0, 1)] {
        let xs: Vec<f64> = draws.iter().map(|d| d[(a, b)]).collect();
        let var = ((nu - q + 1.0) * psi[(a, b)].powi(2) + (nu - q - 1.0) * psi[(a, a)] * psi[(b, b)])
            / ((nu - q) * (nu - q - 1.0).powi(2) * (nu - q - 3.0));
        z = z.max(moment_z(&xs, mean[(a, b)], var));
    }
    Outcome {
        pass: slice < SLICE_TOL && z < MOMENT_SE,
        detail: format!("max slice discrepancy {slice:.2e}, max moment error {z:.2} standard errors"),
    }
}

fn random_grid(rng: &mut ChaCha8Rng) -> (BaselineGrid, Vec<f64>) {
    let n_cuts = rng.random_range(0..5);
    let mut cuts: Vec<f64> = (0..n_cuts).map(|_| rng.random_range(0.05..2.5)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let heights = (0..=cuts.len()).map(|_| rng.random_range(0.05..2.0)).collect();
    (BaselineGrid::new(cuts).unwrap(), heights)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0f64;
    let mut tiny = 0;
    for c in 0..HAZARD_CONFIGS {
        let (grid, heights) = random_grid(&mut rng);
        let a = rng.random_range(-2.0..2.0);
        let b = if c % 4 == 0 {
            tiny += 1;
            rng.random_range(-1e-10..1e-10)
        } else {
            rng.random_range(-4.0..4.0)
        };
        // Every tenth horizon sits exactly on a knot.
        let t = match grid.cuts().first() {
            Some(&k) if c % 10 == 1 => k,
            _ => rng.random_range(0.01..3.0),
        };
        let h = ClassHazard::linear(a, b, &heights, &grid);
        let exact = h.cumulative(t).unwrap();
        let quad = h.cumulative_by_quadrature(t).unwrap();
        worst = worst.max((exact - quad).abs() / quad.abs());
    }
    Outcome {
        pass: worst < HAZARD_REL_TOL,
        detail: format!("{HAZARD_CONFIGS} configurations ({tiny} with |b| < 1e-10), max relative error {worst:.2e}"),
    }
}

fn criterion_5() -> Outcome {
    let design = SimDesign::default();
    let constant = BaselineGrid::constant();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0f64;
    let mut finite = 0usize;
    for _ in 0..INVERSION_DRAWS {
        let class = &design.classes[rng.random_range(0..design.classes.len())];
        let x3 = rng.random_range(0..2) as f64;
        let u_re = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let linear = class.omega * x3 + class.delta[0] * u_re[0];
        let t = invert_survival_time(u, class.lambda0, linear, class.delta[1] * u_re[1]).unwrap();
        if !t.is_finite() {
            continue;
        }
        finite += 1;
        let lambda = [class.lambda0];
        let h = ClassHazard::new(&[x3], &[class.omega], &class.delta, &u_re, &lambda, &constant).unwrap();
        worst = worst.max((h.cumulative(t).unwrap() + u.ln()).abs());
    }

    // Empirical survival at one fixed covariate pattern against exp(-H).
    let class = &design.classes[0];
    let u_re = [0.4, -1.2];
    let lambda = [class.lambda0];
    let h = ClassHazard::new(&[1.0], &[class.omega], &class.delta, &u_re, &lambda, &constant).unwrap();
    let linear = class.omega + class.delta[0] * u_re[0];
    let mut times: Vec<f64> = (0..INVERSION_DRAWS)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            invert_survival_time(u, class.lambda0, linear, class.delta[1] * u_re[1]).unwrap()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let n = times.len() as f64;
    let mut sup = 0.0f64;
    for (i, &t) in times.iter().enumerate().filter(|(_, t)| t.is_finite()) {
        let s = (-h.cumulative(t).unwrap()).exp();
        sup = sup.max((s - (n - i as f64) / n).abs()).max((s - (n - i as f64 - 1.0) / n).abs());
    }
    Outcome {
        pass: worst < INVERSION_TOL && sup < SURVIVAL_SUP_TOL,
        detail: format!("{finite} finite draws, max |H(T) + log u| {worst:.2e}, survival sup-distance {sup:.4}"),
    }
}

fn toy_subject(id: &str, ys: &[f64], follow: f64, event: bool) -> Subject {
    Subject {
        id: id.into(),
        visits: ys
            .iter()
            .enumerate()
            .map(|(j, &y)| {
                let t = 0.3 * j as f64;
                LongitudinalRecord { visit_time: t, response: y, x1: vec![1.0, t], x2: vec![1.0, t], z: vec![1.0] }
            })
            .collect(),
        survival: SurvivalRecord { followup_time: follow, event, x3: vec![1.0] },
    }
}

fn criterion_6() -> Outcome {
    let data = Dataset::new(vec![toy_subject("a", &[1.2, 1.9], 0.8, true), toy_subject("b", &[0.4, 2.4], 1.1, false)])
        .unwrap();
    let spec = ModelSpec {
        n_classes: 2,
        dim_x1: 2,
        dim_x2: 2,
        dim_x3: 1,
        random_effects: RandomEffectDesign::new(1).unwrap(),
        baseline: vec![BaselineGrid::constant(); 2],
        membership: MembershipMode::TimeVarying,
        reference_class: true,
    };
    let mut st = ParamState::zeros(&spec, &data);
    st.beta = vec![vec![0.5, 1.0], vec![1.5, 1.5]];
    st.tau = vec![0.4, 0.6];
    st.xi = vec![vec![0.3, -0.5], vec![0.0, 0.0]];
    st.omega = vec![vec![0.0], vec![0.2]];
    st.delta = vec![vec![-0.3], vec![-0.3]];
    st.lambda0 = vec![vec![0.5], vec![0.8]];
    st.u = vec![vec![0.2], vec![-0.4]];

    let configs: Vec<Vec<Vec<usize>>> = (0..16usize)
        .map(|c| vec![vec![c & 1, (c >> 1) & 1], vec![(c >> 2) & 1, (c >> 3) & 1]])
        .collect();
    let logw: Vec<f64> = configs
        .iter()
        .map(|l| {
            let mut s = st.clone();
            s.labels = l.clone();
            joint_log_likelihood(&data, &s, &spec).unwrap()
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::MIN, f64::max);
    let total: f64 = logw.iter().map(|w| (w - max).exp()).sum();
    let exact: Vec<f64> = logw.iter().map(|w| (w - max).exp() / total).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut counts = [0usize; 16];
    for _ in 0..LABEL_DRAWS {
        st.labels = sample_labels(&data, &st, &spec, &mut rng).unwrap();
        counts[configs.iter().position(|c| *c == st.labels).unwrap()] += 1;
    }
    let worst = counts
        .iter()
        .zip(&exact)
        .map(|(&c, p)| (c as f64 / LABEL_DRAWS as f64 - p).abs())
        .fold(0.0, f64::max);
    let p_max = exact.iter().cloned().fold(0.0, f64::max);
    Outcome {
        pass: worst < LABEL_TOL,
        detail: format!("16 configurations, largest exact probability {p_max:.3}, max frequency error {worst:.4}"),
    }
}

fn criterion_7() -> Outcome {
    let seed_exact = [1usize, 2, 4, 7].iter().all(|&d| {
        let am = AmState::with_defaults(d);
        let expected = 0.1 * 0.1 / d as f64;
        let c = am.seed_cov();
        (0..d).all(|i| (0..d).all(|j| c[(i, j)] == if i == j { expected } else { 0.0 }))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut warm = AmState::with_defaults(4);
    let mut fixed_before = true;
    for m in 0..8 {
        fixed_before &= warm.propose(&[0.0; 4], &mut rng).1 == ProposalKind::Fixed;
        warm.record(&[m as f64, 0.0, -(m as f64), 1.0]);
    }

    let mean = DVector::from_column_slice(&[1.0, -2.0]);
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
    let prec = cov.clone().try_inverse().unwrap();
    let log_target = |x: &[f64]| {
        let d = DVector::from_column_slice(x) - &mean;
        -0.5 * (d.transpose() * &prec * &d)[0]
    };
    let mut am = AmState::with_defaults(2);
    let mut x = vec![0.0, 0.0];
    let mut lp = log_target(&x);
    for _ in 0..5_000 {
        am_step(&mut am, &mut x, &mut lp, log_target, &mut rng);
    }
    let mut sum = DVector::zeros(2);
    let mut outer = DMatrix::zeros(2, 2);
    for _ in 0..AM_DRAWS {
        am_step(&mut am, &mut x, &mut lp, log_target, &mut rng);
        let v = DVector::from_column_slice(&x);
        sum += &v;
        outer += &v * v.transpose();
    }
    let m = &sum / AM_DRAWS as f64;
    let c = &outer / AM_DRAWS as f64 - &m * m.transpose();
    let mean_err = (&m - &mean).amax();
    let cov_err = (&c - &cov).norm() / cov.norm();
    Outcome {
        pass: seed_exact && fixed_before && mean_err < AM_MEAN_TOL && cov_err < AM_COV_TOL,
        detail: format!(
            "seed covariance exact: {seed_exact}, fixed proposals before adaptation: {fixed_before}, \
             mean error {mean_err:.4}, covariance relative error {cov_err:.4}"
        ),
    }
}

fn criterion_8(reps: &[Replicate]) -> Outcome {
    let first = &reps[0];
    let pred = Predictor::from_chain(first.tv2.as_ref().unwrap()).unwrap();
    let unit = first
        .data
        .subjects()
        .iter()
        .enumerate()
        .all(|(i, s)| pred.survival(s, i, PREDICT_T, 0.0).unwrap() == 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let times: Vec<f64> = (0..AUC_N).map(|_| -rng.random::<f64>().ln()).collect();
    let risk: Vec<f64> = times.iter().map(|t| (-t).exp() + 0.5 * rng.random::<f64>()).collect();
    let events = vec![true; AUC_N];
    let ipcw = auc_ipcw(&risk, &times, &events, PREDICT_T, PREDICT_DT).unwrap();
    let horizon = PREDICT_T + PREDICT_DT;
    let cases: Vec<usize> = (0..AUC_N).filter(|&i| times[i] >= PREDICT_T && times[i] < horizon).collect();
    let controls: Vec<usize> = (0..AUC_N).filter(|&i| times[i] >= horizon).collect();
    let concordant = cases.iter().flat_map(|&i| controls.iter().map(move |&j| (i, j))).filter(|&(i, j)| risk[i] > risk[j]).count();
    let brute = concordant as f64 / (cases.len() * controls.len()) as f64;
    let separated: Vec<f64> = times.iter().map(|&t| (t >= PREDICT_T && t < horizon) as u8 as f64).collect();
    let perfect = auc_ipcw(&separated, &times, &events, PREDICT_T, PREDICT_DT).unwrap();

    let mut wins = 0;
    let mut pairs = Vec::new();
    for r in reps {
        let times: Vec<f64> = r.data.subjects().iter().map(|s| s.survival.followup_time).collect();
        let events: Vec<bool> = r.data.subjects().iter().map(|s| s.survival.event).collect();
        let auc = |chain: &Chain| {
            let risk = Predictor::from_chain(chain).unwrap().risk_scores(&r.data, PREDICT_T, PREDICT_DT).unwrap();
            auc_ipcw(&risk, &times, &events, PREDICT_T, PREDICT_DT)
        };
        // A replicate without events in the window has no AUC and cannot count as a win.
        match (auc(r.tv2.as_ref().unwrap()), auc(r.basic.as_ref().unwrap())) {
            (Ok(tv), Ok(basic)) => {
                wins += (tv >= basic) as usize;
                pairs.push(format!("{tv:.3}/{basic:.3}"));
            }
            _ => pairs.push("undefined".into()),
        }
    }
    Outcome {
        pass: unit && ipcw == brute && perfect == 1.0 && wins >= AUC_WINS_MIN,
        detail: format!(
            "dt=0 gives 1: {unit}, uncensored IPCW {ipcw:.6} vs pairwise {brute:.6}, separated {perfect}, \
             TV2 >= basic{BASIC_K} in {wins}/{REPLICATES} (TV/basic {pairs:?})"
        ),
    }
}

fn criterion_9() -> Outcome {
    let rows = simulate_aids_rows(AIDS_PATIENTS, 9);
    let mut csv = AIDS_COLUMNS.join(",");
    for r in &rows {
        csv.push('\n');
        csv.push_str(&r.fields().join(","));
    }
    let data = read_dataset(csv.as_bytes(), &Schema::aids()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.schema = Schema::aids();
    cfg.mcmc.seed = 9;
    let start = Instant::now();
    let chain = fit_dataset(&data, &cfg).unwrap();
    let elapsed = start.elapsed();
    let summary = PosteriorSummary::from_chain(&chain).unwrap();
    let valid = summary
        .rows
        .iter()
        .all(|p| p.mean.is_finite() && p.sd >= 0.0 && p.lower <= p.mean && p.mean <= p.upper);
    let report = dic(&data, &chain, cfg.dic).unwrap();
    Outcome {
        pass: data.n_subjects() == AIDS_PATIENTS && valid && report.dic.is_finite() && elapsed < AIDS_BUDGET,
        detail: format!(
            "{} subjects, {} rows, K=2 fit in {:.1} s, {} summaries valid: {valid}, DIC {:.1}",
            data.n_subjects(),
            data.n_visits(),
            elapsed.as_secs_f64(),
            summary.rows.len(),
            report.dic
        ),
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; listing must not run the suite.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let reps = replicates();
    let run = |f: &dyn Fn() -> Outcome| {
        catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Outcome { pass: false, detail: "panicked (see stderr)".into() })
    };
    let results = [
        ("parameter recovery", run(&|| criterion_1(&reps))),
        ("model selection", run(&|| criterion_2(&reps))),
        ("conditional-sampler oracles", run(&criterion_3)),
        ("cumulative-hazard equivalence", run(&criterion_4)),
        ("survival-inversion identity", run(&criterion_5)),
        ("label-posterior exactness", run(&criterion_6)),
        ("adaptive Metropolis", run(&criterion_7)),
        ("prediction and AUC", run(&|| criterion_8(&reps))),
        ("AIDS-scale smoke fit", run(&criterion_9)),
    ];
    for (n, (title, o)) in results.iter().enumerate() {
        report(n + 1, title, o);
    }
    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!("acceptance: {} passed, {failed} failed in {:.0} s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
