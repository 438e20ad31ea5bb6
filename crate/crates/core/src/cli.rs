//! Command-line surface.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{JlcmError, Result};
use crate::inference::auc::auc_ipcw;
use crate::inference::classify::{hard_assignments, posterior_membership};
use crate::inference::dic::dic;
use crate::inference::prediction::Predictor;
use crate::inference::summary::{named_parameters, PosteriorSummary};
use crate::io::chain_file::{load_chain, save_chain};
use crate::io::config::{parse_membership, RunConfig};
use crate::io::dataset::{load_dataset, write_simulation_csv};
use crate::io::outputs;
use crate::mcmc::Chain;
use crate::model::types::{Dataset, MembershipMode};
use crate::pipeline::{fit_dataset, select_models};
use crate::simulation::aids::{simulate_aids_rows, AIDS_COLUMNS, AIDS_PATIENTS};
use crate::simulation::{simulate_dataset, SimDesign};

pub const THREADS_ENV: &str = "JLCM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "jlcm", version, about = "Joint latent class models with time-varying membership")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a two-class dataset with switching memberships
    Simulate(SimulateArgs),
    /// Simulate rows in the AIDS trial layout
    SimulateAids(SimulateAidsArgs),
    /// Fit the model and write the chain plus a posterior summary
    Fit(FitArgs),
    /// Fit over a range of class counts and tabulate DIC / error rate
    Select(SelectArgs),
    /// Dynamic survival prediction curves and plot data
    Predict(PredictArgs),
    /// IPCW AUC over [t, t + dt)
    Auc(AucArgs),
    /// Posterior class probabilities and hard labels
    Classify(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Output CSV (id,time,y,followup,event,X1,X3)
    #[arg(long, default_value = "simulated.csv")]
    pub out: PathBuf,
    /// True labels and random effects per visit
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// True parameter values
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateAidsArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = AIDS_PATIENTS)]
    pub n: usize,
    #[arg(long, default_value = "aids.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Long-format CSV; overrides `data` in the config
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// key = value run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shortcut for the AIDS column layout
    #[arg(long)]
    pub aids_schema: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// time_varying or static
    #[arg(long)]
    pub membership: Option<String>,
    #[arg(long, default_value = "chain.txt")]
    pub chain: PathBuf,
    #[arg(long, default_value = "summary.csv")]
    pub summary: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Range `lo..hi` (inclusive) or a single K
    #[arg(long, default_value = "1..3")]
    pub k: String,
    /// time_varying, static, or both
    #[arg(long, default_value = "time_varying")]
    pub membership: String,
    /// Truth file from `simulate --truth`, enables the error-rate column
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "selection.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub chain: PathBuf,
    /// Comma-separated subject ids; all subjects when omitted
    #[arg(long)]
    pub ids: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Comma-separated horizons, or `lo:step:hi`
    #[arg(long, default_value = "0:0.05:0.3")]
    pub dt: String,
    #[arg(long, default_value = "prediction.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AucArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, default_value = "membership.csv")]
    pub out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_config(args: &DataArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.aids_schema {
        cfg.schema = crate::io::dataset::Schema::aids();
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    Ok(cfg)
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.data.as_ref().ok_or_else(|| JlcmError::Config("no data file given (--data or `data =`)".into()))?;
    load_dataset(path, &cfg.schema)
}

fn data_and_chain(input: &DataArgs, chain: &Path) -> Result<(RunConfig, Dataset, Chain)> {
    let cfg = load_config(input)?;
    let data = load_data(&cfg)?;
    let (chain, _) = load_chain(chain)?;
    Ok((cfg, data, chain))
}

/// Parses `1..3`, `2`, or `1,2,4`.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || JlcmError::Config(format!("bad K range `{s}`"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    let ks = s.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
    if ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

/// Parses `a,b,c` or `lo:step:hi` (inclusive, rounded to the step).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || JlcmError::Config(format!("bad grid `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let step: f64 = parts[1].parse().map_err(|_| bad())?;
        let hi: f64 = parts[2].parse().map_err(|_| bad())?;
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| lo + i as f64 * step).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let design = SimDesign { n_subjects: a.n, seed: a.seed, ..SimDesign::default() };
    let sim = simulate_dataset(&design)?;
    write_simulation_csv(create(&a.out)?, &sim.data)?;
    if let Some(p) = &a.truth {
        outputs::write_truth(create(p)?, &sim.data, &sim.truth)?;
    }
    if let Some(p) = &a.params {
        outputs::write_parameters(create(p)?, &named_parameters(&sim.truth, &sim.spec))?;
    }
    println!(
        "subjects={} visits={} censoring_rate={}",
        sim.data.n_subjects(),
        sim.data.n_visits(),
        sim.censoring_rate()
    );
    Ok(())
}

fn run_simulate_aids(a: &SimulateAidsArgs) -> Result<()> {
    let rows = simulate_aids_rows(a.n, a.seed);
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(AIDS_COLUMNS)?;
    for r in &rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    println!("patients={} rows={}", a.n, rows.len());
    Ok(())
}

fn run_fit(a: &FitArgs) -> Result<()> {
    let mut cfg = load_config(&a.input)?;
    if let Some(k) = a.k {
        cfg.n_classes = k;
    }
    if let Some(s) = a.seed {
        cfg.mcmc.seed = s;
    }
    if let Some(n) = a.iterations {
        cfg.mcmc.iterations = n;
    }
    if let Some(b) = a.burn_in {
        cfg.mcmc.burn_in = b;
    }
    if let Some(m) = &a.membership {
        cfg.membership = parse_membership(m)?;
    }
    let data = load_data(&cfg)?;
    let chain = fit_dataset(&data, &cfg)?;
    save_chain(&a.chain, &chain, cfg.dic)?;
    outputs::write_summary(create(&a.summary)?, &PosteriorSummary::from_chain(&chain)?)?;
    let report = dic(&data, &chain, cfg.dic)?;
    println!(
        "dic={} p_d={} dic_variant={} dic_penalty={}",
        report.dic, report.p_d, report.method.variant, report.method.penalty
    );
    for b in &chain.acceptance.blocks {
        println!("accept_{}={}", b.name, b.post_burn_in.rate());
    }
    Ok(())
}

fn run_select(a: &SelectArgs) -> Result<()> {
    let cfg = load_config(&a.input)?;
    let data = load_data(&cfg)?;
    let ks = parse_k_range(&a.k)?;
    let modes = match a.membership.as_str() {
        "both" => vec![MembershipMode::TimeVarying, MembershipMode::Static],
        m => vec![parse_membership(m)?],
    };
    let truth = match &a.truth {
        Some(p) => Some(outputs::read_truth_labels(File::open(p)?, &data)?),
        None => None,
    };
    let rows = select_models(&data, &cfg, &ks, &modes, truth.as_deref())?;
    outputs::write_selection(create(&a.out)?, &rows)?;
    let best = rows.iter().min_by(|x, y| x.dic.dic.total_cmp(&y.dic.dic)).expect("at least one K");
    println!("best_dic_k={} best_dic_membership={}", best.n_classes, best.membership);
    Ok(())
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    let (cfg, data, chain) = data_and_chain(&a.input, &a.chain)?;
    let t = a.t.unwrap_or(cfg.predict_t);
    let grid = parse_grid(&a.dt)?;
    let predictor = Predictor::from_chain(&chain)?;
    let indices: Vec<usize> = match &a.ids {
        None => (0..data.n_subjects()).collect(),
        Some(ids) => ids
            .split(',')
            .map(|id| {
                let id = id.trim();
                data.subjects()
                    .iter()
                    .position(|s| s.id == id)
                    .ok_or_else(|| JlcmError::Data(format!("unknown subject id `{id}`")))
            })
            .collect::<Result<_>>()?,
    };
    let curves = indices
        .iter()
        .map(|&i| predictor.curve(&data.subjects()[i], i, t, &grid).map(|c| (i, c)))
        .collect::<Result<Vec<_>>>()?;
    outputs::write_prediction(create(&a.out)?, &data, &predictor, &curves)?;
    println!("curves={}", curves.len());
    Ok(())
}

fn run_auc(a: &AucArgs) -> Result<()> {
    let (cfg, data, chain) = data_and_chain(&a.input, &a.chain)?;
    let t = a.t.unwrap_or(cfg.predict_t);
    let dt = a.dt.unwrap_or(cfg.predict_dt);
    let risk = Predictor::from_chain(&chain)?.risk_scores(&data, t, dt)?;
    let times: Vec<f64> = data.subjects().iter().map(|s| s.survival.followup_time).collect();
    let events: Vec<bool> = data.subjects().iter().map(|s| s.survival.event).collect();
    println!("auc={} t={t} dt={dt}", auc_ipcw(&risk, &times, &events, t, dt)?);
    Ok(())
}

fn run_classify(a: &ClassifyArgs) -> Result<()> {
    let (_, data, chain) = data_and_chain(&a.input, &a.chain)?;
    let probs = posterior_membership(&data, &chain)?;
    let labels = hard_assignments(&probs);
    outputs::write_membership(create(&a.out)?, &data, &probs, &labels)?;
    println!("visits={}", data.n_visits());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::SimulateAids(a) => run_simulate_aids(a),
        Command::Fit(a) => run_fit(a),
        Command::Select(a) => run_select(a),
        Command::Predict(a) => run_predict(a),
        Command::Auc(a) => run_auc(a),
        Command::Classify(a) => run_classify(a),
    }
}

/// Machine-readable failure line: `error kind=<kind> message=<quoted>`.
pub fn error_line(e: &JlcmError) -> String {
    format!("error kind={} message={:?}", e.kind(), e.to_string())
}

/// Sizes the global thread pool from `JLCM_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| JlcmError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| JlcmError::Config(e.to_string()))?;
    }
    Ok(())
}

pub fn main_with_args<I, T>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let _ = writeln!(stderr, "error kind=usage message={:?}", e.to_string().trim());
            return 2;
        }
    };
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(&e));
            1
        }
    }
}
