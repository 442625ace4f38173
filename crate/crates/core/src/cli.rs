//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimation::{estimate_pseudo_spectral_gap, EstimatorConfig};
use crate::experiments::{
    derive_seed, pair_gap_check, random_kernel, random_label_model, run_ar1_study, run_bound_sweep, run_coverage_study,
    run_gap_estimation_sweep, run_mse_study, Ar1Config, Ar1Row, BoundRow, CoverageRow, GapRow, LabelModel, MseRow,
    SweepConfig,
};
use crate::io::{fmt_f64, read_kernel, read_trajectory, to_csv, CsvRow, ScenarioFile};
use crate::markov::Distribution;
use crate::pacbayes::{
    bound_finite_erm, bound_finite_erm_empirical, bound_markov, bound_markov_empirical, bound_rio_general,
    phi_mixing_bound, BoundParams, BoundReport, DiscretePrior, MixingInputs,
};
use crate::plot::LinePlot;
use crate::spectral::{pseudo_spectral_gap, DEFAULT_K};

/// Tolerance of the pair-chain gap equality check.
const PAIR_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "pacbayes-markov", version, about = "Pseudo-spectral gaps and PAC-Bayes bounds for Markov chains")]
pub struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "PACBAYES_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(short = 'o', long, global = true)]
    pub output: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plot: bool,
    /// JSON config or a previously written run manifest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact or estimated pseudo-spectral gap.
    Gap(GapArgs),
    /// Evaluate one bound and print it as JSON.
    Bound(BoundArgs),
    /// Gap estimation sweep and ERM bound sweep over the kernel family.
    Sweep(StudyArgs),
    /// Mean squared error of the gap estimator.
    Mse(StudyArgs),
    /// Monte Carlo coverage of the ERM bounds.
    Coverage(StudyArgs),
    /// AR(1) estimator study.
    Ar1(Ar1Args),
    /// Compare pair-chain and base-chain pseudo-spectral gaps.
    PairCheck(PairArgs),
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long, conflicts_with = "trajectory")]
    pub kernel: Option<PathBuf>,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Number of states for trajectory input.
    #[arg(long)]
    pub d: Option<usize>,
    /// Additive smoothing of the count estimator.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Exact value from a kernel file (the default for kernel input).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    Markov,
    MarkovEmpirical,
    FiniteErm,
    FiniteErmEmpirical,
    PhiMixing,
    Rio,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    pub formula: FormulaArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Pseudo-spectral gap, or its estimate for the empirical formulas.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kl: f64,
    /// Number of parameters.
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Prior weights over the parameters, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub prior: Option<Vec<f64>>,
    /// Selected parameter (1-based) whose prior weight enters the bound.
    #[arg(long)]
    pub theta: Option<usize>,
    #[arg(long)]
    pub pi_star: Option<f64>,
    /// Empirical risk added to the right-hand side.
    #[arg(long)]
    pub emp_risk: Option<f64>,
    /// Failure probability of the gap estimate, reported next to delta.
    #[arg(long)]
    pub alpha_extra: Option<f64>,
    /// phi(1), phi(2), ... for the Rio bound.
    #[arg(long, value_delimiter = ',')]
    pub phi: Option<Vec<f64>>,
    /// JSON file with the n x n coefficient matrix for the Rio bound.
    #[arg(long)]
    pub gamma_matrix: Option<PathBuf>,
    /// Per-step diameter for the Rio bound (default: c).
    #[arg(long)]
    pub delta_t: Option<f64>,
    /// Print reports whose preconditions fail and exit 0.
    #[arg(long)]
    pub allow_invalid: bool,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Seeds per cell.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub a: f64,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Scenario JSON supplying the base kernel or `p`, `q` and labels.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Ar1Args {
    #[arg(long, value_delimiter = ',')]
    pub a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub d: Vec<usize>,
    /// Random pairs per dimension.
    #[arg(long, default_value_t = 25)]
    pub count: usize,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Check one kernel file instead of random pairs.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<f64>>,
}

/// Record written next to every study output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub version: String,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let threads = match cli.threads {
        Some(0) => return Err(Error::param("threads", "must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Gap(a) => cmd_gap(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Sweep(a) => cmd_study(cli, "sweep", a, threads),
        Command::Mse(a) => cmd_study(cli, "mse", a, threads),
        Command::Coverage(a) => cmd_study(cli, "coverage", a, threads),
        Command::Ar1(a) => cmd_ar1(cli, a, threads),
        Command::PairCheck(a) => cmd_pair_check(cli, a),
    })
}

fn cmd_gap(args: &GapArgs) -> Result<i32> {
    let out = if let Some(path) = &args.kernel {
        let k = read_kernel(path)?;
        let r = pseudo_spectral_gap(&k, args.k)?;
        json!({
            "source": "exact",
            "gamma_ps": r.value,
            "argmax_k": r.argmax_k,
            "boundary_hit": r.boundary_hit,
            "K": args.k,
        })
    } else if let Some(path) = &args.trajectory {
        let d = args.d.ok_or_else(|| Error::param("d", "required with --trajectory"))?;
        if args.exact {
            return Err(Error::param("exact", "needs --kernel"));
        }
        let traj = read_trajectory(path)?;
        let cfg = EstimatorConfig { k_max: args.k, smoothing: args.alpha };
        let r = estimate_pseudo_spectral_gap(&traj, d, &cfg)?;
        json!({
            "source": "estimate",
            "gamma_ps": r.value,
            "argmax_k": r.argmax_k,
            "boundary_hit": r.boundary_hit,
            "K": args.k,
            "alpha": args.alpha,
            "n": r.n,
        })
    } else {
        return Err(Error::param("input", "one of --kernel or --trajectory is required"));
    };
    println!("{out}");
    Ok(0)
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or_else(|| Error::param(name, "required by this formula"))
}

fn cmd_bound(args: &BoundArgs) -> Result<i32> {
    let mut p = BoundParams::new(args.n, args.delta).with_c(args.c).with_epsilon(args.eps).with_a(args.a);
    p.lambda = args.lambda;
    let report: BoundReport = match args.formula {
        FormulaArg::Markov => bound_markov(&p, need(args.gamma, "gamma")?, args.kl)?,
        FormulaArg::MarkovEmpirical => bound_markov_empirical(&p, need(args.gamma, "gamma")?, args.kl)?,
        FormulaArg::FiniteErm => {
            let m = need(args.m, "M")?;
            let prior = match (&args.prior, args.theta) {
                (Some(w), Some(theta)) => {
                    if theta == 0 {
                        return Err(Error::param("theta", "is 1-based"));
                    }
                    Some((DiscretePrior::new(Distribution::new(w.clone())?), theta - 1))
                }
                (None, None) => None,
                _ => return Err(Error::param("prior", "--prior and --theta go together")),
            };
            bound_finite_erm(&p, need(args.gamma, "gamma")?, m, prior.as_ref().map(|(mu, i)| (mu, *i)))?
        }
        FormulaArg::FiniteErmEmpirical => {
            bound_finite_erm_empirical(&p, need(args.gamma, "gamma")?, need(args.m, "M")?)?
        }
        FormulaArg::PhiMixing => {
            phi_mixing_bound(&p, need(args.gamma, "gamma")?, need(args.pi_star, "pi_star")?, args.kl)?
        }
        FormulaArg::Rio => {
            let deltas = vec![args.delta_t.unwrap_or(args.c); args.n];
            let mix = match (&args.gamma_matrix, &args.phi) {
                (Some(path), _) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    let g: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
                    MixingInputs::with_gamma_matrix(deltas, g)
                }
                (None, Some(phi)) => MixingInputs::with_phi(deltas, phi.clone()),
                (None, None) => return Err(Error::MissingMixingInputs),
            };
            bound_rio_general(&p, &mix, args.kl)?
        }
    };
    let mut report = report;
    if let Some(r) = args.emp_risk {
        report = report.with_empirical_risk(r);
    }
    if let Some(a) = args.alpha_extra {
        report = report.with_alpha(a);
    }
    let text = serde_json::to_string_pretty(&report.record()).map_err(|e| Error::Io(e.to_string()))?;
    println!("{text}");
    if !report.valid && !args.allow_invalid {
        eprintln!(
            "error: preconditions not met ({}); pass --allow-invalid to accept",
            report.reason.as_deref().unwrap_or("invalid")
        );
        return Ok(2);
    }
    Ok(0)
}

/// Config JSON, either bare or wrapped in a run manifest.
fn load_config<T: for<'de> Deserialize<'de>>(path: &Path, command: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let inner = match (value.get("command"), value.get("config")) {
        (Some(c), Some(cfg)) => {
            if c.as_str() != Some(command) {
                return Err(Error::Parse(format!("manifest is for {c}, not {command}")));
            }
            cfg.clone()
        }
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| Error::Parse(e.to_string()))
}

fn sweep_config(cli: &Cli, args: &StudyArgs, command: &str) -> Result<SweepConfig> {
    if let Some(path) = &cli.config {
        return load_config(path, command);
    }
    let scenario = args.scenario.as_ref().map(|p| ScenarioFile::read(p)).transpose()?;
    let d = match (args.d, &scenario) {
        (Some(d), _) => d,
        (None, Some(s)) => s.d,
        (None, None) => return Err(Error::param("d", "required")),
    };
    let n = args.n.clone().ok_or_else(|| Error::param("n", "required"))?;
    let mut cfg = SweepConfig::new(d, n, cli.seed.unwrap_or(0));
    if let Some(t) = &args.t {
        cfg.t_list = t.clone();
    }
    cfg.seeds = args.seeds;
    cfg.replications = args.replications;
    cfg.estimator = EstimatorConfig { k_max: args.k, smoothing: args.alpha };
    if let Some(delta) = args.delta {
        cfg.bound = Some(BoundParams::new(1, delta).with_epsilon(args.eps).with_a(args.a));
    }
    if let Some(s) = scenario {
        if s.d != d {
            return Err(Error::DimensionMismatch { left: s.d, right: d });
        }
        cfg.base_kernel = s.kernel.clone();
        cfg.label_probs = s.label_probs.clone();
        cfg.p = s.p.unwrap_or(cfg.p);
        cfg.q = s.q.unwrap_or(cfg.q);
    }
    Ok(cfg)
}

/// Collects files in memory and writes them at the end; on failure any
/// file already written is removed.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(cli: &Cli) -> Self {
        Self { dir: cli.output.clone().unwrap_or_else(|| PathBuf::from(".")), files: Vec::new() }
    }

    fn csv<R: CsvRow>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        self.files.push((name.to_string(), to_csv(rows)?));
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: LinePlot) {
        self.files.push((name.to_string(), plot.to_svg().into_bytes()));
    }

    fn commit(self, command: &str, config: serde_json::Value, seed: u64, threads: usize, start: Instant) -> Result<()> {
        let manifest_name = format!("{command}_manifest.json");
        let mut written: Vec<PathBuf> = Vec::new();
        let result = (|| -> Result<()> {
            fs::create_dir_all(&self.dir).map_err(|e| Error::Io(format!("{}: {e}", self.dir.display())))?;
            for (name, bytes) in &self.files {
                let path = self.dir.join(name);
                fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                written.push(path);
            }
            let mut outputs: Vec<String> = self.files.iter().map(|(n, _)| n.clone()).collect();
            outputs.push(manifest_name.clone());
            let manifest = RunManifest {
                command: command.to_string(),
                config,
                master_seed: seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                threads,
                outputs,
                duration_secs: start.elapsed().as_secs_f64(),
            };
            let path = self.dir.join(&manifest_name);
            let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
            fs::write(&path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
            Ok(())
        })();
        if result.is_err() {
            for p in &written {
                let _ = fs::remove_file(p);
            }
        } else {
            for p in &written {
                println!("wrote {}", p.display());
            }
        }
        result
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

fn cmd_study(cli: &Cli, command: &str, args: &StudyArgs, threads: usize) -> Result<i32> {
    let start = Instant::now();
    let cfg = sweep_config(cli, args, command)?;
    let mut out = Outputs::new(cli);
    match command {
        "sweep" => {
            if cfg.bound.is_none() {
                return Err(Error::param("delta", "required"));
            }
            let gaps = run_gap_estimation_sweep(&cfg)?;
            let bounds = run_bound_sweep(&cfg)?;
            out.csv("gap_sweep.csv", &gaps)?;
            out.csv("bound_sweep.csv", &bounds)?;
            if cli.plot {
                out.svg("gap_sweep.svg", gap_plot(&gaps));
                out.svg("bound_sweep.svg", bound_plot(&bounds));
            }
        }
        "mse" => {
            let rows = run_mse_study(&cfg)?;
            out.csv("mse.csv", &rows)?;
            if cli.plot {
                out.svg("mse.svg", mse_plot(&rows));
            }
        }
        "coverage" => {
            if cfg.bound.is_none() {
                return Err(Error::param("delta", "required"));
            }
            let rows = run_coverage_study(&cfg)?;
            out.csv("coverage.csv", &rows)?;
            if cli.plot {
                out.svg("coverage.svg", coverage_plot(&rows));
            }
        }
        _ => unreachable!("study commands are fixed"),
    }
    out.commit(command, to_value(&cfg)?, cfg.master_seed, threads, start)?;
    Ok(0)
}

fn cmd_ar1(cli: &Cli, args: &Ar1Args, threads: usize) -> Result<i32> {
    let start = Instant::now();
    let cfg: Ar1Config = match &cli.config {
        Some(path) => load_config(path, "ar1")?,
        None => Ar1Config {
            a_list: args.a.clone().ok_or_else(|| Error::param("a", "required"))?,
            n_list: args.n.clone().ok_or_else(|| Error::param("n", "required"))?,
            seeds: args.seeds,
            master_seed: cli.seed.unwrap_or(0),
            delta: args.delta.ok_or_else(|| Error::param("delta", "required"))?,
        },
    };
    let rows = run_ar1_study(&cfg)?;
    let within = rows.iter().filter(|r| r.within).count();
    let mut out = Outputs::new(cli);
    out.csv("ar1.csv", &rows)?;
    if cli.plot {
        out.svg("ar1.svg", ar1_plot(&rows));
    }
    out.commit("ar1", to_value(&cfg)?, cfg.master_seed, threads, start)?;
    println!("within radius: {within}/{}", rows.len());
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct PairRow {
    d: usize,
    index: usize,
    gamma_base: f64,
    gamma_pair: f64,
}

impl CsvRow for PairRow {
    fn header() -> &'static [&'static str] {
        &["d", "index", "gamma_base", "gamma_pair", "abs_diff"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.index.to_string(),
            fmt_f64(self.gamma_base),
            fmt_f64(self.gamma_pair),
            fmt_f64((self.gamma_base - self.gamma_pair).abs()),
        ]
    }
}

fn cmd_pair_check(cli: &Cli, args: &PairArgs) -> Result<i32> {
    let mut rows = Vec::new();
    if let Some(path) = &args.kernel {
        let k = read_kernel(path)?;
        let labels = match &args.labels {
            Some(l) => LabelModel::new(l.clone())?,
            None => LabelModel::linear(k.d())?,
        };
        let (gamma_base, gamma_pair) = pair_gap_check(&k, &labels, args.k)?;
        rows.push(PairRow { d: k.d(), index: 0, gamma_base, gamma_pair });
    } else {
        let master = cli.seed.unwrap_or(0);
        for &d in &args.d {
            for i in 0..args.count {
                let s = derive_seed(derive_seed(master, d as u64), i as u64);
                let k = random_kernel(d, s)?;
                let labels = random_label_model(d, s.wrapping_add(1))?;
                let (gamma_base, gamma_pair) = pair_gap_check(&k, &labels, args.k)?;
                rows.push(PairRow { d, index: i, gamma_base, gamma_pair });
            }
        }
    }
    let worst = rows.iter().map(|r| (r.gamma_base - r.gamma_pair).abs()).fold(0.0, f64::max);
    if let Some(dir) = &cli.output {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("pair_check.csv"), to_csv(&rows)?)?;
    }
    println!(
        "{}",
        json!({ "pairs": rows.len(), "max_abs_diff": worst, "tolerance": PAIR_TOL, "ok": worst <= PAIR_TOL })
    );
    Ok(if worst <= PAIR_TOL { 0 } else { 3 })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Groups `(n, t, value)` triples into one series per `n`, aggregated by `f`.
fn by_n(items: impl Iterator<Item = (usize, f64, f64)>, f: fn(&mut [f64]) -> f64) -> BTreeMap<usize, Vec<(f64, f64)>> {
    let mut groups: BTreeMap<usize, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for (n, t, v) in items {
        groups.entry(n).or_default().entry(t.to_bits()).or_default().push(v);
    }
    groups
        .into_iter()
        .map(|(n, ts)| (n, ts.into_iter().map(|(t, mut vs)| (f64::from_bits(t), f(&mut vs))).collect()))
        .collect()
}

fn mean(v: &mut [f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn gap_plot(rows: &[GapRow]) -> LinePlot {
    let mut p = LinePlot::new("Pseudo-spectral gap", "t", "gamma");
    let truth = by_n(rows.iter().map(|r| (0, r.t, r.gamma_true)), mean);
    p.add("exact", truth.into_values().next().unwrap_or_default());
    for (n, pts) in by_n(rows.iter().map(|r| (r.n, r.t, r.gamma_hat)), median) {
        p.add(format!("estimate n={n}"), pts);
    }
    p
}

fn bound_plot(rows: &[BoundRow]) -> LinePlot {
    let mut p = LinePlot::new("ERM bounds", "t", "risk");
    for (n, pts) in by_n(rows.iter().map(|r| (r.n, r.t, r.bound_theory)), mean) {
        p.add(format!("exact gap n={n}"), pts);
    }
    for (n, pts) in by_n(rows.iter().map(|r| (r.n, r.t, r.bound_empirical)), mean) {
        p.add(format!("estimated gap n={n}"), pts);
    }
    for (n, pts) in by_n(rows.iter().map(|r| (r.n, r.t, r.risk_true)), mean) {
        p.add(format!("true risk n={n}"), pts);
    }
    p
}

fn mse_plot(rows: &[MseRow]) -> LinePlot {
    let mut p = LinePlot::new("Estimator MSE", "t", "mse");
    for (n, pts) in by_n(rows.iter().map(|r| (r.n, r.t, r.mse)), mean) {
        p.add(format!("n={n}"), pts);
    }
    p
}

fn coverage_plot(rows: &[CoverageRow]) -> LinePlot {
    let mut p = LinePlot::new("Coverage", "t", "coverage");
    for formula in ["finite-erm", "finite-erm-empirical"] {
        let sel = rows.iter().filter(|r| r.formula == formula);
        for (n, pts) in by_n(sel.map(|r| (r.n, r.t, r.coverage)), mean) {
            p.add(format!("{formula} n={n}"), pts);
        }
    }
    p
}

fn ar1_plot(rows: &[Ar1Row]) -> LinePlot {
    let mut p = LinePlot::new("AR(1) gap estimate", "a", "gamma");
    let truth = by_n(rows.iter().map(|r| (0, r.a, r.gamma_true)), mean);
    p.add("1 - a^2", truth.into_values().next().unwrap_or_default());
    for (n, pts) in by_n(rows.iter().map(|r| (r.n, r.a, r.gamma_hat)), median) {
        p.add(format!("median estimate n={n}"), pts);
    }
    p
}
