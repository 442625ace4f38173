//! Sweep and Monte Carlo drivers. Cells run in parallel; each cell is a
//! pure function of its derived seed and rows are sorted before return.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, empirical_risks, erm_from_risks, risk_under, sample_labeled_from, LabelModel, Scenario};
use crate::error::{Error, Result};
use crate::estimation::{ar1_confidence_epsilon, ar1_estimate_gap, estimate_pseudo_spectral_gap, EstimatorConfig};
use crate::markov::{
    build_benchmark_kernel, interpolate_kernels, sample_ar1, stationary_distribution, validate_kernel, Ar1Process,
    Distribution, TransitionMatrix,
};
use crate::pacbayes::{bound_finite_erm, bound_finite_erm_empirical, BoundFormula, BoundParams};
use crate::spectral::pseudo_spectral_gap;

fn default_t_list() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

fn default_p() -> f64 {
    0.01
}

fn default_q() -> f64 {
    0.001
}

/// Configuration shared by the kernel-family studies. The family is
/// `R_t = t P + (1 - t) Q` where `P` is the benchmark kernel (or
/// `base_kernel` when given) and `Q` the rank-one kernel of its
/// stationary law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d: usize,
    pub n_list: Vec<usize>,
    #[serde(default = "default_t_list")]
    pub t_list: Vec<f64>,
    /// Number of seeds per `(t, n)` cell in the sweeps.
    #[serde(default = "one")]
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Bound settings for the bound and coverage studies; `n` and
    /// `lambda` are set per cell.
    #[serde(default)]
    pub bound: Option<BoundParams>,
    /// Monte Carlo replications for the MSE and coverage studies.
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub label_probs: Option<Vec<f64>>,
    #[serde(default)]
    pub base_kernel: Option<Vec<Vec<f64>>>,
}

fn one() -> usize {
    1
}

impl SweepConfig {
    pub fn new(d: usize, n_list: Vec<usize>, master_seed: u64) -> Self {
        Self {
            d,
            n_list,
            t_list: default_t_list(),
            seeds: 1,
            master_seed,
            estimator: EstimatorConfig::default(),
            bound: None,
            replications: 1,
            p: default_p(),
            q: default_q(),
            label_probs: None,
            base_kernel: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::param("n", "list must be non-empty and positive"));
        }
        if self.t_list.is_empty() {
            return Err(Error::param("t", "list must be non-empty"));
        }
        if let Some(t) = self.t_list.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::TOutOfRange(*t));
        }
        if self.seeds == 0 {
            return Err(Error::param("seeds", "must be at least 1"));
        }
        self.estimator.validate()?;
        if let Some(b) = &self.bound {
            b.validate()?;
        }
        if let Some(probs) = &self.label_probs {
            if probs.len() != self.d {
                return Err(Error::DimensionMismatch { left: probs.len(), right: self.d });
            }
        }
        Ok(())
    }

    /// Sets the bound parameters with `c = 1` and `epsilon = a = 0.1`.
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.bound = Some(BoundParams::new(1, delta));
        self
    }

    fn bound_params(&self) -> Result<BoundParams> {
        self.bound.ok_or_else(|| Error::param("delta", "required for bound studies"))
    }

    /// Seed column values `derive_seed(master, j)` for `j < seeds`.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|j| derive_seed(self.master_seed, j)).collect()
    }

    pub fn labels(&self) -> Result<LabelModel> {
        match &self.label_probs {
            Some(p) => LabelModel::new(p.clone()),
            None => LabelModel::linear(self.d),
        }
    }

    fn family(&self) -> Result<(TransitionMatrix, TransitionMatrix)> {
        match &self.base_kernel {
            Some(rows) => {
                let p = validate_kernel(rows)?;
                if p.d() != self.d {
                    return Err(Error::DimensionMismatch { left: p.d(), right: self.d });
                }
                let pi = stationary_distribution(&p)?;
                Ok((p.clone(), TransitionMatrix::rank_one(&pi)))
            }
            None => build_benchmark_kernel(self.d, self.p, self.q),
        }
    }

    /// `R_t` for every `t` in the list, with its stationary law and exact
    /// pseudo-spectral gap at the estimator's truncation.
    fn kernels(&self) -> Result<Vec<FamilyMember>> {
        let (p, q) = self.family()?;
        self.t_list
            .par_iter()
            .map(|&t| {
                let kernel = interpolate_kernels(&p, &q, t)?;
                let pi = stationary_distribution(&kernel)?;
                let gamma = pseudo_spectral_gap(&kernel, self.estimator.k_max)?.value;
                Ok(FamilyMember { t, kernel, pi, gamma })
            })
            .collect()
    }
}

struct FamilyMember {
    t: f64,
    kernel: TransitionMatrix,
    pi: Distribution,
    gamma: f64,
}

/// RNG seed of the `(t, n)` cell for a given seed column value.
pub fn cell_seed(seed: u64, t: f64, n: usize) -> u64 {
    derive_seed(derive_seed(seed, t.to_bits()), n as u64)
}

fn cells(tn: usize, nn: usize, sn: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(tn * nn * sn);
    for ti in 0..tn {
        for ni in 0..nn {
            for si in 0..sn {
                out.push((ti, ni, si));
            }
        }
    }
    out
}

fn sort_rows<T>(rows: &mut [T], key: impl Fn(&T) -> (f64, usize, u64)) {
    rows.sort_by(|a, b| {
        let (ta, na, sa) = key(a);
        let (tb, nb, sb) = key(b);
        ta.total_cmp(&tb).then(na.cmp(&nb)).then(sa.cmp(&sb))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub gamma_true: f64,
    pub gamma_hat: f64,
    pub argmax_k: usize,
}

/// Exact versus estimated pseudo-spectral gap along the family.
pub fn run_gap_estimation_sweep(cfg: &SweepConfig) -> Result<Vec<GapRow>> {
    cfg.validate()?;
    let family = cfg.kernels()?;
    let labels = cfg.labels()?;
    let seeds = cfg.seed_list();
    let mut rows = cells(family.len(), cfg.n_list.len(), seeds.len())
        .into_par_iter()
        .map(|(ti, ni, si)| {
            let m = &family[ti];
            let n = cfg.n_list[ni];
            let sc = Scenario::new(m.kernel.clone(), labels.clone())?;
            let traj = sample_labeled_from(&sc, &m.pi, n, cell_seed(seeds[si], m.t, n))?;
            let est = estimate_pseudo_spectral_gap(&traj, cfg.d, &cfg.estimator)?;
            Ok(GapRow { t: m.t, n, seed: seeds[si], gamma_true: m.gamma, gamma_hat: est.value, argmax_k: est.argmax_k })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows, |r| (r.t, r.n, r.seed));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub bound_theory: f64,
    pub bound_empirical: f64,
    pub risk_true: f64,
    pub risk_emp: f64,
    pub valid_theory: bool,
    pub valid_empirical: bool,
}

struct BoundCell {
    risk_true: f64,
    risk_emp: f64,
    theory: f64,
    empirical: f64,
    valid_theory: bool,
    valid_empirical: bool,
}

fn bound_cell(cfg: &SweepConfig, m: &FamilyMember, labels: &LabelModel, n: usize, seed: u64) -> Result<BoundCell> {
    let sc = Scenario::new(m.kernel.clone(), labels.clone())?;
    let traj = sample_labeled_from(&sc, &m.pi, n, seed)?;
    let empirical = empirical_risks(&traj, cfg.d)?;
    let true_risks: Vec<f64> = (1..=cfg.d).map(|theta| risk_under(&m.pi, labels, theta)).collect();
    let erm = erm_from_risks(empirical, true_risks);
    let gamma_hat = estimate_pseudo_spectral_gap(&traj, cfg.d, &cfg.estimator)?.value;
    let params = BoundParams { n, lambda: None, ..cfg.bound_params()? };
    let theory = bound_finite_erm(&params, m.gamma, cfg.d, None)?.with_empirical_risk(erm.erm_empirical_risk);
    let emp = bound_finite_erm_empirical(&params, gamma_hat, cfg.d)?.with_empirical_risk(erm.erm_empirical_risk);
    Ok(BoundCell {
        risk_true: erm.erm_true_risk,
        risk_emp: erm.erm_empirical_risk,
        theory: theory.rhs,
        empirical: emp.rhs,
        valid_theory: theory.valid,
        valid_empirical: emp.valid,
    })
}

/// ERM bound with exact and with estimated gap, next to the true risk of
/// the selected threshold.
pub fn run_bound_sweep(cfg: &SweepConfig) -> Result<Vec<BoundRow>> {
    cfg.validate()?;
    cfg.bound_params()?;
    let family = cfg.kernels()?;
    let labels = cfg.labels()?;
    let seeds = cfg.seed_list();
    let mut rows = cells(family.len(), cfg.n_list.len(), seeds.len())
        .into_par_iter()
        .map(|(ti, ni, si)| {
            let m = &family[ti];
            let n = cfg.n_list[ni];
            let c = bound_cell(cfg, m, &labels, n, cell_seed(seeds[si], m.t, n))?;
            Ok(BoundRow {
                t: m.t,
                n,
                seed: seeds[si],
                bound_theory: c.theory,
                bound_empirical: c.empirical,
                risk_true: c.risk_true,
                risk_emp: c.risk_emp,
                valid_theory: c.valid_theory,
                valid_empirical: c.valid_empirical,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows, |r| (r.t, r.n, r.seed));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub t: f64,
    pub n: usize,
    pub replications: usize,
    pub mse: f64,
}

/// Squared errors `(gamma_hat - gamma)^2` of replications `0..replications`
/// at one `(t, n)`. Replication `j` depends only on `(master_seed, j)`.
pub fn mse_replication_errors(cfg: &SweepConfig, t: f64, n: usize) -> Result<Vec<f64>> {
    let one = SweepConfig { t_list: vec![t], n_list: vec![n], ..cfg.clone() };
    one.validate()?;
    let family = one.kernels()?;
    replication_errors(&one, &family[0], n)
}

fn replication_errors(cfg: &SweepConfig, m: &FamilyMember, n: usize) -> Result<Vec<f64>> {
    let labels = cfg.labels()?;
    let sc = Scenario::new(m.kernel.clone(), labels)?;
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|j| {
            let seed = cell_seed(derive_seed(cfg.master_seed, j), m.t, n);
            let traj = sample_labeled_from(&sc, &m.pi, n, seed)?;
            let est = estimate_pseudo_spectral_gap(&traj, cfg.d, &cfg.estimator)?;
            Ok((est.value - m.gamma).powi(2))
        })
        .collect()
}

/// Mean squared error of the gap estimator over replications.
pub fn run_mse_study(cfg: &SweepConfig) -> Result<Vec<MseRow>> {
    cfg.validate()?;
    if cfg.replications < 2 {
        return Err(Error::TooFewReplications { required: 2, got: cfg.replications });
    }
    let family = cfg.kernels()?;
    let mut rows = Vec::new();
    for m in &family {
        for &n in &cfg.n_list {
            let errs = replication_errors(cfg, m, n)?;
            let mse = errs.iter().sum::<f64>() / errs.len() as f64;
            rows.push(MseRow { t: m.t, n, replications: cfg.replications, mse });
        }
    }
    sort_rows(&mut rows, |r| (r.t, r.n, 0));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub t: f64,
    pub n: usize,
    pub formula: String,
    pub delta: f64,
    pub replications: usize,
    pub coverage: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Wilson score interval at 95% for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Fraction of replications with `R(theta_hat) <= rhs`, for the exact-gap
/// and the estimated-gap ERM bounds. One row per cell and formula.
pub fn run_coverage_study(cfg: &SweepConfig) -> Result<Vec<CoverageRow>> {
    cfg.validate()?;
    if cfg.replications < 100 {
        return Err(Error::TooFewReplications { required: 100, got: cfg.replications });
    }
    let delta = cfg.bound_params()?.delta;
    let family = cfg.kernels()?;
    let labels = cfg.labels()?;
    let mut rows = Vec::new();
    for m in &family {
        for &n in &cfg.n_list {
            let hits = (0..cfg.replications as u64)
                .into_par_iter()
                .map(|j| {
                    let seed = cell_seed(derive_seed(cfg.master_seed, j), m.t, n);
                    let c = bound_cell(cfg, m, &labels, n, seed)?;
                    Ok((c.risk_true <= c.theory, c.risk_true <= c.empirical))
                })
                .collect::<Result<Vec<_>>>()?;
            let theory = hits.iter().filter(|h| h.0).count();
            let empirical = hits.iter().filter(|h| h.1).count();
            for (formula, k) in [(BoundFormula::FiniteErm, theory), (BoundFormula::FiniteErmEmpirical, empirical)] {
                let (lo, hi) = wilson_interval(k, cfg.replications);
                rows.push(CoverageRow {
                    t: m.t,
                    n,
                    formula: formula.name().to_string(),
                    delta,
                    replications: cfg.replications,
                    coverage: k as f64 / cfg.replications as f64,
                    wilson_lo: lo,
                    wilson_hi: hi,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1Config {
    pub a_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1Row {
    pub a: f64,
    pub n: usize,
    pub seed: u64,
    pub gamma_true: f64,
    pub gamma_hat: f64,
    pub eps_radius: f64,
    pub within: bool,
}

/// AR(1) gap estimates against `1 - a^2` and the relative-error radius.
pub fn run_ar1_study(cfg: &Ar1Config) -> Result<Vec<Ar1Row>> {
    if cfg.a_list.is_empty() || cfg.n_list.is_empty() || cfg.n_list.contains(&0) || cfg.seeds == 0 {
        return Err(Error::param("ar1", "a, n and seeds must be non-empty"));
    }
    let processes = cfg.a_list.iter().map(|&a| Ar1Process::new(a)).collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|j| derive_seed(cfg.master_seed, j)).collect();
    let mut rows = cells(processes.len(), cfg.n_list.len(), seeds.len())
        .into_par_iter()
        .map(|(ai, ni, si)| {
            let proc = &processes[ai];
            let n = cfg.n_list[ni];
            let xs = sample_ar1(proc, n, cell_seed(seeds[si], proc.a(), n))?;
            let gamma_true = proc.pseudo_spectral_gap();
            let gamma_hat = ar1_estimate_gap(&xs)?;
            let eps_radius = ar1_confidence_epsilon(n, gamma_true, cfg.delta)?;
            let within = (gamma_hat / gamma_true - 1.0).abs() <= eps_radius;
            Ok(Ar1Row { a: proc.a(), n, seed: seeds[si], gamma_true, gamma_hat, eps_radius, within })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows, |r| (r.a, r.n, r.seed));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(d: usize) -> SweepConfig {
        let mut cfg = SweepConfig::new(d, vec![200, 2000], 7).with_delta(0.05);
        cfg.t_list = vec![0.0, 0.5, 1.0];
        cfg.seeds = 2;
        cfg
    }

    #[test]
    fn gap_sweep_shape_and_iid_column() {
        let rows = run_gap_estimation_sweep(&small(4)).unwrap();
        assert_eq!(rows.len(), 3 * 2 * 2);
        for r in rows.iter().filter(|r| r.t == 0.0) {
            assert_abs_diff_eq!(r.gamma_true, 1.0, epsilon = 1e-10);
        }
        assert_eq!(rows, run_gap_estimation_sweep(&small(4)).unwrap());
    }

    #[test]
    fn bound_sweep_rows() {
        let rows = run_bound_sweep(&small(4)).unwrap();
        assert_eq!(rows.len(), 12);
        for r in &rows {
            assert!(r.bound_theory >= r.risk_emp && r.bound_empirical >= r.risk_emp);
        }
    }

    #[test]
    fn mse_requires_two_replications() {
        let cfg = small(4);
        assert!(matches!(run_mse_study(&cfg), Err(Error::TooFewReplications { .. })));
    }

    #[test]
    fn mse_prefix_stable() {
        let mut cfg = small(4);
        cfg.replications = 4;
        let a = mse_replication_errors(&cfg, 0.5, 300).unwrap();
        cfg.replications = 8;
        let b = mse_replication_errors(&cfg, 0.5, 300).unwrap();
        assert_eq!(a[..], b[..4]);
    }

    #[test]
    fn coverage_degenerate_labels() {
        let mut cfg = small(4);
        cfg.t_list = vec![0.25];
        cfg.n_list = vec![500];
        cfg.replications = 100;
        cfg.label_probs = Some(vec![1.0; 4]);
        let rows = run_coverage_study(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert_eq!(r.coverage, 1.0);
        }
        cfg.replications = 99;
        assert!(run_coverage_study(&cfg).is_err());
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(95, 100);
        assert_abs_diff_eq!(lo, 0.8882, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.9785, epsilon = 1e-4);
    }

    #[test]
    fn ar1_iid_column() {
        let cfg = Ar1Config { a_list: vec![0.0, 0.6], n_list: vec![1000], seeds: 3, master_seed: 1, delta: 0.05 };
        let rows = run_ar1_study(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert_eq!(r.gamma_true, 1.0 - r.a * r.a);
        }
    }
}
