//! Supervised learning on Markov inputs: threshold predictors under 0-1
//! loss, exact and empirical risks, ERM and the study drivers.

mod studies;

pub use studies::{
    cell_seed, mse_replication_errors, run_ar1_study, run_bound_sweep, run_coverage_study, run_gap_estimation_sweep,
    run_mse_study, wilson_interval, Ar1Config, Ar1Row, BoundRow, CoverageRow, GapRow, MseRow, SweepConfig,
};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{draw_index, draw_row, stationary_distribution, Distribution, Trajectory, TransitionMatrix};
use crate::spectral::pseudo_spectral_gap;

/// `probs[u] = P(Y = 1 | U = u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LabelModel {
    probs: Vec<f64>,
}

impl LabelModel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!("label probability {p} not in [0, 1]")));
        }
        Ok(Self { probs })
    }

    /// `p_u = 0.1 + 0.8 (u - 1)/(d - 1)`; `0.5` when `d = 1`.
    pub fn linear(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyMatrix);
        }
        if d == 1 {
            return Self::new(vec![0.5]);
        }
        Self::new((0..d).map(|u| 0.1 + 0.8 * u as f64 / (d - 1) as f64).collect())
    }

    pub fn constant(d: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; d])
    }

    pub fn d(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, u: usize) -> f64 {
        self.probs[u]
    }
}

impl TryFrom<Vec<f64>> for LabelModel {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelModel> for Vec<f64> {
    fn from(m: LabelModel) -> Self {
        m.probs
    }
}

/// Kernel plus label model. Predictors are thresholds `theta in 1..=d`
/// with `f_theta(u) = 1(u >= theta)` on 1-based states; the loss is 0-1,
/// so the loss cap is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kernel: TransitionMatrix,
    pub labels: LabelModel,
}

impl Scenario {
    pub fn new(kernel: TransitionMatrix, labels: LabelModel) -> Result<Self> {
        if kernel.d() != labels.d() {
            return Err(Error::DimensionMismatch { left: kernel.d(), right: labels.d() });
        }
        Ok(Self { kernel, labels })
    }

    pub fn d(&self) -> usize {
        self.kernel.d()
    }

    /// Number of predictors, `M = d`.
    pub fn num_thresholds(&self) -> usize {
        self.d()
    }

    pub fn loss_cap(&self) -> f64 {
        1.0
    }
}

fn check_theta(theta: usize, d: usize) -> Result<()> {
    if theta == 0 || theta > d {
        return Err(Error::param("theta", format!("{theta} not in 1..={d}")));
    }
    Ok(())
}

/// Prediction of `f_theta` at 0-based state `s`.
fn predicts_one(theta: usize, s: usize) -> bool {
    s + 1 >= theta
}

fn risk_under(pi: &Distribution, labels: &LabelModel, theta: usize) -> f64 {
    (0..pi.len())
        .map(|s| {
            let p = labels.prob(s);
            pi[s] * if predicts_one(theta, s) { 1.0 - p } else { p }
        })
        .sum()
}

/// Stationary 0-1 risk `sum_{u<theta} pi(u) p_u + sum_{u>=theta} pi(u) (1 - p_u)`.
pub fn true_risk_exact(sc: &Scenario, theta: usize) -> Result<f64> {
    check_theta(theta, sc.d())?;
    let pi = stationary_distribution(&sc.kernel)?;
    Ok(risk_under(&pi, &sc.labels, theta))
}

/// `true_risk_exact` for every threshold, indexed `theta - 1`.
pub fn true_risks_exact(sc: &Scenario) -> Result<Vec<f64>> {
    let pi = stationary_distribution(&sc.kernel)?;
    Ok((1..=sc.d()).map(|theta| risk_under(&pi, &sc.labels, theta)).collect())
}

/// Fraction of misclassified steps.
pub fn empirical_risk(traj: &Trajectory, theta: usize) -> Result<f64> {
    let labels = traj.labels.as_ref().ok_or(Error::MissingLabels)?;
    if traj.states.is_empty() {
        return Err(Error::ZeroLength);
    }
    if theta == 0 {
        return Err(Error::param("theta", "thresholds start at 1"));
    }
    let wrong = traj.states.iter().zip(labels).filter(|&(&s, &y)| predicts_one(theta, s) != (y == 1)).count();
    Ok(wrong as f64 / traj.states.len() as f64)
}

/// Empirical risks of all `d` thresholds from one pass over the sample.
pub fn empirical_risks(traj: &Trajectory, d: usize) -> Result<Vec<f64>> {
    let labels = traj.labels.as_ref().ok_or(Error::MissingLabels)?;
    if traj.states.is_empty() {
        return Err(Error::ZeroLength);
    }
    let mut ones = vec![0usize; d];
    let mut zeros = vec![0usize; d];
    for (position, (&s, &y)) in traj.states.iter().zip(labels).enumerate() {
        if s >= d {
            return Err(Error::StateOutOfRange { position, state: s, d });
        }
        if y == 1 {
            ones[s] += 1;
        } else {
            zeros[s] += 1;
        }
    }
    // theta = 1 predicts 1 everywhere; moving theta past u flips u to 0
    let mut wrong: usize = zeros.iter().sum();
    let n = traj.states.len() as f64;
    let mut out = Vec::with_capacity(d);
    for u in 0..d {
        out.push(wrong as f64 / n);
        wrong = wrong + ones[u] - zeros[u];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// `R(theta)`, indexed `theta - 1`.
    pub true_risks: Vec<f64>,
    /// `r(theta)`, indexed `theta - 1`.
    pub empirical_risks: Vec<f64>,
    /// 1-based minimizer of the empirical risk.
    pub erm_theta: usize,
    pub erm_empirical_risk: f64,
    pub erm_true_risk: f64,
}

/// ERM over thresholds; ties go to the smallest `theta`.
pub fn erm_select(traj: &Trajectory, sc: &Scenario) -> Result<RiskReport> {
    let empirical = empirical_risks(traj, sc.d())?;
    let true_risks = true_risks_exact(sc)?;
    Ok(erm_from_risks(empirical, true_risks))
}

pub(crate) fn erm_from_risks(empirical_risks: Vec<f64>, true_risks: Vec<f64>) -> RiskReport {
    let mut best = 0;
    for (i, r) in empirical_risks.iter().enumerate() {
        if *r < empirical_risks[best] {
            best = i;
        }
    }
    RiskReport {
        erm_theta: best + 1,
        erm_empirical_risk: empirical_risks[best],
        erm_true_risk: true_risks[best],
        true_risks,
        empirical_risks,
    }
}

/// Kernel of the pair chain `(U_t, Y_t)` on `2d` states ordered
/// `(1,0), (1,1), (2,0), ...`:
/// `Pbar((u,y),(u',y')) = P(u,u') q(u',y')`.
pub fn build_pair_kernel(p: &TransitionMatrix, labels: &LabelModel) -> Result<TransitionMatrix> {
    let d = p.d();
    if labels.d() != d {
        return Err(Error::DimensionMismatch { left: d, right: labels.d() });
    }
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for u in 0..d {
        for v in 0..d {
            let puv = p.get(u, v);
            let q1 = labels.prob(v);
            for y in 0..2 {
                m[(2 * u + y, 2 * v)] = puv * (1.0 - q1);
                m[(2 * u + y, 2 * v + 1)] = puv * q1;
            }
        }
    }
    TransitionMatrix::from_matrix(m)
}

/// Base and pair-chain pseudo-spectral gaps at truncation `k_max`.
pub fn pair_gap_check(p: &TransitionMatrix, labels: &LabelModel, k_max: usize) -> Result<(f64, f64)> {
    let base = pseudo_spectral_gap(p, k_max)?.value;
    let pair = pseudo_spectral_gap(&build_pair_kernel(p, labels)?, k_max)?.value;
    Ok((base, pair))
}

/// Variance of the loss of `f_theta` under the stationary pair law. For
/// 0-1 loss this is `R (1 - R)`; the two computations are cross-checked.
pub fn loss_variance_exact(sc: &Scenario, theta: usize) -> Result<f64> {
    check_theta(theta, sc.d())?;
    let pi = stationary_distribution(&sc.kernel)?;
    let risk = risk_under(&pi, &sc.labels, theta);
    let mut v = 0.0;
    for s in 0..sc.d() {
        let p1 = sc.labels.prob(s);
        for (y, mass) in [(0u8, 1.0 - p1), (1u8, p1)] {
            let loss = if predicts_one(theta, s) != (y == 1) { 1.0 } else { 0.0 };
            v += pi[s] * mass * (loss - risk).powi(2);
        }
    }
    let bernoulli = risk * (1.0 - risk);
    if (v - bernoulli).abs() > 1e-10 {
        return Err(Error::Numerical(format!("loss variance {v} disagrees with R(1-R) = {bernoulli}")));
    }
    Ok(v)
}

/// Labeled trajectory of length `n` started from the stationary law.
pub fn sample_labeled_trajectory(sc: &Scenario, n: usize, seed: u64) -> Result<Trajectory> {
    let pi = stationary_distribution(&sc.kernel)?;
    sample_labeled_from(sc, &pi, n, seed)
}

pub(crate) fn sample_labeled_from(sc: &Scenario, init: &Distribution, n: usize, seed: u64) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut s = draw_index(init.as_slice(), rng.random());
    for step in 0..n {
        if step > 0 {
            s = draw_row(&sc.kernel, s, rng.random());
        }
        states.push(s);
        let u: f64 = rng.random();
        labels.push(u8::from(u < sc.labels.prob(s)));
    }
    Ok(Trajectory { states, labels: Some(labels), seed, kernel_id: String::new() })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `j` under `master`. Stable: stream `j` does not depend
/// on how many streams are drawn.
pub fn derive_seed(master: u64, j: u64) -> u64 {
    splitmix64(master ^ splitmix64(j))
}

/// Kernel with i.i.d. exponential row weights; every entry is positive so
/// the chain is ergodic.
pub fn random_kernel(d: usize, seed: u64) -> Result<TransitionMatrix> {
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
        let total: f64 = w.iter().sum();
        for j in 0..d {
            m[(i, j)] = w[j] / total;
        }
    }
    TransitionMatrix::from_matrix(m)
}

/// Uniform label probabilities.
pub fn random_label_model(d: usize, seed: u64) -> Result<LabelModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LabelModel::new((0..d).map(|_| rng.random::<f64>()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn labeled(states: &[usize], labels: &[u8]) -> Trajectory {
        Trajectory::new(states.to_vec(), Some(labels.to_vec())).unwrap()
    }

    fn half_half(p: (f64, f64)) -> Scenario {
        let k = TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        Scenario::new(k, LabelModel::new(vec![p.0, p.1]).unwrap()).unwrap()
    }

    #[test]
    fn true_risk_examples() {
        let sc = half_half((0.1, 0.9));
        assert_abs_diff_eq!(true_risk_exact(&sc, 2).unwrap(), 0.1, epsilon = 1e-15);
        let ones = half_half((1.0, 1.0));
        assert_eq!(true_risk_exact(&ones, 1).unwrap(), 0.0);
        let coin = half_half((0.5, 0.5));
        for theta in 1..=2 {
            assert_abs_diff_eq!(true_risk_exact(&coin, theta).unwrap(), 0.5, epsilon = 1e-15);
        }
        assert!(true_risk_exact(&coin, 3).is_err());
    }

    #[test]
    fn empirical_risk_examples() {
        assert_eq!(empirical_risk(&labeled(&[0, 1], &[0, 1]), 2).unwrap(), 0.0);
        assert_eq!(empirical_risk(&labeled(&[0, 1], &[1, 0]), 2).unwrap(), 1.0);
        assert_eq!(empirical_risk(&labeled(&[0, 0, 1, 1], &[0, 1, 1, 1]), 2).unwrap(), 0.25);
        let bare = Trajectory::new(vec![0, 1], None).unwrap();
        assert_eq!(empirical_risk(&bare, 1), Err(Error::MissingLabels));
    }

    #[test]
    fn empirical_risks_match_single() {
        let t = labeled(&[0, 2, 1, 1, 2, 0, 2], &[1, 0, 1, 0, 1, 1, 0]);
        let all = empirical_risks(&t, 3).unwrap();
        for theta in 1..=3 {
            assert_abs_diff_eq!(all[theta - 1], empirical_risk(&t, theta).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn erm_examples() {
        let sc = half_half((0.5, 0.5));
        let r = erm_select(&labeled(&[0, 1, 0, 1], &[0, 0, 1, 1]), &sc).unwrap();
        assert_eq!(r.erm_theta, 1);
        let r = erm_select(&labeled(&[0, 0, 1, 1], &[0, 0, 1, 1]), &sc).unwrap();
        assert_eq!(r.erm_theta, 2);
        assert_eq!(r.erm_empirical_risk, 0.0);
    }

    #[test]
    fn pair_kernel_examples() {
        let k = TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let pair = build_pair_kernel(&k, &LabelModel::new(vec![0.2, 0.8]).unwrap()).unwrap();
        let row = pair.row(0);
        for (a, b) in row.iter().zip([0.4, 0.1, 0.1, 0.4]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let zero = build_pair_kernel(&k, &LabelModel::constant(2, 0.0).unwrap()).unwrap();
        for r in 0..4 {
            assert_eq!(zero.get(r, 1), 0.0);
            assert_eq!(zero.get(r, 3), 0.0);
            assert_abs_diff_eq!(zero.get(r, 0), 0.5, epsilon = 1e-15);
        }
        assert!(build_pair_kernel(&k, &LabelModel::linear(3).unwrap()).is_err());
    }

    #[test]
    fn pair_gap_matches_base() {
        for seed in 0..5 {
            let k = random_kernel(3, seed).unwrap();
            let l = random_label_model(3, seed + 100).unwrap();
            let (a, b) = pair_gap_check(&k, &l, 20).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn loss_variance_examples() {
        let sc = half_half((0.1, 0.9));
        assert_abs_diff_eq!(loss_variance_exact(&sc, 2).unwrap(), 0.09, epsilon = 1e-14);
        let perfect = half_half((0.0, 1.0));
        assert_abs_diff_eq!(loss_variance_exact(&perfect, 2).unwrap(), 0.0, epsilon = 1e-15);
        let coin = half_half((0.5, 0.5));
        assert_abs_diff_eq!(loss_variance_exact(&coin, 1).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn linear_labels() {
        let l = LabelModel::linear(5).unwrap();
        assert_abs_diff_eq!(l.prob(0), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(l.prob(4), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(l.prob(2), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn labeled_sampling_is_seeded() {
        let sc = Scenario::new(random_kernel(4, 1).unwrap(), LabelModel::linear(4).unwrap()).unwrap();
        let a = sample_labeled_trajectory(&sc, 500, 9).unwrap();
        let b = sample_labeled_trajectory(&sc, 500, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.as_ref().unwrap().len(), 500);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|j| derive_seed(7, j)).collect();
        let mut u = s.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 100);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
