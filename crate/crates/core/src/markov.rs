//! Finite-state Markov kernels and the AR(1) process.
//!
//! States are 0-based everywhere in the library. The text formats in
//! [`crate::io`] use 1-based indices and convert at the boundary.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum deviation below which a row is silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;
/// Residual target for the stationary solver, `||piP - pi||_1`.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Singular values of `I - P` below this count toward the unit eigenspace.
const UNIT_EIGENSPACE_TOL: f64 = 1e-9;

/// Row-stochastic `d x d` transition kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Validates a kernel given as rows.
    ///
    /// Rows whose sum deviates from 1 by at most [`RENORMALIZE_TOL`] are
    /// rescaled; larger deviations are rejected.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::EmptyMatrix);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::NotSquare { row, len: r.len(), expected: d });
            }
        }
        let entries = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Self::from_matrix(entries)
    }

    /// Same contract as [`TransitionMatrix::from_rows`] for an existing matrix.
    pub fn from_matrix(mut entries: DMatrix<f64>) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || entries.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if entries.ncols() != d {
            return Err(Error::NotSquare { row: 0, len: entries.ncols(), expected: d });
        }
        for i in 0..d {
            let mut sum = 0.0;
            for j in 0..d {
                let v = entries[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::RowSumViolation { row: i, sum });
            }
            if sum != 1.0 {
                for j in 0..d {
                    entries[(i, j)] /= sum;
                }
            }
        }
        Ok(Self { entries })
    }

    /// Products of stochastic matrices drift by a few ulps, and reversals
    /// of low-mass states by the relative error of pi there; renormalize
    /// without the user-facing tolerance check.
    pub(crate) fn from_product(mut entries: DMatrix<f64>) -> Self {
        let d = entries.nrows();
        for i in 0..d {
            let mut sum = 0.0;
            for j in 0..d {
                let v = entries[(i, j)].max(0.0);
                entries[(i, j)] = v;
                sum += v;
            }
            for j in 0..d {
                entries[(i, j)] /= sum;
            }
        }
        Self { entries }
    }

    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self { entries: DMatrix::identity(d, d) })
    }

    /// Kernel whose every row equals `pi`: an i.i.d. sequence from `pi`.
    pub fn rank_one(pi: &Distribution) -> Self {
        let d = pi.len();
        Self { entries: DMatrix::from_fn(d, d, |_, j| pi[j]) }
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.d()).map(|i| self.row(i)).collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `P^k` by repeated multiplication (`k = 0` gives the identity).
    pub fn power(&self, k: usize) -> Self {
        let d = self.d();
        let mut acc = DMatrix::identity(d, d);
        for _ in 0..k {
            acc = &acc * &self.entries;
        }
        Self::from_product(acc)
    }

    /// Row vector times kernel: `(pi P)_j = sum_i pi_i P(i, j)`.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.d();
        let mut out = vec![0.0; d];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += vi * self.entries[(i, j)];
            }
        }
        out
    }

    /// Largest absolute row-sum deviation from 1.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.d()).map(|i| (self.entries.row(i).sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Probability vector over `[d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {w} at index {i}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        let weights = if sum == 1.0 { weights } else { weights.into_iter().map(|w| w / sum).collect() };
        Ok(Self { weights })
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        Ok(Self { weights: vec![1.0 / d as f64; d] })
    }

    pub fn dirac(d: usize, at: usize) -> Result<Self> {
        if at >= d {
            return Err(Error::StateOutOfRange { position: 0, state: at, d });
        }
        let mut weights = vec![0.0; d];
        weights[at] = 1.0;
        Ok(Self { weights })
    }

    /// Normalizes arbitrary nonnegative mass. Used for solver output.
    pub(crate) fn from_mass(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Numerical(format!("cannot normalize mass {sum}")));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Vec<f64> {
        d.weights
    }
}

/// A sampled path. `labels`, when present, align with `states`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub labels: Option<Vec<u8>>,
    pub seed: u64,
    pub kernel_id: String,
}

impl Trajectory {
    pub fn new(states: Vec<usize>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != states.len() {
                return Err(Error::DimensionMismatch { left: states.len(), right: l.len() });
            }
            if let Some(bad) = l.iter().find(|&&y| y > 1) {
                return Err(Error::Parse(format!("label {bad} is not 0 or 1")));
            }
        }
        Ok(Self { states, labels, seed: 0, kernel_id: String::new() })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// `U_t = a U_{t-1} + zeta_t` with standard normal innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Process {
    a: f64,
}

impl Ar1Process {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(Error::NonStationaryAr(a));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Innovation standard deviation; fixed.
    pub fn noise_sd(&self) -> f64 {
        1.0
    }

    pub fn stationary_variance(&self) -> f64 {
        1.0 / (1.0 - self.a * self.a)
    }

    /// Exact pseudo-spectral gap of the stationary process, `1 - a^2`.
    pub fn pseudo_spectral_gap(&self) -> f64 {
        1.0 - self.a * self.a
    }
}

/// Summary constants of an ergodic kernel used by the confidence widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub pi: Distribution,
    /// Smallest stationary mass.
    pub pi_star: f64,
    /// `max_{i,j} pi(i) / pi(j)`.
    pub p_norm: f64,
    /// `p_norm * min(d, p_norm)`.
    pub c_of_p: f64,
    pub ergodic: bool,
}

/// Outcome of [`mixing_time`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingTime {
    Reached(usize),
    NotReached(usize),
}

impl MixingTime {
    pub fn steps(&self) -> Option<usize> {
        match self {
            MixingTime::Reached(k) => Some(*k),
            MixingTime::NotReached(_) => None,
        }
    }
}

/// Validates a kernel given as rows; see [`TransitionMatrix::from_rows`].
pub fn validate_kernel(entries: &[Vec<f64>]) -> Result<TransitionMatrix> {
    TransitionMatrix::from_rows(entries)
}

/// Dimension of the eigenvalue-1 eigenspace, via the nullity of `I - P`.
pub fn unit_eigenspace_dimension(p: &TransitionMatrix) -> usize {
    let d = p.d();
    let a = DMatrix::identity(d, d) - p.as_matrix();
    let sv = a.singular_values();
    sv.iter().filter(|&&s| s < UNIT_EIGENSPACE_TOL).count().max(1)
}

/// Unique stationary distribution `pi = pi P`.
///
/// Solves `(P^T - I) x = 0` with the last equation replaced by `sum x = 1`,
/// falling back to power iteration on the lazy chain `(I + P)/2` when the
/// solve is singular or inaccurate.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Distribution> {
    let d = p.d();
    if d == 1 {
        return Distribution::new(vec![1.0]);
    }
    let multiplicity = unit_eigenspace_dimension(p);
    if multiplicity > 1 {
        return Err(Error::NonUniqueStationary { multiplicity });
    }

    let mut a = p.as_matrix().transpose() - DMatrix::identity(d, d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(d);
    b[d - 1] = 1.0;

    if let Some(x) = a.lu().solve(&b) {
        if x.iter().all(|v| v.is_finite()) {
            let pi = Distribution::from_mass(x.iter().copied().collect())?;
            if stationarity_residual(p, &pi) <= STATIONARY_TOL {
                return Ok(pi);
            }
            return power_iteration(p, pi.as_slice().to_vec());
        }
    }
    power_iteration(p, vec![1.0 / d as f64; d])
}

fn power_iteration(p: &TransitionMatrix, start: Vec<f64>) -> Result<Distribution> {
    let mut v = start;
    let mut residual = f64::INFINITY;
    for _ in 0..1_000_000 {
        let next = p.left_apply(&v);
        let lazy: Vec<f64> = v.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        let pi = Distribution::from_mass(lazy)?;
        residual = stationarity_residual(p, &pi);
        if residual <= STATIONARY_TOL {
            return Ok(pi);
        }
        v = pi.weights;
    }
    Err(Error::Numerical(format!("power iteration stalled at residual {residual:e}")))
}

/// `||pi P - pi||_1`.
pub fn stationarity_residual(p: &TransitionMatrix, pi: &Distribution) -> f64 {
    p.left_apply(pi.as_slice()).iter().zip(pi.as_slice()).map(|(a, b)| (a - b).abs()).sum()
}

/// Samples `n` states: the first from `init`, then along `p`.
pub fn sample_trajectory(p: &TransitionMatrix, n: usize, init: &Distribution, seed: u64) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    if init.len() != p.d() {
        return Err(Error::DimensionMismatch { left: p.d(), right: init.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(n);
    let mut current = draw_index(init.as_slice(), rng.random());
    states.push(current);
    for _ in 1..n {
        current = draw_row(p, current, rng.random());
        states.push(current);
    }
    Ok(Trajectory { states, labels: None, seed, kernel_id: String::new() })
}

/// Inverse-CDF draw from a probability vector, skipping zero-mass cells.
pub(crate) fn draw_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = j;
        if u < acc {
            return j;
        }
    }
    last_positive
}

pub(crate) fn draw_row(p: &TransitionMatrix, from: usize, u: f64) -> usize {
    let row = p.as_matrix().row(from);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in row.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = j;
        if u < acc {
            return j;
        }
    }
    last_positive
}

/// `R_t = t P + (1 - t) Q`.
pub fn interpolate_kernels(p: &TransitionMatrix, q: &TransitionMatrix, t: f64) -> Result<TransitionMatrix> {
    if p.d() != q.d() {
        return Err(Error::DimensionMismatch { left: p.d(), right: q.d() });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TOutOfRange(t));
    }
    let mixed = p.as_matrix() * t + q.as_matrix() * (1.0 - t);
    TransitionMatrix::from_matrix(mixed)
}

/// The slow benchmark kernel `P` and its i.i.d. counterpart `Q`.
///
/// Rows 1, 2 and 5.. of `P` are uniform; state 3 leaves with probability
/// `p` (to state 1) and state 4 with probability `q` (to state 2). `Q` is
/// rank one with rows equal to the stationary distribution of `P`.
pub fn build_benchmark_kernel(d: usize, p: f64, q: f64) -> Result<(TransitionMatrix, TransitionMatrix)> {
    if d < 4 {
        return Err(Error::DTooSmall(d));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, format!("{v} is not a probability")));
        }
    }
    let uniform = 1.0 / d as f64;
    let mut m = DMatrix::from_element(d, d, uniform);
    for j in 0..d {
        m[(2, j)] = 0.0;
        m[(3, j)] = 0.0;
    }
    m[(2, 0)] = p;
    m[(2, 2)] = 1.0 - p;
    m[(3, 1)] = q;
    m[(3, 3)] = 1.0 - q;
    let big_p = TransitionMatrix::from_matrix(m)?;
    let pi = stationary_distribution(&big_p)?;
    let big_q = TransitionMatrix::rank_one(&pi);
    Ok((big_p, big_q))
}

/// Stationary AR(1) path: `U_1 ~ N(0, 1/(1-a^2))`, then the recursion.
pub fn sample_ar1(process: &Ar1Process, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let z: f64 = rng.sample(StandardNormal);
    let mut u = z * process.stationary_variance().sqrt();
    xs.push(u);
    for _ in 1..n {
        let z: f64 = rng.sample(StandardNormal);
        u = process.a * u + z;
        xs.push(u);
    }
    Ok(xs)
}

/// Total variation distance `(1/2) sum |p_i - q_i|`.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { left: p.len(), right: q.len() });
    }
    Ok(tv_slices(p.as_slice(), q.as_slice()))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).min(1.0)
}

/// `max_u TV(P^k(u, .), pi)`.
pub(crate) fn worst_case_tv(pk: &DMatrix<f64>, pi: &Distribution) -> f64 {
    (0..pk.nrows())
        .map(|u| {
            let row: Vec<f64> = pk.row(u).iter().copied().collect();
            tv_slices(&row, pi.as_slice())
        })
        .fold(0.0, f64::max)
}

/// Default search horizon `10 d^2 ceil(ln d)`, capped at `10^6`.
pub fn default_mixing_horizon(d: usize) -> usize {
    let log_d = (d as f64).ln().ceil().max(1.0) as usize;
    (10 * d * d * log_d).clamp(1, 1_000_000)
}

/// Smallest `k <= k_max` with `max_u TV(P^k(u,.), pi) <= eps`.
///
/// A reducible kernel with several closed classes never mixes and yields
/// `NotReached`.
pub fn mixing_time(p: &TransitionMatrix, eps: f64, k_max: usize) -> Result<MixingTime> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", format!("{eps} not in (0, 1)")));
    }
    // several closed classes: no single pi is approached from every start
    let pi = match stationary_distribution(p) {
        Err(Error::NonUniqueStationary { .. }) => return Ok(MixingTime::NotReached(k_max)),
        other => other?,
    };
    let mut pk = p.as_matrix().clone();
    for k in 1..=k_max {
        if worst_case_tv(&pk, &pi) <= eps {
            return Ok(MixingTime::Reached(k));
        }
        pk = &pk * p.as_matrix();
    }
    Ok(MixingTime::NotReached(k_max))
}

pub fn chain_diagnostics(p: &TransitionMatrix) -> Result<ChainDiagnostics> {
    let pi = stationary_distribution(p)?;
    let pi_star = pi.min();
    let p_norm = if pi_star > 0.0 { pi.max() / pi_star } else { f64::INFINITY };
    let c_of_p = p_norm * p_norm.min(p.d() as f64);
    Ok(ChainDiagnostics { ergodic: pi_star > 0.0, pi, pi_star, p_norm, c_of_p })
}
