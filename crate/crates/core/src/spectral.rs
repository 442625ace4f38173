//! Spectral quantities of finite kernels.
//!
//! The pseudo-spectral gap of `P` is
//!
//! ```text
//! gamma_ps = max_{k >= 1} gamma((P*)^k P^k) / k
//! ```
//!
//! where `P*` is the time reversal with respect to the stationary
//! distribution and `gamma(M) = 1 - lambda_2(M)` for the reversible kernel
//! `M`. The supremum is truncated at `k <= K`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::markov::{stationarity_residual, stationary_distribution, Distribution, TransitionMatrix};

/// Default truncation of the max over `k`.
pub const DEFAULT_K: usize = 20;
/// Eigenvalues at or above `1 - UNIT_EIGENVALUE_TOL` are treated as 1.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-9;
const STATIONARY_CHECK_TOL: f64 = 1e-8;
const REVERSIBILITY_TOL: f64 = 1e-8;

/// Gap of a reversible kernel plus the multiplicity warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGap {
    pub gap: f64,
    /// Set when eigenvalue 1 is repeated; `gap` is then 0.
    pub repeated_unit_eigenvalue: bool,
}

/// One multiplicative reversibilization `(P*)^k P^k` and its gap.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversibilizationResult {
    pub k: usize,
    pub kernel: TransitionMatrix,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoGapResult {
    pub value: f64,
    /// Smallest `k` attaining the max.
    pub argmax_k: usize,
    /// `(k, gamma((P*)^k P^k) / k)` for `k = 1..=K`.
    pub per_k: Vec<(usize, f64)>,
    /// The max sits on the truncation boundary `k = K`; a larger `K` may
    /// give a larger value.
    pub boundary_hit: bool,
}

/// `P*(i, j) = pi(j) P(j, i) / pi(i)`.
pub fn time_reversal(p: &TransitionMatrix, pi: &Distribution) -> Result<TransitionMatrix> {
    if pi.len() != p.d() {
        return Err(Error::DimensionMismatch { left: p.d(), right: pi.len() });
    }
    if let Some(i) = pi.as_slice().iter().position(|&w| w <= 0.0) {
        return Err(Error::ZeroStationaryMass(i));
    }
    let residual = stationarity_residual(p, pi);
    if residual > STATIONARY_CHECK_TOL {
        return Err(Error::NotStationary(residual));
    }
    let d = p.d();
    let m = p.as_matrix();
    let reversed = DMatrix::from_fn(d, d, |i, j| pi[j] * m[(j, i)] / pi[i]);
    Ok(TransitionMatrix::from_product(reversed))
}

/// Largest detailed-balance violation `|pi_i M_ij - pi_j M_ji|`.
pub fn detailed_balance_violation(m: &TransitionMatrix, pi: &Distribution) -> f64 {
    let d = m.d();
    let a = m.as_matrix();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in (i + 1)..d {
            worst = worst.max((pi[i] * a[(i, j)] - pi[j] * a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of `D^{1/2} M D^{-1/2}`, re-symmetrized, in descending order.
pub fn symmetrized_spectrum(m: &TransitionMatrix, pi: &Distribution) -> Vec<f64> {
    let d = m.d();
    let a = m.as_matrix();
    let sqrt_pi: Vec<f64> = pi.as_slice().iter().map(|w| w.sqrt()).collect();
    let s = DMatrix::from_fn(d, d, |i, j| sqrt_pi[i] * a[(i, j)] / sqrt_pi[j]);
    let s = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// `1 - lambda_2` for a kernel reversible with respect to `pi`.
///
/// Eigenvalues are clamped to `[0, 1]` before use.
pub fn spectral_gap_reversible(m: &TransitionMatrix, pi: &Distribution) -> Result<SpectralGap> {
    if pi.len() != m.d() {
        return Err(Error::DimensionMismatch { left: m.d(), right: pi.len() });
    }
    if m.d() < 2 {
        return Err(Error::TrivialStateSpace);
    }
    let violation = detailed_balance_violation(m, pi);
    if violation > REVERSIBILITY_TOL {
        return Err(Error::NotReversible(violation));
    }
    Ok(gap_from_spectrum(&symmetrized_spectrum(m, pi)))
}

fn gap_from_spectrum(eig: &[f64]) -> SpectralGap {
    let threshold = 1.0 - UNIT_EIGENVALUE_TOL;
    if eig[1] >= threshold {
        return SpectralGap { gap: 0.0, repeated_unit_eigenvalue: true };
    }
    let lambda2 = eig[1].clamp(0.0, 1.0);
    SpectralGap { gap: 1.0 - lambda2, repeated_unit_eigenvalue: false }
}

/// `(P*)^k P^k` for `k = 1..=k_max`, reusing the running powers.
pub fn reversibilizations(
    p: &TransitionMatrix,
    pi: &Distribution,
    k_max: usize,
) -> Result<Vec<ReversibilizationResult>> {
    if p.d() < 2 {
        return Err(Error::TrivialStateSpace);
    }
    let reversed = time_reversal(p, pi)?;
    let mut pk = p.as_matrix().clone();
    let mut rk = reversed.as_matrix().clone();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k > 1 {
            pk = &pk * p.as_matrix();
            rk = &rk * reversed.as_matrix();
        }
        let kernel = TransitionMatrix::from_product(&rk * &pk);
        let gap = gap_from_spectrum(&symmetrized_spectrum(&kernel, pi)).gap;
        out.push(ReversibilizationResult { k, kernel, gap });
    }
    Ok(out)
}

/// Pseudo-spectral gap truncated at `k <= k_max`, using the unique
/// stationary distribution of `p`.
pub fn pseudo_spectral_gap(p: &TransitionMatrix, k_max: usize) -> Result<PseudoGapResult> {
    if p.d() < 2 {
        return Err(Error::TrivialStateSpace);
    }
    let pi = stationary_distribution(p)?;
    pseudo_spectral_gap_with(p, &pi, k_max)
}

/// As [`pseudo_spectral_gap`] with a caller-supplied stationary `pi`.
pub fn pseudo_spectral_gap_with(p: &TransitionMatrix, pi: &Distribution, k_max: usize) -> Result<PseudoGapResult> {
    if k_max == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    let per_k: Vec<(usize, f64)> =
        reversibilizations(p, pi, k_max)?.into_iter().map(|r| (r.k, r.gap / r.k as f64)).collect();
    let (mut argmax_k, mut value) = per_k[0];
    for &(k, v) in &per_k[1..] {
        if v > value {
            value = v;
            argmax_k = k;
        }
    }
    Ok(PseudoGapResult { value, argmax_k, per_k, boundary_hit: argmax_k == k_max && k_max > 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{build_benchmark_kernel, validate_kernel};
    use approx::assert_abs_diff_eq;

    fn two_state(p: f64) -> TransitionMatrix {
        validate_kernel(&[vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap()
    }

    #[test]
    fn reversal_examples() {
        let p = two_state(0.25);
        let pi = Distribution::uniform(2).unwrap();
        let r = time_reversal(&p, &pi).unwrap();
        assert_abs_diff_eq!(r.as_matrix(), p.as_matrix(), epsilon = 1e-15);

        let ds = validate_kernel(&[vec![0.2, 0.5, 0.3], vec![0.5, 0.1, 0.4], vec![0.3, 0.4, 0.3]]).unwrap();
        let r = time_reversal(&ds, &Distribution::uniform(3).unwrap()).unwrap();
        assert_abs_diff_eq!(r.as_matrix(), &ds.as_matrix().transpose(), epsilon = 1e-15);

        let cycle = validate_kernel(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let r = time_reversal(&cycle, &Distribution::uniform(3).unwrap()).unwrap();
        // 1 -> 3 -> 2 -> 1
        assert_eq!(r.get(0, 2), 1.0);
        assert_eq!(r.get(2, 1), 1.0);
        assert_eq!(r.get(1, 0), 1.0);
    }

    #[test]
    fn reversal_errors() {
        let p = validate_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let uniform = Distribution::uniform(2).unwrap();
        assert!(matches!(time_reversal(&p, &uniform), Err(Error::NotStationary(_))));
        let dirac = Distribution::dirac(2, 0).unwrap();
        assert_eq!(time_reversal(&p, &dirac), Err(Error::ZeroStationaryMass(1)));
    }

    #[test]
    fn gap_examples() {
        let u = Distribution::uniform(2).unwrap();
        let g = spectral_gap_reversible(&two_state(0.25), &u).unwrap();
        assert_abs_diff_eq!(g.gap, 0.5, epsilon = 1e-12);
        let g = spectral_gap_reversible(&two_state(0.5), &u).unwrap();
        assert_abs_diff_eq!(g.gap, 1.0, epsilon = 1e-12);

        let pi = Distribution::new(vec![0.1, 0.6, 0.3]).unwrap();
        let q = TransitionMatrix::rank_one(&pi);
        assert_abs_diff_eq!(spectral_gap_reversible(&q, &pi).unwrap().gap, 1.0, epsilon = 1e-12);

        let id = TransitionMatrix::identity(3).unwrap();
        let g = spectral_gap_reversible(&id, &Distribution::uniform(3).unwrap()).unwrap();
        assert!(g.repeated_unit_eigenvalue);
        assert_eq!(g.gap, 0.0);
    }

    #[test]
    fn gap_rejects_nonreversible() {
        let cycle = validate_kernel(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let r = spectral_gap_reversible(&cycle, &Distribution::uniform(3).unwrap());
        assert!(matches!(r, Err(Error::NotReversible(_))));
    }

    #[test]
    fn pseudo_gap_examples() {
        let r = pseudo_spectral_gap(&two_state(0.25), 20).unwrap();
        assert_abs_diff_eq!(r.value, 0.75, epsilon = 1e-10);
        assert_eq!(r.argmax_k, 1);
        assert_eq!(r.per_k.len(), 20);
        for (k, v) in &r.per_k {
            let exact = (1.0 - 0.5_f64.powi(2 * *k as i32)) / *k as f64;
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-10);
        }

        let q = TransitionMatrix::rank_one(&Distribution::new(vec![0.25, 0.75]).unwrap());
        assert_abs_diff_eq!(pseudo_spectral_gap(&q, 20).unwrap().value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn benchmark_pseudo_gap_regression() {
        // Pinned: the maximum sits at k = 7, slightly above 0.01.
        let (p, q) = build_benchmark_kernel(4, 0.01, 0.001).unwrap();
        let r = pseudo_spectral_gap(&p, 20).unwrap();
        assert_abs_diff_eq!(r.value, 0.010174722254538, epsilon = 1e-12);
        assert_eq!(r.argmax_k, 7);
        assert_abs_diff_eq!(r.per_k[0].1, 0.008159595038014, epsilon = 1e-12);
        assert_abs_diff_eq!(pseudo_spectral_gap(&q, 20).unwrap().value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn single_state_is_rejected() {
        let one = TransitionMatrix::identity(1).unwrap();
        assert_eq!(pseudo_spectral_gap(&one, 5), Err(Error::TrivialStateSpace));
    }

    #[test]
    fn periodic_chain_gap_is_zero_at_k1() {
        let cycle = validate_kernel(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let r = pseudo_spectral_gap(&cycle, 3).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
