//! Hoeffding-type bounds under phi-mixing and user-supplied Rio
//! coefficients.

use serde::{Deserialize, Serialize};

use super::{check_gamma, BoundFormula, BoundParams, BoundReport};
use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, worst_case_tv, TransitionMatrix};

/// `phi(k) = max_u TV(P^k(u, .), pi)` for `k = 1..=k_max`.
pub fn phi_coefficients_exact(p: &TransitionMatrix, k_max: usize) -> Result<Vec<f64>> {
    let pi = stationary_distribution(p)?;
    let step = p.as_matrix();
    let mut pk = step.clone();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k > 1 {
            pk = &pk * step;
        }
        out.push(worst_case_tv(&pk, &pi));
    }
    Ok(out)
}

/// `phi(k)` for `k >= 1`; indices past the end reuse the last value,
/// which is an upper bound for a nonincreasing sequence.
fn phi_at(phi: &[f64], k: usize) -> f64 {
    match phi.len() {
        0 => 0.0,
        len => phi[(k - 1).min(len - 1)],
    }
}

fn check_phi(phi: &[f64]) -> Result<()> {
    if phi.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::param("phi", "coefficients must lie in [0, 1]"));
    }
    if phi.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        return Err(Error::param("phi", "coefficients must be nonincreasing"));
    }
    Ok(())
}

/// `b(pi_*) = 1 / (ln(1/pi_*) + 2 ln 2 + 1)`.
pub fn b_of_pi_star(pi_star: f64) -> Result<f64> {
    if !(pi_star > 0.0 && pi_star <= 1.0) {
        return Err(Error::param("pi_star", format!("{pi_star} not in (0, 1]")));
    }
    Ok(1.0 / ((1.0 / pi_star).ln() + 2.0 * 2f64.ln() + 1.0))
}

/// `rho = 2^{-b(pi_*) gamma}`.
pub fn phi_geometric_ratio(gamma: f64, pi_star: f64) -> Result<f64> {
    check_gamma("gamma", gamma)?;
    Ok((-b_of_pi_star(pi_star)? * gamma * 2f64.ln()).exp())
}

/// `(1 - rho^{n+1}) / (1 - rho)` without cancellation for `rho` near 1.
fn geometric_sum(gamma: f64, pi_star: f64, n: usize) -> Result<f64> {
    check_gamma("gamma", gamma)?;
    let log_rho = -b_of_pi_star(pi_star)? * gamma * 2f64.ln();
    Ok((-(log_rho * (n as f64 + 1.0)).exp_m1()) / (-log_rho.exp_m1()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiSource {
    /// `phi(1), phi(2), ...` computed from the kernel.
    Exact(Vec<f64>),
    /// Geometric bound from the pseudo-spectral gap.
    Gap { gamma: f64, pi_star: f64 },
}

/// Variance constant `Phi` with `Delta_t = c`.
///
/// Exact mode: `c^2 (1 + 2 sum_{k=1}^n phi(k))^2`.
/// Gap mode: `c^2 ((1 - rho^{n+1}) / (1 - rho))^2`.
pub fn phi_sum_constant(p: &BoundParams, source: &PhiSource) -> Result<f64> {
    p.validate()?;
    let c2 = p.c * p.c;
    match source {
        PhiSource::Exact(phi) => {
            check_phi(phi)?;
            let s: f64 = (1..=p.n).map(|k| phi_at(phi, k)).sum();
            Ok(c2 * (1.0 + 2.0 * s).powi(2))
        }
        PhiSource::Gap { gamma, pi_star } => Ok(c2 * geometric_sum(*gamma, *pi_star, p.n)?.powi(2)),
    }
}

/// `lambda c^2 / (8n) ((1 - rho^{n+1}) / (1 - rho))^2 + (KL + ln(1/delta)) / lambda`.
pub fn phi_mixing_bound(p: &BoundParams, gamma: f64, pi_star: f64, kl: f64) -> Result<BoundReport> {
    p.validate()?;
    let lambda = p.require_lambda()?;
    let phi = phi_sum_constant(p, &PhiSource::Gap { gamma, pi_star })?;
    let variance = lambda * phi / (8.0 * p.n_f64());
    let kl_term = (kl + (1.0 / p.delta).ln()) / lambda;
    let mut report = BoundReport::new(BoundFormula::PhiMixing, *p, variance, kl_term);
    report.gamma_used = Some(gamma);
    Ok(report)
}

/// Dependence coefficients for [`bound_rio_general`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MixingInputs {
    /// Per-step diameters `Delta_t`, `t = 1..=n`.
    pub deltas: Vec<f64>,
    /// `gamma_{t,m}` indexed `[t-1][m-1]`; only `m > t` is read.
    pub gamma_matrix: Option<Vec<Vec<f64>>>,
    /// `phi(1), phi(2), ...`; used as `gamma_{t,m} = Delta_t phi(m - t)`.
    pub phi: Option<Vec<f64>>,
}

impl MixingInputs {
    pub fn with_phi(deltas: Vec<f64>, phi: Vec<f64>) -> Self {
        Self { deltas, gamma_matrix: None, phi: Some(phi) }
    }

    pub fn with_gamma_matrix(deltas: Vec<f64>, gamma_matrix: Vec<Vec<f64>>) -> Self {
        Self { deltas, gamma_matrix: Some(gamma_matrix), phi: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(Error::ZeroLength);
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::param("deltas", "must be positive"));
        }
        match (&self.gamma_matrix, &self.phi) {
            (None, None) => Err(Error::MissingMixingInputs),
            (Some(g), _) => {
                let n = self.deltas.len();
                if g.len() != n {
                    return Err(Error::DimensionMismatch { left: g.len(), right: n });
                }
                for row in g {
                    if row.len() != n {
                        return Err(Error::DimensionMismatch { left: row.len(), right: n });
                    }
                    if row.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                        return Err(Error::param("gamma_matrix", "entries must be nonnegative"));
                    }
                }
                Ok(())
            }
            (None, Some(phi)) => check_phi(phi),
        }
    }

    /// `C^2 = (1/n) sum_t (Delta_t + 2 sum_{m>t} gamma_{t,m})^2`. The
    /// coefficient matrix takes precedence over `phi` when both are set.
    pub fn constant(&self) -> Result<f64> {
        self.validate()?;
        let n = self.deltas.len();
        let total: f64 = (0..n)
            .map(|t| {
                let tail: f64 = match (&self.gamma_matrix, &self.phi) {
                    (Some(g), _) => g[t][t + 1..].iter().sum(),
                    (None, Some(phi)) => (1..n - t).map(|lag| self.deltas[t] * phi_at(phi, lag)).sum(),
                    (None, None) => unreachable!("validated"),
                };
                (self.deltas[t] + 2.0 * tail).powi(2)
            })
            .sum();
        Ok(total / n as f64)
    }
}

/// `lambda C^2 / (8n) + (KL + ln(1/delta)) / lambda`.
pub fn bound_rio_general(p: &BoundParams, mix: &MixingInputs, kl: f64) -> Result<BoundReport> {
    p.validate()?;
    let lambda = p.require_lambda()?;
    if mix.deltas.len() != p.n {
        return Err(Error::DimensionMismatch { left: mix.deltas.len(), right: p.n });
    }
    let c2 = mix.constant()?;
    let variance = lambda * c2 / (8.0 * p.n_f64());
    let kl_term = (kl + (1.0 / p.delta).ln()) / lambda;
    Ok(BoundReport::new(BoundFormula::Rio, *p, variance, kl_term))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::Distribution;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn two_state(p: f64) -> TransitionMatrix {
        TransitionMatrix::from_rows(&[vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap()
    }

    #[test]
    fn phi_two_state() {
        let phi = phi_coefficients_exact(&two_state(0.25), 6).unwrap();
        assert_abs_diff_eq!(phi[1], 0.125, epsilon = 1e-14);
        for (k, v) in phi.iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.5f64.powi(k as i32 + 1) / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn phi_rank_one_is_zero() {
        let pi = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let phi = phi_coefficients_exact(&TransitionMatrix::rank_one(&pi), 5).unwrap();
        assert!(phi.iter().all(|v| v.abs() < 1e-14));
        let p = BoundParams::new(50, 0.05).with_c(2.0);
        assert_abs_diff_eq!(phi_sum_constant(&p, &PhiSource::Exact(phi)).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn phi_reducible_errors() {
        let id = TransitionMatrix::identity(2).unwrap();
        assert!(matches!(phi_coefficients_exact(&id, 3), Err(Error::NonUniqueStationary { .. })));
    }

    #[test]
    fn b_and_rho_examples() {
        assert_abs_diff_eq!(b_of_pi_star(0.25).unwrap(), 0.26507, epsilon = 1e-5);
        assert_abs_diff_eq!(phi_geometric_ratio(0.75, 0.25).unwrap(), 0.87128, epsilon = 1e-5);
        assert!(b_of_pi_star(0.0).is_err());
    }

    #[test]
    fn phi_mixing_example() {
        let p = BoundParams::new(1000, 0.05).with_lambda(10.0);
        let r = phi_mixing_bound(&p, 0.75, 0.25, 20f64.ln()).unwrap();
        let rho = 0.5f64.powf(b_of_pi_star(0.25).unwrap() * 0.75);
        let ratio = (1.0 - rho.powi(1001)) / (1.0 - rho);
        assert_relative_eq!(r.terms.variance, 10.0 * ratio * ratio / 8000.0, max_relative = 1e-12);
        assert_abs_diff_eq!(r.terms.kl, 0.59915, epsilon = 1e-5);
        assert_abs_diff_eq!(r.rhs, r.terms.total(), epsilon = 1e-15);
    }

    #[test]
    fn phi_mixing_fast_limit() {
        let p = BoundParams::new(1000, 0.05).with_lambda(10.0);
        let r = phi_mixing_bound(&p, 1e6, 0.25, 0.0).unwrap();
        assert_relative_eq!(r.terms.variance, 10.0 / 8000.0, max_relative = 1e-9);
    }

    #[test]
    fn exact_phi_constant_below_gap_constant() {
        let p = BoundParams::new(200, 0.05);
        for q in [0.05, 0.25, 0.4] {
            let k = two_state(q);
            let phi = phi_coefficients_exact(&k, 200).unwrap();
            let gamma = crate::spectral::pseudo_spectral_gap(&k, 20).unwrap().value;
            let exact = phi_sum_constant(&p, &PhiSource::Exact(phi)).unwrap();
            let gap = phi_sum_constant(&p, &PhiSource::Gap { gamma, pi_star: 0.5 }).unwrap();
            assert!(exact <= gap, "q {q}: {exact} > {gap}");
        }
    }

    #[test]
    fn rio_independent_case() {
        let p = BoundParams::new(4, 0.05).with_lambda(1.0);
        let zero = MixingInputs::with_gamma_matrix(vec![1.0; 4], vec![vec![0.0; 4]; 4]);
        assert_abs_diff_eq!(zero.constant().unwrap(), 1.0, epsilon = 1e-15);
        let rank_one = MixingInputs::with_phi(vec![1.0; 4], vec![0.0; 3]);
        let a = bound_rio_general(&p, &zero, 0.3).unwrap();
        let b = bound_rio_general(&p, &rank_one, 0.3).unwrap();
        assert_eq!(a.rhs, b.rhs);
        assert_abs_diff_eq!(a.terms.variance, 1.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn rio_two_state_phi() {
        let phi = phi_coefficients_exact(&two_state(0.25), 4).unwrap();
        let mix = MixingInputs::with_phi(vec![1.0; 4], phi);
        assert_abs_diff_eq!(mix.constant().unwrap(), 9.828125 / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn rio_missing_inputs() {
        let p = BoundParams::new(2, 0.05).with_lambda(1.0);
        let mix = MixingInputs { deltas: vec![1.0; 2], ..Default::default() };
        assert_eq!(bound_rio_general(&p, &mix, 0.0), Err(Error::MissingMixingInputs));
    }
}
