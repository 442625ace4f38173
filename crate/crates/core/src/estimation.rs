//! Single-trajectory estimators of the pseudo-spectral gap and their
//! confidence widths.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, ChainDiagnostics, Distribution, Trajectory, TransitionMatrix};
use crate::spectral::{pseudo_spectral_gap_with, DEFAULT_K};

/// Floor applied to gap estimates before they are used as divisors.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Truncation `K` of the max over `k`.
    pub k_max: usize,
    /// Additive smoothing added to every transition count.
    pub smoothing: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { k_max: DEFAULT_K, smoothing: 1.0 }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::param("K", "must be at least 1"));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::param("alpha", format!("{} is not a nonnegative number", self.smoothing)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate {
    pub value: f64,
    pub argmax_k: usize,
    pub p_hat: TransitionMatrix,
    pub pi_hat: Distribution,
    pub n: usize,
    pub boundary_hit: bool,
}

/// Inputs of the finite-chain failure probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSpec {
    /// Relative-error target.
    pub epsilon: f64,
    /// Failure probability attached to the estimate, when known.
    pub alpha_prob: Option<f64>,
    /// Universal constant of the concentration result. It has no published
    /// numeric value; confidence levels are relative to the chosen value.
    pub c_ps: f64,
}

impl ConfidenceSpec {
    pub fn new(epsilon: f64, c_ps: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(c_ps > 0.0) {
            return Err(Error::param("c_ps", "must be positive"));
        }
        Ok(Self { epsilon, alpha_prob: None, c_ps })
    }
}

/// Smallest `K` for which the finite-chain confidence statement applies,
/// `ceil(2 / epsilon)`.
pub fn required_truncation(epsilon: f64) -> usize {
    (2.0 / epsilon).ceil() as usize
}

/// Transition counts `N_ij = #{t < n : U_t = i, U_{t+1} = j}`.
pub fn transition_counts(traj: &Trajectory, d: usize) -> Result<DMatrix<f64>> {
    if traj.states.is_empty() {
        return Err(Error::ZeroLength);
    }
    if let Some((position, &state)) = traj.states.iter().enumerate().find(|(_, &s)| s >= d) {
        return Err(Error::StateOutOfRange { position, state, d });
    }
    let mut counts = DMatrix::zeros(d, d);
    for w in traj.states.windows(2) {
        counts[(w[0], w[1])] += 1.0;
    }
    Ok(counts)
}

/// Smoothed plug-in kernel `(N_ij + alpha) / (N_i. + alpha d)` and its
/// stationary distribution.
pub fn empirical_transition(
    traj: &Trajectory,
    d: usize,
    cfg: &EstimatorConfig,
) -> Result<(TransitionMatrix, Distribution)> {
    cfg.validate()?;
    let counts = transition_counts(traj, d)?;
    let alpha = cfg.smoothing;
    let mut p_hat = DMatrix::zeros(d, d);
    for i in 0..d {
        let row_total: f64 = counts.row(i).sum();
        let denom = row_total + alpha * d as f64;
        if denom == 0.0 {
            return Err(Error::DegenerateCounts(i));
        }
        for j in 0..d {
            p_hat[(i, j)] = (counts[(i, j)] + alpha) / denom;
        }
    }
    let p_hat = TransitionMatrix::from_matrix(p_hat)?;
    let pi_hat = stationary_distribution(&p_hat)?;
    Ok((p_hat, pi_hat))
}

/// Plug-in pseudo-spectral gap of the smoothed empirical kernel, with the
/// time reversal taken against the kernel's own stationary distribution.
pub fn estimate_pseudo_spectral_gap(traj: &Trajectory, d: usize, cfg: &EstimatorConfig) -> Result<GapEstimate> {
    let (p_hat, pi_hat) = empirical_transition(traj, d, cfg)?;
    let r = pseudo_spectral_gap_with(&p_hat, &pi_hat, cfg.k_max)?;
    Ok(GapEstimate {
        value: r.value.clamp(GAP_FLOOR, 1.0),
        argmax_k: r.argmax_k,
        p_hat,
        pi_hat,
        n: traj.states.len(),
        boundary_hit: r.boundary_hit,
    })
}

/// Failure probability of the relative-error event for the finite-chain
/// estimator:
///
/// ```text
/// min(1, C_ps d / (eps gamma sqrt(pi_*)) * exp(-n eps^2 gamma^2 pi_* min(gamma, 1/C(P))))
/// ```
pub fn finite_confidence_alpha(
    n: usize,
    gamma: f64,
    spec: &ConfidenceSpec,
    diag: &ChainDiagnostics,
    d: usize,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param("gamma", format!("{gamma} not in (0, 1]")));
    }
    let eps = spec.epsilon;
    let pi_star = diag.pi_star;
    if !(pi_star > 0.0) {
        return Ok(1.0);
    }
    let prefactor = spec.c_ps * d as f64 / (eps * gamma * pi_star.sqrt());
    let rate = eps * eps * gamma * gamma * pi_star * gamma.min(1.0 / diag.c_of_p);
    let log_alpha = prefactor.ln() - n as f64 * rate;
    Ok(log_alpha.exp().min(1.0))
}

/// AR(1) estimator `min(1 / mean(x^2), 1)`.
pub fn ar1_estimate_gap(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::ZeroLength);
    }
    let ms = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    if ms == 0.0 {
        return Err(Error::AllZeroSample);
    }
    Ok((1.0 / ms).min(1.0))
}

/// Radius `24 / gamma^{3/2} * sqrt((9 + 4 ln(1/delta)) / n)` of the AR(1)
/// relative-error guarantee at level `1 - delta`.
pub fn ar1_confidence_epsilon(n: usize, gamma: f64, delta: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param("gamma", format!("{gamma} not in (0, 1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} not in (0, 1)")));
    }
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(24.0 / gamma.powf(1.5) * ((9.0 + 4.0 * (1.0 / delta).ln()) / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{chain_diagnostics, sample_trajectory, validate_kernel};
    use approx::assert_abs_diff_eq;

    fn traj(states: &[usize]) -> Trajectory {
        Trajectory::new(states.to_vec(), None).unwrap()
    }

    #[test]
    fn empirical_transition_examples() {
        let cfg = EstimatorConfig { k_max: 20, smoothing: 1.0 };
        let (p, pi) = empirical_transition(&traj(&[0, 1, 0, 1, 0]), 2, &cfg).unwrap();
        assert_abs_diff_eq!(p.get(0, 0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(0, 1), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1, 0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-14);

        let raw = EstimatorConfig { k_max: 20, smoothing: 0.0 };
        let (p, _) = empirical_transition(&traj(&[0, 0, 0]), 1, &raw).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(empirical_transition(&traj(&[0, 0, 0]), 2, &raw), Err(Error::DegenerateCounts(1)));
        assert!(matches!(
            empirical_transition(&traj(&[0, 3]), 2, &cfg),
            Err(Error::StateOutOfRange { position: 1, state: 3, d: 2 })
        ));
    }

    #[test]
    fn estimator_on_short_path() {
        // P_hat = [[.25,.75],[.75,.25]]; P_hat^2 has second eigenvalue 0.25
        let est = estimate_pseudo_spectral_gap(&traj(&[0, 1, 0, 1, 0]), 2, &EstimatorConfig::default()).unwrap();
        assert_abs_diff_eq!(est.value, 0.75, epsilon = 1e-12);
        assert_eq!(est.argmax_k, 1);
        assert_eq!(est.n, 5);
    }

    #[test]
    fn estimator_on_long_paths() {
        let cfg = EstimatorConfig::default();
        let q = TransitionMatrix::rank_one(&Distribution::new(vec![0.25, 0.75]).unwrap());
        let init = Distribution::uniform(2).unwrap();
        let sym = validate_kernel(&[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        for seed in 0..5 {
            let t = sample_trajectory(&q, 100_000, &init, seed).unwrap();
            let v = estimate_pseudo_spectral_gap(&t, 2, &cfg).unwrap().value;
            assert!((v - 1.0).abs() < 0.05, "rank-one seed {seed}: {v}");
            let t = sample_trajectory(&sym, 100_000, &init, seed).unwrap();
            let v = estimate_pseudo_spectral_gap(&t, 2, &cfg).unwrap().value;
            assert!((v - 0.75).abs() < 0.05, "symmetric seed {seed}: {v}");
        }
    }

    #[test]
    fn confidence_alpha_examples() {
        let p = validate_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let mut diag = chain_diagnostics(&p).unwrap();
        let spec = ConfidenceSpec::new(0.1, 1.0).unwrap();
        assert_eq!(finite_confidence_alpha(0, 0.5, &spec, &diag, 4).unwrap(), 1.0);
        assert_eq!(finite_confidence_alpha(1 << 40, 0.5, &spec, &diag, 4).unwrap(), 0.0);

        diag.pi_star = 0.25;
        diag.c_of_p = 4.0;
        let got = finite_confidence_alpha(1_000_000, 0.5, &spec, &diag, 4).unwrap();
        // 4 / (0.1 * 0.5 * 0.5) * exp(-1e6 * 0.01 * 0.25 * 0.25 * 0.25)
        let expected = 160.0 * (-156.25_f64).exp();
        assert_abs_diff_eq!(got / expected, 1.0, epsilon = 1e-12);
        assert_eq!(required_truncation(0.1), 20);
        assert_eq!(required_truncation(0.05), 40);
    }

    #[test]
    fn ar1_estimator_examples() {
        assert_abs_diff_eq!(ar1_estimate_gap(&[2.0_f64.sqrt(), -(2.0_f64.sqrt())]).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(ar1_estimate_gap(&[0.5_f64.sqrt()]).unwrap(), 1.0);
        assert_eq!(ar1_estimate_gap(&[0.0, 0.0]), Err(Error::AllZeroSample));
        assert_eq!(ar1_estimate_gap(&[]), Err(Error::ZeroLength));
    }

    #[test]
    fn ar1_radius_examples() {
        let r = ar1_confidence_epsilon(1_000_000, 0.64, 0.05).unwrap();
        assert_abs_diff_eq!(r, 46.875 * (20.982_929_094_215_96_f64 / 1e6).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.2147, epsilon = 1e-4);
        let delta = (-2.25_f64).exp();
        let r = ar1_confidence_epsilon(1000, 1.0, delta).unwrap();
        assert_abs_diff_eq!(r, 24.0 * (18.0_f64 / 1000.0).sqrt(), epsilon = 1e-12);
        assert!(ar1_confidence_epsilon(1 << 50, 0.5, 0.05).unwrap() < 1e-5);
    }
}
