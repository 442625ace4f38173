//! Union bound over a finite `lambda` grid, the `B(nu, u)` functional,
//! posterior selection and the oracle inequality.

use super::{check_bernstein_lambda, check_gamma, kl_discrete, BoundParams, DiscretePrior};
use crate::error::{Error, Result};
use crate::markov::Distribution;

/// Strictly increasing positive `lambda` values.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::param("lambda grid", "values must be positive"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("lambda grid", "values must be strictly increasing"));
        }
        Ok(Self { values })
    }

    /// `len` geometric points from 1 to `0.99 n / 10`. For `n < 1000/99`
    /// the lower end drops to half the upper end.
    pub fn geometric(n: usize, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyGrid);
        }
        let hi = 0.99 * n as f64 / 10.0;
        if !(hi > 0.0) {
            return Err(Error::param("n", "too small for a lambda grid"));
        }
        let lo = if hi > 1.0 { 1.0 } else { hi / 2.0 };
        if len == 1 {
            return Self::new(vec![hi]);
        }
        let ratio = (hi / lo).ln() / (len - 1) as f64;
        let values = (0..len).map(|i| lo * (ratio * i as f64).exp()).collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMinimum {
    pub value: f64,
    pub lambda: f64,
}

/// `B(nu, u) = min_{lambda in grid} 2 lambda c^2 (1 + u/n) / (n - 10 lambda) + u (KL + ln(L/delta)) / lambda`.
///
/// Ties go to the smaller `lambda`.
pub fn bound_b(kl: f64, u: f64, grid: &LambdaGrid, p: &BoundParams) -> Result<GridMinimum> {
    p.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !(u > 0.0) {
        return Err(Error::param("u", format!("{u} is not positive")));
    }
    let n = p.n_f64();
    let log_term = kl + (grid.len() as f64 / p.delta).ln();
    let mut best: Option<GridMinimum> = None;
    for &lambda in grid.values() {
        check_bernstein_lambda(lambda, p.n)?;
        let value = 2.0 * lambda * p.c * p.c * (1.0 + u / n) / (n - 10.0 * lambda) + u * log_term / lambda;
        if best.is_none_or(|b| value < b.value) {
            best = Some(GridMinimum { value, lambda });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Oracle excess-risk term for the selected posterior.
///
/// `exact = false` gives `2 B(rho, (1+eps)/(gamma-eps))`; `exact = true`
/// keeps the sum `B(rho, 1/gamma) + B(rho, (1+eps)/(gamma-eps))`.
pub fn oracle_bound_rhs(
    kl: f64,
    gamma: f64,
    epsilon: f64,
    grid: &LambdaGrid,
    p: &BoundParams,
    exact: bool,
) -> Result<f64> {
    check_gamma("gamma", gamma)?;
    if !(epsilon >= 0.0) || epsilon >= gamma {
        return Err(Error::EpsilonExceedsGamma { epsilon, gamma });
    }
    let u_slack = (1.0 + epsilon) / (gamma - epsilon);
    let slack = bound_b(kl, u_slack, grid, p)?.value;
    if exact {
        Ok(bound_b(kl, 1.0 / gamma, grid, p)?.value + slack)
    } else {
        Ok(2.0 * slack)
    }
}

/// Inverse temperatures searched for the Gibbs members of the posterior
/// family. `beta = 0` (the prior) is always included.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaGrid {
    values: Vec<f64>,
}

impl BetaGrid {
    pub fn logarithmic(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || len < 2 {
            return Err(Error::param("beta grid", "need 0 < lo < hi and at least two points"));
        }
        let step = (hi / lo).ln() / (len - 1) as f64;
        Ok(Self { values: (0..len).map(|i| lo * (step * i as f64).exp()).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Default for BetaGrid {
    /// 50 points spanning `[1e-2, 1e4]`.
    fn default() -> Self {
        Self::logarithmic(1e-2, 1e4, 50).expect("static grid")
    }
}

/// `rho_beta(i) ∝ mu(i) exp(-beta r(i))`, computed in log space.
pub fn gibbs_posterior(risks: &[f64], mu: &DiscretePrior, beta: f64) -> Result<Distribution> {
    if risks.len() != mu.len() {
        return Err(Error::DimensionMismatch { left: risks.len(), right: mu.len() });
    }
    let logits: Vec<f64> = risks
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let w = mu.weight(i);
            if w > 0.0 {
                w.ln() - beta * r
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    Distribution::from_mass(mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosteriorMember {
    Dirac { index: usize },
    Gibbs { beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChoice {
    pub posterior: Distribution,
    pub member: PosteriorMember,
    /// `E_rho[r] + B(rho, (1 + eps)/gamma_hat)`.
    pub objective: f64,
    pub lambda: f64,
    pub kl: f64,
}

/// Minimizes `E_rho[r] + B(rho, (1+eps)/gamma_hat)` over Dirac masses
/// followed by Gibbs posteriors with `beta` in `{0} ∪ betas`.
///
/// Candidates are scanned in that order and only strict improvements
/// replace the incumbent, so ties resolve to the earlier candidate.
pub fn select_posterior_rho_hat(
    risks: &[f64],
    mu: &DiscretePrior,
    gamma_hat: f64,
    p: &BoundParams,
    grid: &LambdaGrid,
    betas: &BetaGrid,
) -> Result<PosteriorChoice> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if risks.is_empty() || risks.len() != mu.len() {
        return Err(Error::DimensionMismatch { left: risks.len(), right: mu.len() });
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::param("risks", "must be finite"));
    }
    check_gamma("gamma_hat", gamma_hat)?;
    let u = (1.0 + p.epsilon) / gamma_hat;
    let m = risks.len();

    let mut best: Option<PosteriorChoice> = None;
    let mut consider = |posterior: Distribution, member: PosteriorMember| -> Result<()> {
        let kl = kl_discrete(&posterior, mu)?;
        let expected: f64 = posterior.as_slice().iter().zip(risks).map(|(w, r)| w * r).sum();
        let b = bound_b(kl, u, grid, p)?;
        let objective = expected + b.value;
        if best.as_ref().is_none_or(|c| objective < c.objective) {
            best = Some(PosteriorChoice { posterior, member, objective, lambda: b.lambda, kl });
        }
        Ok(())
    };

    for index in 0..m {
        if mu.weight(index) > 0.0 {
            consider(Distribution::dirac(m, index)?, PosteriorMember::Dirac { index })?;
        }
    }
    for beta in std::iter::once(0.0).chain(betas.values().iter().copied()) {
        consider(gibbs_posterior(risks, mu, beta)?, PosteriorMember::Gibbs { beta })?;
    }
    best.ok_or(Error::EmptyGrid)
}
