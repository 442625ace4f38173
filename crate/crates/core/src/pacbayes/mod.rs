//! PAC-Bayes bound calculators for Markov-chain data.
//!
//! Every calculator returns a [`BoundReport`] whose `rhs` is the sum of its
//! term decomposition. Calculators do not know the empirical risk; the
//! report starts with a zero empirical-risk term and
//! [`BoundReport::with_empirical_risk`] adds it.

mod finite;
mod grid;
mod markov_bounds;
mod mixing;

pub use finite::{bound_finite_erm, bound_finite_erm_empirical, finite_erm_lambda_opt, finite_erm_objective};
pub use grid::{
    bound_b, gibbs_posterior, oracle_bound_rhs, select_posterior_rho_hat, BetaGrid, GridMinimum, LambdaGrid,
    PosteriorChoice, PosteriorMember,
};
pub use markov_bounds::{bound_markov, bound_markov_empirical};
pub use mixing::{
    b_of_pi_star, bound_rio_general, phi_coefficients_exact, phi_geometric_ratio, phi_mixing_bound, phi_sum_constant,
    MixingInputs, PhiSource,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::Distribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Sample length.
    pub n: usize,
    /// Loss cap.
    pub c: f64,
    /// Failure probability.
    pub delta: f64,
    pub lambda: Option<f64>,
    /// Relative-error allowance of the gap estimate.
    pub epsilon: f64,
    /// Exponent in the assumption `gamma_ps >= n^{-a}`.
    pub a: f64,
}

impl BoundParams {
    /// `c = 1`, `epsilon = a = 0.1`, no `lambda`.
    pub fn new(n: usize, delta: f64) -> Self {
        Self { n, c: 1.0, delta, lambda: None, epsilon: 0.1, a: 0.1 }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", format!("{} not in (0, 1)", self.delta)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param("c", format!("{} is not positive", self.c)));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::param("lambda", format!("{l} is not positive")));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("{} is negative", self.epsilon)));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::param("a", format!("{} not in (0, 1)", self.a)));
        }
        Ok(())
    }

    pub(crate) fn n_f64(&self) -> f64 {
        self.n as f64
    }

    pub(crate) fn require_lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| Error::param("lambda", "required by this bound"))
    }

    /// `lambda`, checked against `lambda < n / 10`.
    pub(crate) fn bernstein_lambda(&self) -> Result<f64> {
        let lambda = self.require_lambda()?;
        check_bernstein_lambda(lambda, self.n)?;
        Ok(lambda)
    }
}

pub(crate) fn check_bernstein_lambda(lambda: f64, n: usize) -> Result<()> {
    let limit = n as f64 / 10.0;
    if lambda >= limit {
        return Err(Error::LambdaTooLarge { lambda, limit });
    }
    Ok(())
}

pub(crate) fn check_gamma(name: &'static str, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(name, format!("{gamma} is not positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundFormula {
    Markov,
    MarkovEmpirical,
    FiniteErm,
    FiniteErmEmpirical,
    PhiMixing,
    Rio,
}

impl BoundFormula {
    pub fn name(&self) -> &'static str {
        match self {
            BoundFormula::Markov => "markov",
            BoundFormula::MarkovEmpirical => "markov-empirical",
            BoundFormula::FiniteErm => "finite-erm",
            BoundFormula::FiniteErmEmpirical => "finite-erm-empirical",
            BoundFormula::PhiMixing => "phi-mixing",
            BoundFormula::Rio => "rio",
        }
    }
}

/// Which side of the deviation the bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `E_rho[R] <= E_rho[r] + increment`.
    TrueRiskAbove,
    /// `E_rho[r] <= E_rho[R] + increment`, the interchanged statement.
    EmpiricalRiskAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundTerms {
    pub empirical_risk: f64,
    pub variance: f64,
    pub kl: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.empirical_risk + self.variance + self.kl
    }
}

/// One evaluated bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub formula: BoundFormula,
    pub rhs: f64,
    pub terms: BoundTerms,
    pub params: BoundParams,
    /// `lambda` the terms were evaluated at.
    pub lambda: Option<f64>,
    pub gamma_used: Option<f64>,
    /// Extra failure probability of the gap estimate, reported next to
    /// `delta` and never merged into it.
    pub alpha_extra: Option<f64>,
    pub empirical: bool,
    pub direction: Direction,
    /// Whether the interchanged statement holds with the same increment.
    pub two_sided: bool,
    pub valid: bool,
    pub reason: Option<String>,
}

impl BoundReport {
    pub(crate) fn new(formula: BoundFormula, params: BoundParams, variance: f64, kl: f64) -> Self {
        let terms = BoundTerms { empirical_risk: 0.0, variance, kl };
        Self {
            formula,
            rhs: terms.total(),
            terms,
            params,
            lambda: params.lambda,
            gamma_used: None,
            alpha_extra: None,
            empirical: false,
            direction: Direction::TrueRiskAbove,
            two_sided: false,
            valid: true,
            reason: None,
        }
    }

    pub(crate) fn invalid(mut self, reason: String) -> Self {
        self.valid = false;
        self.reason = Some(reason);
        self
    }

    /// Complexity part of the bound, `rhs` minus the empirical risk.
    pub fn increment(&self) -> f64 {
        self.terms.variance + self.terms.kl
    }

    pub fn with_empirical_risk(mut self, risk: f64) -> Self {
        self.terms.empirical_risk = risk;
        self.rhs = self.terms.total();
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha_extra = Some(alpha);
        self
    }

    /// The interchanged statement; only available for two-sided bounds.
    pub fn interchanged(mut self) -> Result<Self> {
        if !self.two_sided {
            return Err(Error::param("direction", format!("{} has no interchanged form", self.formula.name())));
        }
        self.direction = Direction::EmpiricalRiskAbove;
        Ok(self)
    }

    /// Total failure probability `delta + alpha`.
    pub fn failure_probability(&self) -> f64 {
        self.params.delta + self.alpha_extra.unwrap_or(0.0)
    }

    pub fn record(&self) -> BoundRecord {
        BoundRecord {
            formula: self.formula.name().to_string(),
            rhs: self.rhs,
            term_emp: self.terms.empirical_risk,
            term_var: self.terms.variance,
            term_kl: self.terms.kl,
            lambda: self.lambda,
            gamma_used: self.gamma_used,
            delta: self.params.delta,
            alpha_extra: self.alpha_extra,
            n: self.params.n,
            c: self.params.c,
            epsilon: self.params.epsilon,
            a: self.params.a,
            direction: self.direction,
            two_sided: self.two_sided,
            valid: self.valid,
            reason: self.reason.clone(),
        }
    }
}

/// Flat key-value form of a [`BoundReport`] with stable field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub formula: String,
    pub rhs: f64,
    pub term_emp: f64,
    pub term_var: f64,
    pub term_kl: f64,
    pub lambda: Option<f64>,
    pub gamma_used: Option<f64>,
    pub delta: f64,
    pub alpha_extra: Option<f64>,
    pub n: usize,
    pub c: f64,
    pub epsilon: f64,
    pub a: f64,
    pub direction: Direction,
    pub two_sided: bool,
    pub valid: bool,
    pub reason: Option<String>,
}

/// Prior over a finite parameter set `[M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePrior {
    weights: Distribution,
}

impl DiscretePrior {
    pub fn new(weights: Distribution) -> Self {
        Self { weights }
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Ok(Self { weights: Distribution::uniform(m)? })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn as_distribution(&self) -> &Distribution {
        &self.weights
    }
}

/// `KL(rho || mu) = sum rho_i ln(rho_i / mu_i)` with `0 ln 0 = 0`.
pub fn kl_discrete(rho: &Distribution, mu: &DiscretePrior) -> Result<f64> {
    if rho.len() != mu.len() {
        return Err(Error::DimensionMismatch { left: rho.len(), right: mu.len() });
    }
    let mut kl = 0.0;
    for (i, (&r, &m)) in rho.as_slice().iter().zip(mu.weights.as_slice()).enumerate() {
        if r == 0.0 {
            continue;
        }
        if m == 0.0 {
            return Err(Error::SupportViolation(i));
        }
        kl += r * (r / m).ln();
    }
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_examples() {
        let mu = DiscretePrior::new(Distribution::new(vec![0.25, 0.75]).unwrap());
        assert_eq!(kl_discrete(mu.as_distribution(), &mu).unwrap(), 0.0);
        let rho = Distribution::uniform(2).unwrap();
        let expected = 0.5 * 2.0_f64.ln() + 0.5 * (2.0_f64 / 3.0).ln();
        assert_abs_diff_eq!(kl_discrete(&rho, &mu).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(kl_discrete(&rho, &mu).unwrap(), 0.14384, epsilon = 1e-5);

        let uniform = DiscretePrior::uniform(20).unwrap();
        let dirac = Distribution::dirac(20, 7).unwrap();
        assert_abs_diff_eq!(kl_discrete(&dirac, &uniform).unwrap(), 20.0_f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn kl_support_violation() {
        let mu = DiscretePrior::new(Distribution::dirac(3, 0).unwrap());
        let rho = Distribution::uniform(3).unwrap();
        assert_eq!(kl_discrete(&rho, &mu), Err(Error::SupportViolation(1)));
    }

    #[test]
    fn params_validation() {
        assert!(BoundParams::new(100, 0.05).validate().is_ok());
        assert!(BoundParams::new(100, 1.0).validate().is_err());
        assert!(BoundParams::new(0, 0.05).validate().is_err());
        assert!(BoundParams::new(100, 0.05).with_c(0.0).validate().is_err());
        assert!(BoundParams::new(100, 0.05).with_a(1.0).validate().is_err());
        assert!(BoundParams::new(100, 0.05).with_lambda(-1.0).validate().is_err());
    }

    #[test]
    fn record_uses_stable_names() {
        let p = BoundParams::new(1000, 0.05).with_lambda(10.0);
        let r = bound_markov(&p, 0.5, 1.0).unwrap().with_empirical_risk(0.1);
        let json = serde_json::to_value(r.record()).unwrap();
        for key in ["rhs", "term_var", "term_kl", "lambda", "gamma_used", "delta", "alpha_extra", "valid", "reason"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_abs_diff_eq!(json["rhs"].as_f64().unwrap(), r.terms.total(), epsilon = 1e-15);
    }
}
