//! Closed-form bounds for empirical risk minimization over a finite
//! parameter set.

use super::{check_gamma, BoundFormula, BoundParams, BoundReport, DiscretePrior};
use crate::error::{Error, Result};

fn log_term(p: &BoundParams, m: usize, prior: Option<(&DiscretePrior, usize)>) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("m", "parameter set is empty"));
    }
    match prior {
        None => Ok((m as f64 / p.delta).ln()),
        Some((mu, selected)) => {
            if mu.len() != m {
                return Err(Error::DimensionMismatch { left: mu.len(), right: m });
            }
            if selected >= m {
                return Err(Error::param("selected", format!("{selected} out of range for M = {m}")));
            }
            let w = mu.weight(selected);
            if w <= 0.0 {
                return Err(Error::SupportViolation(selected));
            }
            Ok(-(w * p.delta).ln())
        }
    }
}

/// Objective minimized over `lambda` before the closed form is taken:
///
/// ```text
/// 2 (1 + eps) lambda c^2 (1 + 1/(n gamma)) / n + log_term / (lambda gamma)
/// ```
pub fn finite_erm_objective(p: &BoundParams, gamma: f64, log_term: f64, lambda: f64) -> f64 {
    let n = p.n_f64();
    2.0 * (1.0 + p.epsilon) * lambda * p.c * p.c * (1.0 + 1.0 / (n * gamma)) / n + log_term / (lambda * gamma)
}

/// Minimizer of [`finite_erm_objective`].
pub fn finite_erm_lambda_opt(p: &BoundParams, gamma: f64, log_term: f64) -> f64 {
    let n = p.n_f64();
    (n * log_term / (2.0 * (1.0 + p.epsilon) * p.c * p.c * gamma * (1.0 + 1.0 / (gamma * n)))).sqrt()
}

/// ERM bound with known gap:
///
/// ```text
/// sqrt(8 (1 + eps) c^2 log(M/delta) / (gamma n) * (1 + 1/(gamma n)))
/// ```
///
/// With `prior = Some((mu, theta_hat))`, `log(M/delta)` becomes
/// `log(1/(mu(theta_hat) delta))`. When the sample-size condition
/// `n > 50 (1 + eps) log(M/delta) / (eps^2 c^2 gamma (1 + 1/(gamma n)))`
/// fails the value is still returned, flagged invalid.
pub fn bound_finite_erm(
    p: &BoundParams,
    gamma: f64,
    m: usize,
    prior: Option<(&DiscretePrior, usize)>,
) -> Result<BoundReport> {
    p.validate()?;
    check_gamma("gamma", gamma)?;
    let lt = log_term(p, m, prior)?;
    let n = p.n_f64();
    let inflation = 1.0 + 1.0 / (gamma * n);
    let increment = (8.0 * (1.0 + p.epsilon) * p.c * p.c * lt / (gamma * n) * inflation).sqrt();
    let lambda = finite_erm_lambda_opt(p, gamma, lt);

    // both halves of the objective coincide at the optimum
    let mut report = BoundReport::new(BoundFormula::FiniteErm, *p, increment / 2.0, increment / 2.0);
    report.lambda = Some(lambda);
    report.gamma_used = Some(gamma);
    report.params.lambda = Some(lambda);

    let needed = if p.epsilon > 0.0 {
        50.0 * (1.0 + p.epsilon) * lt / (p.epsilon * p.epsilon * p.c * p.c * gamma * inflation)
    } else {
        f64::INFINITY
    };
    if !(n > needed) {
        let reason = Error::SampleSizeConditionViolated(format!("n = {} needs n > {needed:.6e}", p.n));
        report = report.invalid(reason.to_string());
    }
    Ok(report)
}

/// ERM bound with an estimated gap:
///
/// ```text
/// sqrt(8 c^2 log(M/delta) / (gamma_hat n) * (1 + eps)^2 * (1 + 1/n^{1-a}))
/// ```
///
/// Flagged invalid when `n < gamma_hat^{-1/a}`. The extra failure
/// probability `alpha` is attached by the caller.
pub fn bound_finite_erm_empirical(p: &BoundParams, gamma_hat: f64, m: usize) -> Result<BoundReport> {
    p.validate()?;
    check_gamma("gamma_hat", gamma_hat)?;
    let lt = log_term(p, m, None)?;
    let n = p.n_f64();
    let increment =
        (8.0 * p.c * p.c * lt / (gamma_hat * n) * (1.0 + p.epsilon).powi(2) * (1.0 + 1.0 / n.powf(1.0 - p.a))).sqrt();
    let mut report = BoundReport::new(BoundFormula::FiniteErmEmpirical, *p, increment / 2.0, increment / 2.0);
    report.lambda = None;
    report.gamma_used = Some(gamma_hat);
    report.empirical = true;
    let needed = gamma_hat.powf(-1.0 / p.a);
    if n < needed {
        report = report.invalid(format!("n = {} below gamma_hat^(-1/a) = {needed:.6e}", p.n));
    }
    Ok(report)
}
