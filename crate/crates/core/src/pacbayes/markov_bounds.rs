use super::{check_gamma, BoundFormula, BoundParams, BoundReport};
use crate::error::Result;

/// Bernstein-type bound for a stationary chain with pseudo-spectral gap
/// `gamma`:
///
/// ```text
/// 2 lambda c^2 (1 + 1/(n gamma)) / (n - 10 lambda) + (KL + ln(1/delta)) / (lambda gamma)
/// ```
///
/// Requires `lambda < n/10`. The statement also holds with true and
/// empirical risk interchanged, so the report is marked two-sided.
pub fn bound_markov(p: &BoundParams, gamma: f64, kl: f64) -> Result<BoundReport> {
    p.validate()?;
    check_gamma("gamma", gamma)?;
    let lambda = p.bernstein_lambda()?;
    let n = p.n_f64();
    let variance = 2.0 * lambda * p.c * p.c * (1.0 + 1.0 / (n * gamma)) / (n - 10.0 * lambda);
    let kl_term = (kl + (1.0 / p.delta).ln()) / (lambda * gamma);
    let mut report = BoundReport::new(BoundFormula::Markov, *p, variance, kl_term);
    report.gamma_used = Some(gamma);
    report.two_sided = true;
    Ok(report)
}

/// Empirical counterpart with an estimate `gamma_hat` within relative
/// error `epsilon`:
///
/// ```text
/// 2 lambda c^2 (1 + 1/n^{1-a}) / (n - 10 lambda) + (KL + ln(1/delta)) (1 + epsilon) / (lambda gamma_hat)
/// ```
///
/// Holds with probability `1 - delta - alpha`; `alpha` is attached by the
/// caller via [`BoundReport::with_alpha`]. The report is flagged invalid
/// when `n < gamma_hat^{-1/a}`, the plug-in version of the sample-size
/// assumption.
pub fn bound_markov_empirical(p: &BoundParams, gamma_hat: f64, kl: f64) -> Result<BoundReport> {
    p.validate()?;
    check_gamma("gamma_hat", gamma_hat)?;
    let lambda = p.bernstein_lambda()?;
    let n = p.n_f64();
    let variance = 2.0 * lambda * p.c * p.c * (1.0 + 1.0 / n.powf(1.0 - p.a)) / (n - 10.0 * lambda);
    let kl_term = (kl + (1.0 / p.delta).ln()) * (1.0 + p.epsilon) / (lambda * gamma_hat);
    let mut report = BoundReport::new(BoundFormula::MarkovEmpirical, *p, variance, kl_term);
    report.gamma_used = Some(gamma_hat);
    report.empirical = true;
    report.two_sided = true;
    let needed = gamma_hat.powf(-1.0 / p.a);
    if n < needed {
        report = report.invalid(format!("n = {} below gamma_hat^(-1/a) = {needed:.6e}", p.n));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_abs_diff_eq;

    #[test]
    fn markov_example() {
        let p = BoundParams::new(1000, 0.05).with_lambda(10.0);
        let r = bound_markov(&p, 0.5, 20.0_f64.ln()).unwrap();
        assert_abs_diff_eq!(r.terms.variance, 20.04 / 900.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.terms.variance, 0.022267, epsilon = 1e-6);
        assert_abs_diff_eq!(r.terms.kl, 1.198292, epsilon = 1e-6);
        assert_abs_diff_eq!(r.rhs, 1.22056, epsilon = 1e-5);
        assert!(r.two_sided);
        let swapped = r.clone().interchanged().unwrap();
        assert_eq!(swapped.rhs, r.rhs);
    }

    #[test]
    fn markov_kl_free_limit() {
        let p = BoundParams::new(1000, 1.0 - 1e-15).with_lambda(10.0);
        let r = bound_markov(&p, 0.5, 0.0).unwrap();
        assert!(r.terms.kl < 1e-12);
    }

    #[test]
    fn markov_lambda_too_large() {
        let p = BoundParams::new(50, 0.05).with_lambda(5.0);
        assert!(matches!(bound_markov(&p, 0.5, 1.0), Err(Error::LambdaTooLarge { .. })));
        let p = BoundParams::new(50, 0.05);
        assert!(matches!(bound_markov(&p, 0.5, 1.0), Err(Error::InvalidParameter { name: "lambda", .. })));
    }

    #[test]
    fn empirical_example() {
        let p = BoundParams::new(1000, 0.05).with_lambda(10.0).with_epsilon(0.1).with_a(0.5);
        let r = bound_markov_empirical(&p, 0.5, 20.0_f64.ln()).unwrap();
        assert_abs_diff_eq!(r.terms.variance, 0.022925, epsilon = 1e-6);
        assert_abs_diff_eq!(r.terms.kl, 1.318121, epsilon = 5e-6);
        assert_abs_diff_eq!(r.rhs, 1.341046, epsilon = 5e-6);
        assert!(r.valid && r.empirical);
    }

    #[test]
    fn empirical_reduces_to_markov() {
        let kl = 1.3;
        let base = BoundParams::new(1000, 0.05).with_lambda(10.0).with_epsilon(0.0);
        let m = bound_markov(&base, 1.0, kl).unwrap();
        let e = bound_markov_empirical(&base.with_a(1e-12), 1.0, kl).unwrap();
        // at gamma = 1, 1/(n gamma) = 1/n = lim_{a -> 0} 1/n^{1-a}
        assert_abs_diff_eq!(m.rhs, e.rhs, epsilon = 1e-9);
    }

    #[test]
    fn empirical_unit_gap_kl_term() {
        let p = BoundParams::new(1000, 0.05).with_lambda(10.0);
        let r = bound_markov_empirical(&p, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(r.terms.kl, 1.1 * 20.0_f64.ln() / 10.0, epsilon = 1e-15);
    }

    #[test]
    fn empirical_flags_small_n() {
        let p = BoundParams::new(1000, 0.05).with_lambda(10.0).with_a(0.1);
        let r = bound_markov_empirical(&p, 0.1, 0.0).unwrap();
        assert!(!r.valid);
    }
}
