use statrs::function::erf::erfc;

use crate::error::{FbsdeError, Result};

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes price and delta of a European call on an asset paying a
/// continuous dividend yield.
///
/// The hedge component of the matching FBSDE at time zero is
/// `sigma * s0 * delta`.
pub fn bs_closed_form(s0: f64, strike: f64, rate: f64, dividend: f64, sigma: f64, maturity: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) || !(maturity > 0.0) {
        return Err(FbsdeError::invalid("volatility and maturity must be positive"));
    }
    if !(s0 > 0.0) || !(strike >= 0.0) || ![rate, dividend].iter().all(|v| v.is_finite()) {
        return Err(FbsdeError::invalid("spot must be positive, strike non-negative, rates finite"));
    }
    let carry = (-dividend * maturity).exp();
    if strike == 0.0 {
        return Ok((s0 * carry, carry));
    }
    let vol = sigma * maturity.sqrt();
    let d1 = ((s0 / strike).ln() + (rate - dividend + 0.5 * sigma * sigma) * maturity) / vol;
    let d2 = d1 - vol;
    let price = s0 * carry * normal_cdf(d1) - strike * (-rate * maturity).exp() * normal_cdf(d2);
    Ok((price, carry * normal_cdf(d1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_reference_call() {
        let (price, delta) = bs_closed_form(100.0, 100.0, 0.03, 0.04, 0.2, 0.33).unwrap();
        assert!((price - 4.3671).abs() < 5e-5, "{price}");
        assert!((0.2 * 100.0 * delta - 10.0950).abs() < 5e-5, "{delta}");
    }

    #[test]
    fn limits() {
        let (p, _) = bs_closed_form(100.0, 1e-9, 0.03, 0.04, 0.2, 0.33).unwrap();
        assert!((p - 100.0 * (-0.04f64 * 0.33).exp()).abs() < 1e-8);
        let (p, _) = bs_closed_form(100.0, 0.0, 0.03, 0.04, 0.2, 0.33).unwrap();
        assert_eq!(p, 100.0 * (-0.04f64 * 0.33).exp());
        let (p, _) = bs_closed_form(90.0, 100.0, 0.03, 0.0, 1e-6, 0.5).unwrap();
        assert!(p.abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(bs_closed_form(100.0, 100.0, 0.03, 0.0, 0.0, 1.0).is_err());
        assert!(bs_closed_form(100.0, 100.0, 0.03, 0.0, 0.2, 0.0).is_err());
        assert!(bs_closed_form(-1.0, 100.0, 0.03, 0.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        let v = normal_cdf(1.959963984540054);
        assert!((v - 0.975).abs() < 1e-10, "{v:e}");
    }
}
