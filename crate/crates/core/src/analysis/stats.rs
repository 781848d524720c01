//! Small statistical utilities: the chi-squared tail probability (via the
//! regularized incomplete gamma function) and a chi-squared goodness-of-fit
//! test for empirical distributions.

use crate::error::{Error, Result};

/// ln Gamma(x) by the Lanczos approximation (g = 5, n = 6), |error| < 2e-10
/// for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COEFFS {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Regularized lower incomplete gamma P(a, x); series for x < a + 1,
/// continued fraction otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_p domain");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q domain");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cf(a: f64, x: f64) -> f64 {
    // Modified Lentz continued fraction.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Tail probability of a chi-squared variable: P(X >= chi2 | dof).
pub fn chi_squared_pvalue(chi2: f64, dof: usize) -> f64 {
    if dof == 0 {
        return f64::NAN;
    }
    gamma_q(dof as f64 / 2.0, chi2.max(0.0) / 2.0)
}

/// Pearson chi-squared test of observed counts against expected
/// probabilities. Categories with expected count below `min_expected` are
/// pooled into one. Returns (chi2, dof, p-value).
pub fn chi_squared_test(
    observed: &[u64],
    expected_probs: &[f64],
    total: u64,
) -> Result<(f64, usize, f64)> {
    if observed.len() != expected_probs.len() {
        return Err(Error::config("observed/expected length mismatch"));
    }
    const MIN_EXPECTED: f64 = 5.0;
    let n = total as f64;
    let mut chi2 = 0.0;
    let mut used = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&obs, &p) in observed.iter().zip(expected_probs) {
        let exp = p * n;
        if exp >= MIN_EXPECTED {
            chi2 += (obs as f64 - exp).powi(2) / exp;
            used += 1;
        } else {
            pooled_obs += obs as f64;
            pooled_exp += exp;
        }
    }
    if pooled_exp > 0.0 {
        chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        used += 1;
    }
    if used < 2 {
        return Err(Error::config(
            "chi-squared test needs at least 2 categories",
        ));
    }
    let dof = used - 1;
    Ok((chi2, dof, chi_squared_pvalue(chi2, dof)))
}
