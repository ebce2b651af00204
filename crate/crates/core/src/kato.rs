//! Kato-inequality concentration bounds in all four directions with the
//! closed-form optimal coefficients.
//!
//! Two directions transform an observed count Λ_N into bounds on the sum of
//! conditional expectations (K^L, K^U); the reverse pair transforms a known
//! expectation S_N into bounds on the count (K̄^L, K̄^U). The coefficient
//! formulas solve
//!
//! ```text
//! min (b + a(2Λ/N − 1))√N   s.t.  exp(−2(b² − a²)/(1 ± 4a/(3√N))²) = ε,  b ≥ |a|
//! ```
//!
//! and are evaluated here exactly as the optimizer's stationary conditions
//! require; each bound holds with failure probability at most ε.

use crate::{Error, Result};

/// A one-sided-pair confidence interval produced by a Kato transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceBound {
    pub n_trials: f64,
    /// The quantity that was transformed (a count for K, an expectation for K̄).
    pub observed_or_expected: f64,
    pub epsilon: f64,
    pub lower: f64,
    pub upper: f64,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN as well as the wrong sign
fn check_inputs(value: f64, n: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0,1); got {eps}"
        )));
    }
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "N must be positive; got {n}"
        )));
    }
    if !(0.0..=n).contains(&value) || !value.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "value must lie in [0, N]; got {value} with N = {n}"
        )));
    }
    Ok(())
}

/// Bounds on the expectation sum given an observed count Λ_N.
pub fn kato_expectation_bounds(count: f64, n: f64, eps: f64) -> Result<ConfidenceBound> {
    check_inputs(count, n, eps)?;
    let ln = eps.ln();
    let lam = count;
    let sqrt_n = n.sqrt();
    // shared pieces; 9Λ(N−Λ) − 2N ln ε > 0 for ε < 1
    let disc = 9.0 * lam * (n - lam) - 2.0 * n * ln;
    let root = (-ln * disc).max(0.0).sqrt();
    let den = 4.0 * (9.0 * n - 8.0 * ln) * disc;

    let a = 3.0
        * (9.0 * std::f64::consts::SQRT_2 * n * (n - 2.0 * lam) * root
            + 16.0 * n.powf(1.5) * ln * ln
            - 72.0 * lam * sqrt_n * (n - lam) * ln)
        / den;
    let b = (18.0 * n * a * a - (16.0 * a * a + 24.0 * sqrt_n * a + 9.0 * n) * ln)
        .max(0.0)
        .sqrt()
        / (3.0 * (2.0 * n).sqrt());

    let c = 3.0
        * (9.0 * std::f64::consts::SQRT_2 * n * (n - 2.0 * lam) * root
            - 16.0 * n.powf(1.5) * ln * ln
            + 72.0 * lam * sqrt_n * (n - lam) * ln)
        / den;
    let d = (18.0 * n * c * c - (16.0 * c * c - 24.0 * sqrt_n * c + 9.0 * n) * ln)
        .max(0.0)
        .sqrt()
        / (3.0 * (2.0 * n).sqrt());

    let lower = (lam - (b + a * (2.0 * lam / n - 1.0)) * sqrt_n).clamp(0.0, n);
    let upper = (lam + (d + c * (2.0 * lam / n - 1.0)) * sqrt_n).clamp(0.0, n);
    Ok(ConfidenceBound {
        n_trials: n,
        observed_or_expected: count,
        epsilon: eps,
        lower,
        upper,
    })
}

/// Bounds on the count given the expectation sum S_N.
///
/// The lower direction degenerates to the vacuous bound 0 when its
/// denominator closes; the upper direction errors instead (tiny N with a
/// huge ε demand leaves no valid coefficient).
pub fn kato_count_bounds(expectation: f64, n: f64, eps: f64) -> Result<ConfidenceBound> {
    check_inputs(expectation, n, eps)?;
    let ln = eps.ln();
    let s = expectation;
    let sqrt_n = n.sqrt();
    let inner = n * ln * (n * ln - 18.0 * s * (n - s));
    let root = inner.max(0.0).sqrt();
    let den = 4.0
        * (4.0 * n * ln * ln
            + 36.0 * ln * (2.0 * s * s - 2.0 * n * s + n * n)
            + 81.0 * n * s * (n - s));

    let e = 3.0
        * sqrt_n
        * (9.0 * (n - 2.0 * s) * root
            - 4.0 * n * ln * ln
            - 9.0 * ln * (8.0 * s * s - 8.0 * n * s + 3.0 * n * n))
        / den;
    let f = (9.0 * e * e - (4.0 * e + 3.0 * sqrt_n).powi(2) * ln / (2.0 * n))
        .max(0.0)
        .sqrt()
        / 3.0;
    let g = 3.0
        * sqrt_n
        * (9.0 * (n - 2.0 * s) * root
            + 4.0 * n * ln * ln
            + 9.0 * ln * (8.0 * s * s - 8.0 * n * s + 3.0 * n * n))
        / den;
    let h = (18.0 * n * g * g - (16.0 * g * g - 24.0 * sqrt_n * g + 9.0 * n) * ln)
        .max(0.0)
        .sqrt()
        / (3.0 * (2.0 * n).sqrt());

    let den_l = sqrt_n + 2.0 * e;
    let lower = if den_l > 0.0 {
        ((sqrt_n * s + n * (e - f)) / den_l).clamp(0.0, n)
    } else {
        0.0
    };
    let den_u = sqrt_n - 2.0 * g;
    if den_u <= 0.0 {
        return Err(Error::DegenerateRegime);
    }
    let upper = ((sqrt_n * s + n * (h - g)) / den_u).clamp(0.0, n);
    Ok(ConfidenceBound {
        n_trials: n,
        observed_or_expected: expectation,
        epsilon: eps,
        lower,
        upper,
    })
}

/// Hoeffding half-width √(N ln(2/ε) / 2); the test suites compare Kato
/// intervals against this.
pub fn hoeffding_half_width(n: f64, eps: f64) -> f64 {
    (n * (2.0 / eps).ln() / 2.0).sqrt()
}
