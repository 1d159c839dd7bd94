//! Krichevsky–Trofimov estimated probabilities.
//!
//! `P_e(a)` is the probability of any sequence with symbol counts `a` under a
//! Dirichlet(1/2, ..., 1/2) mixture of i.i.d. sources:
//!
//! ```text
//! P_e(a) = Π_j [(1/2)(3/2)...(a(j) - 1/2)] / [(m/2)(m/2 + 1)...(m/2 + M - 1)]
//! ```
//!
//! Everything here works in natural-log space.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{BctError, Result};

/// `log(e^a + e^b)` without overflow; `-inf` inputs are handled.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log Σ exp(x_i)`; the empty sum is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `x log(x / total)` with `0 log 0 = 0`.
#[inline]
pub(crate) fn xlogx_ratio(x: f64, total: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / total).ln()
    }
}

/// Sum of the counts.
#[inline]
pub fn total(counts: &[u64]) -> u64 {
    counts.iter().sum()
}

/// `log P_e(a)` for the count vector `counts` over an alphabet of size
/// `counts.len()`. Zero when every count is zero.
pub fn pe_log(counts: &[u64]) -> f64 {
    let m = counts.len() as f64;
    let total = total(counts);
    if total == 0 {
        return 0.0;
    }
    let half = ln_gamma(0.5);
    let numerator: f64 = counts
        .iter()
        .filter(|&&a| a > 0)
        .map(|&a| ln_gamma(a as f64 + 0.5) - half)
        .sum();
    numerator - (ln_gamma(total as f64 + m / 2.0) - ln_gamma(m / 2.0))
}

/// Sequential KT probability of seeing `symbol` next, given pre-update
/// counts: `(a(j) + 1/2) / (M + m/2)`.
pub fn pe_step(counts: &[u64], symbol: usize) -> Result<f64> {
    let m = counts.len();
    let a = *counts
        .get(symbol)
        .ok_or(BctError::SymbolOutOfRange { symbol, m })?;
    Ok(pe_step_unchecked(counts, a))
}

#[inline]
pub(crate) fn pe_step_unchecked(counts: &[u64], a_symbol: u64) -> f64 {
    (a_symbol as f64 + 0.5) / (total(counts) as f64 + counts.len() as f64 / 2.0)
}

/// Lower and upper bounds on `log P_e(a)`:
///
/// ```text
/// lower = Σ a(j) log(a(j)/M) - ((m-1)/2) log M - log m
/// upper = Σ a(j) log(a(j)/M) - ((m-1)/2) log(M/2π) - log(π^{m/2} / Γ(m/2))
/// ```
pub fn pe_bounds(counts: &[u64]) -> Result<(f64, f64)> {
    let m = counts.len() as f64;
    let total = total(counts);
    if total == 0 {
        return Err(BctError::Precondition(
            "KT bounds need at least one observation".into(),
        ));
    }
    let big_m = total as f64;
    let empirical: f64 = counts.iter().map(|&a| xlogx_ratio(a as f64, big_m)).sum();
    let half_dim = (m - 1.0) / 2.0;
    let lower = empirical - half_dim * big_m.ln() - m.ln();
    let upper =
        empirical - half_dim * (big_m / (2.0 * PI)).ln() - (m / 2.0 * PI.ln() - ln_gamma(m / 2.0));
    Ok((lower, upper))
}

/// `upper - lower` of [`pe_bounds`], which does not depend on the counts.
pub fn pe_bounds_width(m: usize) -> f64 {
    let m = m as f64;
    (m - 1.0) / 2.0 * (2.0 * PI).ln() + m.ln() + ln_gamma(m / 2.0) - m / 2.0 * PI.ln()
}
