//! Float helpers that work without `std`.

use alloc::vec::Vec;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `x log x` with the continuous extension `0 log 0 = 0`.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * ln(x)
    } else {
        0.0
    }
}

/// Stable `log Σ exp(vᵢ)`; returns `-inf` for an empty or all `-inf` input.
pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = values.into_iter().map(|v| exp(v - max)).sum();
    max + ln(s)
}

/// Solves a symmetric tridiagonal system `A x = b` by LDLᵀ.
///
/// `diag` has length n, `off` length n−1 (the sub/super diagonal).
/// Returns `None` when a pivot is not strictly positive, i.e. when `A`
/// is not positive definite.
pub(crate) fn solve_spd_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(rhs.len(), n);
    debug_assert!(n == 0 || off.len() == n - 1);
    let mut d = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n.saturating_sub(1));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (piv, yi) = if i == 0 {
            (diag[0], rhs[0])
        } else {
            let li = off[i - 1] / d[i - 1];
            l.push(li);
            (diag[i] - li * off[i - 1], rhs[i] - li * y[i - 1])
        };
        if !(piv > 0.0) || !piv.is_finite() {
            return None;
        }
        d.push(piv);
        y.push(yi);
    }
    let mut x = alloc::vec![0.0; n];
    for i in (0..n).rev() {
        let mut xi = y[i] / d[i];
        if i + 1 < n {
            xi -= l[i] * x[i + 1];
        }
        x[i] = xi;
    }
    Some(x)
}
