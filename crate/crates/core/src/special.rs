//! Numerical kernels: the lower real branch of the Lambert W function and
//! harmonic numbers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Harmonic numbers above this index use the asymptotic expansion instead of
/// direct summation. The expansion error there is below 1e-40.
pub const HARMONIC_SUMMATION_LIMIT: u64 = 10_000_000;

/// Half-width of the neighbourhood of `-1/e` in which `W_{-1}` is pinned to -1.
const BRANCH_POINT_TOLERANCE: f64 = 1e-14;

/// Below this argument the branch-point series seeds Halley iteration;
/// above it the logarithmic asymptote does.
const SERIES_REGIME_BOUND: f64 = -0.25;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Lower real branch `W_{-1}(x)` of the Lambert W function, `x ∈ [-1/e, 0)`.
///
/// Returns the unique `w ≤ -1` with `w·e^w = x`.
pub fn lambert_w_minus1<T: Scalar>(x: T) -> Result<T> {
    let inv_e = T::E().recip();
    let branch_tol = T::lit(BRANCH_POINT_TOLERANCE).max(T::epsilon() * T::lit(4.0));
    if !x.is_finite() || x >= T::zero() || x < -inv_e - branch_tol {
        return Err(Error::Domain {
            what: "lambert_w_minus1",
            value: x.to_f64_lossy(),
            domain: "[-1/e, 0)",
        });
    }
    if (x + inv_e).abs() < branch_tol {
        return Ok(-T::one());
    }

    let mut w = initial_guess(x);
    let two = T::lit(2.0);
    let step_tol = T::epsilon() * T::lit(4.0);
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + T::one();
        if f == T::zero() || wp1 == T::zero() {
            break;
        }
        let denom = ew * wp1 - (w + two) * f / (two * wp1);
        let step = f / denom;
        let mut next = w - step;
        if !next.is_finite() {
            break;
        }
        // Halley can overshoot past the branch point from a poor seed.
        if next > -T::one() {
            next = (w - T::one()) / two;
        }
        let moved = (next - w).abs();
        w = next;
        if moved <= step_tol * w.abs() {
            break;
        }
    }
    Ok(w.min(-T::one()))
}

fn initial_guess<T: Scalar>(x: T) -> T {
    if x < T::lit(SERIES_REGIME_BOUND) {
        // W = -1 - p - p²/3 - 11p³/72 - 43p⁴/540, p = sqrt(2(1 + e·x))
        let p = (T::lit(2.0) * (T::one() + T::E() * x))
            .max(T::zero())
            .sqrt();
        let p2 = p * p;
        -T::one()
            - p
            - p2 / T::lit(3.0)
            - T::lit(11.0 / 72.0) * p2 * p
            - T::lit(43.0 / 540.0) * p2 * p2
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    }
}

/// `H_n = Σ_{i=1..n} 1/i`, with `H_0 = 0`.
///
/// Exact summation (smallest terms first) up to
/// [`HARMONIC_SUMMATION_LIMIT`], asymptotic expansion beyond.
pub fn harmonic<T: Scalar>(n: u64) -> T {
    if n > HARMONIC_SUMMATION_LIMIT {
        return harmonic_asymptotic(n);
    }
    (1..=n).rev().map(|i| T::count(i).recip()).sum()
}

/// `H_n - H_m` for `m ≤ n`, summed directly over `(m, n]` so that the
/// difference does not suffer cancellation.
pub fn harmonic_diff<T: Scalar>(n: u64, m: u64) -> Result<T> {
    if m > n {
        return Err(Error::Domain {
            what: "harmonic_diff",
            value: m as f64,
            domain: "m <= n",
        });
    }
    if n - m > HARMONIC_SUMMATION_LIMIT {
        return Ok(harmonic::<T>(n) - harmonic::<T>(m));
    }
    Ok(((m + 1)..=n).rev().map(|i| T::count(i).recip()).sum())
}

fn harmonic_asymptotic<T: Scalar>(n: u64) -> T {
    let x = T::count(n);
    let inv = x.recip();
    let inv2 = inv * inv;
    x.ln() + T::lit(EULER_GAMMA) + inv / T::lit(2.0) - inv2 / T::lit(12.0)
        + inv2 * inv2 / T::lit(120.0)
}
