//! Bracketed Newton root finding for monotone scalar device equations.
//!
//! Every nonlinear equation in this crate is strictly monotone in its
//! unknown, so a Newton iteration safeguarded by an always-valid bracket
//! converges deterministically. Relative tolerance 1e-12, at most 200
//! iterations, bisection fallback whenever a Newton step leaves the
//! bracket.

use crate::error::{Error, Result};

/// Relative convergence tolerance for all scalar solves.
pub const REL_TOL: f64 = 1e-12;
/// Iteration cap; monotone equations converge in far fewer steps.
pub const MAX_ITER: usize = 200;

/// Solve `f(x) = target` for strictly increasing `f` on (0, inf).
///
/// `lo`/`hi` is the initial bracket and is expanded geometrically when the
/// root lies outside it (deep weak inversion pushes inversion levels far
/// below 1e-12). `init` seeds the Newton iteration when it falls inside
/// the bracket.
pub fn solve_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    init: f64,
    what: &str,
) -> Result<f64> {
    if !target.is_finite() {
        return Err(Error::numeric(format!("{what}: non-finite target")));
    }

    // Expand the bracket until f(lo) <= target <= f(hi).
    let mut expansions = 0;
    while f(lo) > target {
        lo /= 1e3;
        expansions += 1;
        if lo < 1e-280 || expansions > 120 {
            return Err(Error::numeric(format!(
                "{what}: target {target:e} below attainable range"
            )));
        }
    }
    expansions = 0;
    while f(hi) < target {
        hi *= 1e3;
        expansions += 1;
        if hi > 1e280 || expansions > 120 {
            return Err(Error::numeric(format!(
                "{what}: target {target:e} above attainable range"
            )));
        }
    }

    let mut x = if init > lo && init < hi {
        init
    } else {
        (lo * hi).sqrt()
    };

    for _ in 0..MAX_ITER {
        let fx = f(x) - target;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }

        let d = df(x);
        let newton = x - fx / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };

        if (next - x).abs() <= REL_TOL * next.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::numeric(format!(
        "{what}: no convergence after {MAX_ITER} iterations"
    )))
}

/// Ordinary least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}
