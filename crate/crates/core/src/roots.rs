//! Safeguarded Newton iteration for increasing scalar functions.

use thiserror::Error;

pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RootError {
    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("no convergence after {iterations} iterations (x = {x}, f(x) = {fx})")]
    NoConvergence { iterations: usize, x: f64, fx: f64 },
    #[error("function returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Finds `x` in `[lo, hi]` with `|f(x)| <= tol` for a nondecreasing `f`.
///
/// `f` returns the value and a (one-sided) derivative. Newton steps that leave
/// the current bracket, or come from a zero slope, are replaced by bisection,
/// so convergence only relies on `f(lo) <= 0 <= f(hi)` and continuity.
/// Returns early when the bracket collapses to adjacent floats.
pub fn newton_bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
) -> Result<f64, RootError>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    let (f_hi, _) = f(hi);
    if f_hi.abs() <= tol {
        return Ok(hi);
    }
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(RootError::NotBracketed { lo, hi, f_lo, f_hi });
    }

    let mut x = if x0 > lo && x0 < hi {
        x0
    } else {
        0.5 * (lo + hi)
    };
    let mut best = (f64::INFINITY, x);
    for _ in 0..MAX_ITERATIONS {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(RootError::NonFinite { x });
        }
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(best.1);
        }
        let step = x - fx / dfx;
        x = if dfx > 0.0 && step > lo && step < hi {
            step
        } else {
            mid
        };
    }
    let (fx, _) = f(best.1);
    Err(RootError::NoConvergence {
        iterations: MAX_ITERATIONS,
        x: best.1,
        fx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_log_root() {
        // 1 - e^{-0.1 x} = 0.18127 at x ~ 2
        let target = 1.0 - (-0.2f64).exp();
        let r = newton_bisect(
            |x| (-(-0.1 * x).exp_m1() - target, 0.1 * (-0.1 * x).exp()),
            0.0,
            10.0,
            0.0,
            1e-14,
        )
        .unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn survives_kinks_and_flat_slope() {
        // piecewise linear with a flat shelf and a zero derivative report
        let f = |x: f64| {
            let v = if x < 1.0 {
                x - 1.0
            } else if x < 2.0 {
                0.0 * x - 1e-3
            } else {
                x - 2.001
            };
            (v, 0.0)
        };
        let r = newton_bisect(f, 0.0, 5.0, 0.0, 1e-12).unwrap();
        assert!((r - 2.001).abs() < 1e-9);
    }

    #[test]
    fn reports_missing_bracket() {
        let err = newton_bisect(|x| (x + 1.0, 1.0), 0.0, 1.0, 0.5, 1e-12).unwrap_err();
        assert!(matches!(err, RootError::NotBracketed { .. }));
    }

    #[test]
    fn endpoint_roots() {
        assert_eq!(newton_bisect(|x| (x, 1.0), 0.0, 1.0, 0.5, 1e-12), Ok(0.0));
        assert_eq!(
            newton_bisect(|x| (x - 1.0, 1.0), 0.0, 1.0, 0.5, 1e-12),
            Ok(1.0)
        );
    }
}
