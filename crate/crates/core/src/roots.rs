//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]`. The bracket must have a sign change (or an exact
/// zero at an end point). Stops once the bracket is narrower than `tol` or
/// cannot be split further in f64.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoRootInBracket { lo: a, hi: b });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a <= tol || mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Newton polish started from a bisection result; falls back to the
/// starting point if an iterate leaves `[lo, hi]`.
pub fn newton_polish<F, D>(f: F, df: D, start: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = start;
    for _ in 0..20 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - f(x) / d;
        if !(lo..=hi).contains(&next) {
            return start;
        }
        if next == x {
            break;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NoRootInBracket { .. })
        ));
    }

    #[test]
    fn endpoint_roots_and_reversed_bracket() {
        assert_eq!(bisect(|x| x - 1.0, 1.0, 3.0, 1e-12).unwrap(), 1.0);
        let r = bisect(|x| x - 1.5, 3.0, 1.0, 1e-13).unwrap();
        assert!((r - 1.5).abs() < 1e-12);
    }

    #[test]
    fn newton_agrees_with_bisection() {
        let f = |x: f64| x.cos() - x;
        let b = bisect(f, 0.0, 1.0, 1e-6).unwrap();
        let n = newton_polish(f, |x| -x.sin() - 1.0, b, 0.0, 1.0);
        let exact = bisect(f, 0.0, 1.0, 1e-16).unwrap();
        assert!((n - exact).abs() < 1e-12);
    }
}
