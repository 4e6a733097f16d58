//! Bracketed scalar root finding (Brent's method).

use super::NumericsError;

pub const MAX_ITERATIONS: usize = 200;

/// Finds a root of `f` inside `[lo, hi]`.
///
/// Requires a sign change over the bracket. Combines bisection with secant
/// and inverse quadratic steps; stops once the bracket is narrower than
/// `tol` (plus a few ulps of the iterate) or `f` vanishes exactly.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    if !(tol > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::InvalidArgument(format!(
            "find_root: need finite bracket and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(NumericsError::Bracket { lo, hi, f_lo: fa, f_hi: fb });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITERATIONS {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    Err(NumericsError::Convergence {
        iterations: MAX_ITERATIONS,
        lo: b.min(c),
        hi: b.max(c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic() {
        let r = find_root(|x| x * x - 4.0, 0.0, 3.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cosine() {
        let r = find_root(f64::cos, 1.0, 2.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn exact_endpoint() {
        assert_eq!(find_root(|x| x - 1.0, 1.0, 2.0, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn no_sign_change() {
        let err = find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, NumericsError::Bracket { .. }));
    }

    #[test]
    fn flat_function_still_converges() {
        // Very flat near the root: x^9.
        let r = find_root(|x: f64| x.powi(9), -1.0, 2.0, 1e-10).unwrap();
        assert!(r.abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn bracket_and_residual(root in -10.0f64..10.0, slope in 0.1f64..10.0, width in 0.01f64..5.0) {
            let f = |x: f64| slope * (x - root) + 0.3 * (x - root).powi(3);
            let tol = 1e-10;
            let x = find_root(f, root - width, root + 2.0 * width, tol).unwrap();
            prop_assert!((x - root).abs() <= tol + 4.0 * f64::EPSILON * root.abs().max(1.0));
            // residual consistent with local derivative times tol
            prop_assert!(f(x).abs() <= 2.0 * (slope + 1.0) * tol);
        }
    }
}
