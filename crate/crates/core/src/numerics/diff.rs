//! Richardson-extrapolated finite differences that stay inside a domain.

use super::quad::QuadValue;

/// First derivative of `f` at `t` with base step `h`.
///
/// Uses central differences when `[t-h, t+h]` lies inside `domain`, else a
/// second-order one-sided stencil. Either way one Richardson step (h, h/2)
/// is applied.
pub fn derivative<T, F>(f: F, t: f64, h: f64, domain: (f64, f64)) -> T
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let (lo, hi) = domain;
    if t - h >= lo && t + h <= hi {
        let d = |s: f64| (f(t + s) - f(t - s)) * (0.5 / s);
        let (d1, d2) = (d(h), d(0.5 * h));
        (d2 * 4.0 - d1) * (1.0 / 3.0)
    } else {
        let dir = if t - h < lo { 1.0 } else { -1.0 };
        let f0 = f(t);
        let d = |s: f64| {
            let s = dir * s;
            (f(t + s) * 4.0 - f0 * 3.0 - f(t + 2.0 * s)) * (0.5 / s)
        };
        let (d1, d2) = (d(h), d(0.5 * h));
        (d2 * 4.0 - d1) * (1.0 / 3.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_and_one_sided() {
        let inf = (f64::NEG_INFINITY, f64::INFINITY);
        let d: f64 = derivative(f64::sin, 0.4, 1e-3, inf);
        assert!((d - 0.4f64.cos()).abs() < 1e-12);
        let d: f64 = derivative(f64::exp, 1.0, 1e-3, (1.0, 2.0));
        assert!((d - 1f64.exp()).abs() < 1e-8);
        let d: f64 = derivative(f64::exp, 2.0, 1e-3, (1.0, 2.0));
        assert!((d - 2f64.exp()).abs() < 1e-8);
    }
}
