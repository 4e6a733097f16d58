//! Physicists' Hermite polynomials by three-term recurrence.

use std::ops::{Mul, Sub};

/// `H_n(x)` for real `x`. Overflow yields infinity.
pub fn hermite(n: usize, x: f64) -> f64 {
    hermite_generic(n, x)
}

/// `H_n(z)` for any field with real scaling (used with complex arguments).
pub fn hermite_generic<T>(n: usize, x: T) -> T
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T> + Mul<T, Output = T> + From<f64>,
{
    let mut prev = T::from(1.0);
    if n == 0 {
        return prev;
    }
    let mut cur = x * 2.0;
    for k in 1..n {
        let next = x * cur * 2.0 - prev * (2.0 * k as f64);
        prev = cur;
        cur = next;
    }
    cur
}
