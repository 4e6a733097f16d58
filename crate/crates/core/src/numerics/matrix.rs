//! Fixed-size 3x3 matrices over `f64` or `Complex64` and their exponential.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use super::NumericsError;

/// Scalar field usable as a matrix entry.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn modulus(self) -> f64;
    fn finite(self) -> bool;
    fn scale(self, s: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// Row-major 3x3 matrix. Indexing is zero-based: `m[(0, 0)]` is the
/// top-left entry (k11 in one-based notation).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix3<T = f64>(pub [[T; 3]; 3]);

impl<T: Scalar> Matrix3<T> {
    pub fn zero() -> Self {
        Matrix3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: [[T; 3]; 3]) -> Self {
        Matrix3(rows)
    }

    pub fn diag(d: [T; 3]) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..3)
            .map(|j| (0..3).map(|i| self.0[i][j].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|v| v.modulus())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v = v.scale(s));
        m
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> T {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: [T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i][0] * v[0] + self.0[i][1] * v[1] + self.0[i][2] * v[2];
        }
        out
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }
}

impl<T: Scalar> Index<(usize, usize)> for Matrix3<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for Matrix3<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

impl<T: Scalar> Add for Matrix3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i][j] + rhs.0[i][j];
            }
        }
        m
    }
}

impl<T: Scalar> Sub for Matrix3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i][j] - rhs.0[i][j];
            }
        }
        m
    }
}

impl<T: Scalar> Neg for Matrix3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<T: Scalar> Mul for Matrix3<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = T::zero();
                for k in 0..3 {
                    acc = acc + self.0[i][k] * rhs.0[k][j];
                }
                m.0[i][j] = acc;
            }
        }
        m
    }
}

const SERIES_NORM: f64 = 0.5;
const SERIES_CUTOFF: f64 = 1e-18;
const MAX_TERMS: usize = 60;

/// Matrix exponential by scaling and squaring around a truncated Taylor series.
///
/// `A` is scaled by `2^-s` until its one-norm is at most 0.5, the series is
/// summed until a term drops below 1e-18 in one-norm, and the result is
/// squared `s` times.
pub fn mat_exp<T: Scalar>(a: &Matrix3<T>) -> Result<Matrix3<T>, NumericsError> {
    if !a.is_finite() {
        return Err(NumericsError::InvalidArgument(
            "mat_exp: matrix has non-finite entries".into(),
        ));
    }
    let norm = a.norm1();
    let squarings = if norm > SERIES_NORM {
        (norm / SERIES_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));

    let mut sum = Matrix3::<T>::identity();
    let mut term = Matrix3::<T>::identity();
    for k in 1..=MAX_TERMS {
        term = (term * scaled).scale(1.0 / k as f64);
        sum = sum + term;
        if term.norm1() < SERIES_CUTOFF {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn zero_gives_identity() {
        let e = mat_exp(&Matrix3::<f64>::zero()).unwrap();
        assert_eq!(e, Matrix3::identity());
    }

    #[test]
    fn diagonal_case() {
        let e = mat_exp(&Matrix3::diag([1.0, -1.0, 0.0])).unwrap();
        let want = Matrix3::diag([E, 1.0 / E, 1.0]);
        assert!(e.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn rotation_generator() {
        // exp of the so(2) generator embedded in 3x3 is a rotation.
        let t = 2.3;
        let a = Matrix3::from_rows([[0.0, -t, 0.0], [t, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let e = mat_exp(&a).unwrap();
        let want = Matrix3::from_rows([
            [t.cos(), -t.sin(), 0.0],
            [t.sin(), t.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ]);
        assert!(e.max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn nilpotent_is_exact_polynomial() {
        let a = Matrix3::from_rows([[0.0, 3.0, 1.0], [0.0, 0.0, 2.0], [0.0, 0.0, 0.0]]);
        let e = mat_exp(&a).unwrap();
        // I + A + A^2/2
        let want = Matrix3::identity() + a + (a * a).scale(0.5);
        assert!(e.max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn complex_entries() {
        let i = Complex64::i();
        let a = Matrix3::diag([i * std::f64::consts::PI, Complex64::new(0.5, 0.0), -i]);
        let e = mat_exp(&a).unwrap();
        assert!((e[(0, 0)] + 1.0).norm() < 1e-13);
        assert!((e[(1, 1)] - 0.5f64.exp()).norm() < 1e-13);
        assert!((e[(2, 2)] - (-i).exp()).norm() < 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Matrix3::<f64>::zero();
        a[(1, 2)] = f64::NAN;
        assert!(matches!(mat_exp(&a), Err(NumericsError::InvalidArgument(_))));
    }

    #[test]
    fn determinant_and_trace() {
        let a = Matrix3::from_rows([[2.0, 0.0, 1.0], [1.0, 3.0, 0.0], [0.0, 1.0, 4.0]]);
        assert_eq!(a.trace(), 9.0);
        assert!((a.determinant() - 25.0).abs() < 1e-12);
    }
}
