//! The quadratic invariant as a 2x2 bilinear form over `(x, p)`, its
//! symplectic diagonalization and ladder operators.
//!
//! Operators are carried as coefficient tuples; no Fock-space truncation.

use num_complex::Complex64;
use thiserror::Error;

use crate::ep::GCoefficients;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("invalid invariant coefficients: g1 = {g1}, eta0 = {eta0} must be positive")]
    InvalidCoefficients { g1: f64, eta0: f64 },
    #[error("diagonalization failed: |u v - 1| = {defect:e}")]
    Diagonalization { defect: f64 },
}

/// Complex 2x2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn identity() -> Self {
        Mat2::real(1.0, 0.0, 0.0, 1.0)
    }

    pub fn sigma_y() -> Self {
        Mat2::new(0.0.into(), -I, I, 0.0.into())
    }

    pub fn sigma_z() -> Self {
        Mat2::real(1.0, 0.0, 0.0, -1.0)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(r)
    }

    pub fn scale(&self, s: Complex64) -> Mat2 {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn adjoint(&self) -> Mat2 {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Eigenvalues from the characteristic polynomial.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let half = self.trace() * 0.5;
        let disc = (half * half - self.det()).sqrt();
        [half - disc, half + disc]
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.0[i][j] - o.0[i][j]).norm());
            }
        }
        m
    }
}

/// Symmetric form `[[g2, g3], [g3, g1]]` over `X = (x, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadForm2 {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl QuadForm2 {
    pub fn from_g(g: &GCoefficients) -> Self {
        QuadForm2 { g1: g.g1, g2: g.g2, g3: g.g3 }
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::real(self.g2, self.g3, self.g3, self.g1)
    }

    /// `g1 g2 - g3^2`, equal to `eta0^2` on solutions.
    pub fn determinant(&self) -> f64 {
        self.g1 * self.g2 - self.g3 * self.g3
    }
}

/// `Lambda = i sigma_y H`; real, with eigenvalues `+- i sqrt(det H)`.
pub fn lambda_matrix(q: &QuadForm2) -> Mat2 {
    Mat2::sigma_y().scale(I).mul(&q.matrix())
}

/// Row vector `u_-` with `a_- = u11 x + u12 p`; `a_+` uses the conjugates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderCoeffs {
    pub u11: Complex64,
    pub u12: Complex64,
    pub eta0: f64,
}

impl LadderCoeffs {
    /// `u11 u12* - u11* u12`, equal to `-i` for `[a_-, a_+] = 1`.
    pub fn commutator_pairing(&self) -> Complex64 {
        self.u11 * self.u12.conj() - self.u11.conj() * self.u12
    }

    /// `[a_-, a_+]` from the canonical commutator `[x, p] = i`.
    pub fn commutator(&self) -> Complex64 {
        I * self.commutator_pairing()
    }

    pub fn lower(&self) -> LinearOp {
        LinearOp { x: self.u11, p: self.u12 }
    }

    pub fn raise(&self) -> LinearOp {
        LinearOp { x: self.u11.conj(), p: self.u12.conj() }
    }

    /// `x = i u12 (a_- - a_+)` as coefficients on `(a_-, a_+)`.
    pub fn x_in_ladder(&self) -> LadderOp {
        LadderOp { lower: I * self.u12, raise: -I * self.u12 }
    }

    /// `p = i (u11 a_+ - u11* a_-)` as coefficients on `(a_-, a_+)`.
    pub fn p_in_ladder(&self) -> LadderOp {
        LadderOp { lower: -I * self.u11.conj(), raise: I * self.u11 }
    }

    /// Maps ladder coefficients back to `(x, p)` coefficients.
    pub fn to_xp(&self, op: &LadderOp) -> LinearOp {
        let (a, b) = (self.lower(), self.raise());
        LinearOp { x: op.lower * a.x + op.raise * b.x, p: op.lower * a.p + op.raise * b.p }
    }
}

pub fn ladder_coeffs(g: &GCoefficients) -> Result<LadderCoeffs, InvariantError> {
    if !(g.g1 > 0.0 && g.eta0 > 0.0) {
        return Err(InvariantError::InvalidCoefficients { g1: g.g1, eta0: g.eta0 });
    }
    let n = 1.0 / (2.0 * g.eta0 * g.g1).sqrt();
    Ok(LadderCoeffs {
        u11: Complex64::new(g.g3, -g.eta0) * n,
        u12: Complex64::new(g.g1 * n, 0.0),
        eta0: g.eta0,
    })
}

/// Linear operator `x * X + p * P`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearOp {
    pub x: Complex64,
    pub p: Complex64,
}

/// Linear operator `lower * a_- + raise * a_+`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderOp {
    pub lower: Complex64,
    pub raise: Complex64,
}

/// `xx X^2 + pp P^2 + xp {X, P} + constant`, symmetric ordering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticOp {
    pub xx: Complex64,
    pub pp: Complex64,
    pub xp: Complex64,
    pub constant: Complex64,
}

impl QuadraticOp {
    /// Product `A B` reduced with `[X, P] = i`.
    pub fn product(a: &LinearOp, b: &LinearOp) -> Self {
        QuadraticOp {
            xx: a.x * b.x,
            pp: a.p * b.p,
            xp: (a.x * b.p + a.p * b.x) * 0.5,
            constant: I * (a.x * b.p - a.p * b.x) * 0.5,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        QuadraticOp { xx: self.xx * s, pp: self.pp * s, xp: self.xp * s, constant: self.constant * s }
    }

    pub fn add_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

/// Right/left eigenvector pair diagonalizing `Lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticPair {
    /// Columns `(v_-, v_+)`.
    pub q: Mat2,
    /// Rows `(u_-, u_+)`.
    pub q_inv: Mat2,
    /// `diag(-i eta0, i eta0)`.
    pub lambda_d: Mat2,
}

impl SymplecticPair {
    /// Largest entry of `Q^dagger + sigma_z Q^{-1} sigma_y`.
    pub fn adjoint_identity_defect(&self) -> f64 {
        let rhs = Mat2::sigma_z().mul(&self.q_inv).mul(&Mat2::sigma_y()).scale((-1.0).into());
        self.q.adjoint().max_abs_diff(&rhs)
    }

    /// Cross products `u_- v_+` and `u_+ v_-`, which vanish.
    pub fn biorthogonality_defect(&self) -> f64 {
        self.q_inv.mul(&self.q).max_abs_diff(&Mat2::identity())
    }
}

pub fn symplectic_diag(g: &GCoefficients) -> Result<SymplecticPair, InvariantError> {
    let u = ladder_coeffs(g)?;
    // v_- = -sigma_y u_-^dagger, v_+ = v_-^*.
    let vm = [I * u.u12.conj(), -I * u.u11.conj()];
    let vp = [vm[0].conj(), vm[1].conj()];
    let norm = u.u11 * vm[0] + u.u12 * vm[1];
    let defect = (norm - 1.0).norm();
    if defect > 1e-10 {
        return Err(InvariantError::Diagonalization { defect });
    }
    let q = Mat2::new(vm[0], vp[0], vm[1], vp[1]);
    let q_inv = Mat2::new(u.u11, u.u12, u.u11.conj(), u.u12.conj());
    let e = Complex64::new(0.0, g.eta0);
    Ok(SymplecticPair { q, q_inv, lambda_d: Mat2::new(-e, 0.0.into(), 0.0.into(), e) })
}

/// `eps_n = 2 eta0 (n + 1/2)`.
pub fn invariant_eigenvalue(n: u32, eta0: f64) -> f64 {
    2.0 * eta0 * (n as f64 + 0.5)
}

/// The invariant rebuilt as `2 eta0 (a_+ a_- + 1/2)`.
pub fn reconstruct_invariant(u: &LadderCoeffs) -> QuadraticOp {
    QuadraticOp::product(&u.raise(), &u.lower()).scale(2.0 * u.eta0).add_constant(u.eta0)
}

/// Largest deviation of the rebuilt `(x^2, p^2, {x,p})` coefficients from
/// `(g2, g1, g3)`.
pub fn invariant_reconstruction_check(g: &GCoefficients) -> Result<f64, InvariantError> {
    let q = reconstruct_invariant(&ladder_coeffs(g)?);
    Ok([(q.xx, g.g2), (q.pp, g.g1), (q.xp, g.g3)]
        .iter()
        .map(|(c, want)| (c - want).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ep::{ToyBranch, ToyModel, ToyVariant};
    use proptest::prelude::*;

    fn unit() -> GCoefficients {
        GCoefficients { g1: 1.0, g2: 1.0, g3: 0.0, eta0: 1.0 }
    }

    fn toy_g(t: f64) -> GCoefficients {
        let s = ToyModel::new(4.0, 4.0).unwrap().eval(ToyBranch::ETA_PLUS, ToyVariant::SignedSin, t).unwrap();
        GCoefficients::from_eta(s.eta, s.etadot, t, 1.0)
    }

    fn from_g1_g3(g1: f64, g3: f64, eta0: f64) -> GCoefficients {
        GCoefficients { g1, g2: (g3 * g3 + eta0 * eta0) / g1, g3, eta0 }
    }

    #[test]
    fn unit_oscillator() {
        let l = lambda_matrix(&QuadForm2::from_g(&unit()));
        assert!(l.max_abs_diff(&Mat2::real(0.0, 1.0, -1.0, 0.0)) < 1e-15);
        let [a, b] = l.eigenvalues();
        assert!((a - Complex64::new(0.0, -1.0)).norm() < 1e-15 && (b - I).norm() < 1e-15);
        let u = ladder_coeffs(&unit()).unwrap();
        let s = 0.5f64.sqrt();
        assert!((u.u11 - Complex64::new(0.0, -s)).norm() < 1e-15 && (u.u12 - s).norm() < 1e-15);
        let sp = symplectic_diag(&unit()).unwrap();
        let d = sp.q_inv.mul(&l).mul(&sp.q);
        assert!(d.max_abs_diff(&sp.lambda_d) < 1e-15);
        assert!(invariant_reconstruction_check(&unit()).unwrap() <= 1e-15);
    }

    #[test]
    fn toy_spectrum_and_diagonalization() {
        for t in [2.0, 3.0] {
            let g = toy_g(t);
            let l = lambda_matrix(&QuadForm2::from_g(&g));
            for (ev, want) in l.eigenvalues().iter().zip([-1.0, 1.0]) {
                assert!((ev - Complex64::new(0.0, want)).norm() < 1e-10);
            }
            let sp = symplectic_diag(&g).unwrap();
            let d = sp.q_inv.mul(&l).mul(&sp.q);
            assert!(d.0[0][1].norm() <= 1e-10 && d.0[1][0].norm() <= 1e-10);
            assert!(d.max_abs_diff(&sp.lambda_d) <= 1e-10);
            assert!(sp.adjoint_identity_defect() <= 1e-12);
            assert!(sp.biorthogonality_defect() <= 1e-12);
        }
    }

    #[test]
    fn reconstruction_on_toy_grid() {
        for k in 0..=90 {
            let g = toy_g(1.0 + 0.1 * k as f64);
            assert!(invariant_reconstruction_check(&g).unwrap() <= 1e-10);
            let q = reconstruct_invariant(&ladder_coeffs(&g).unwrap());
            assert!(q.constant.norm() <= 1e-12);
        }
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(invariant_eigenvalue(0, 1.0), 1.0);
        assert_eq!(invariant_eigenvalue(2, 1.0), 5.0);
        assert_eq!(invariant_eigenvalue(3, 0.5), 3.5);
    }

    proptest! {
        #[test]
        fn commutator_and_round_trip(g1 in 0.05f64..20.0, g3 in -10.0f64..10.0, eta0 in 0.1f64..3.0) {
            let g = from_g1_g3(g1, g3, eta0);
            let u = ladder_coeffs(&g).unwrap();
            prop_assert!((u.commutator_pairing() + I).norm() <= 1e-12);
            prop_assert!((u.commutator() - 1.0).norm() <= 1e-12);
            let x = u.to_xp(&u.x_in_ladder());
            let p = u.to_xp(&u.p_in_ladder());
            prop_assert!((x.x - 1.0).norm() <= 1e-12 && x.p.norm() <= 1e-12);
            prop_assert!(p.x.norm() <= 1e-12 && (p.p - 1.0).norm() <= 1e-12);
        }

        #[test]
        fn spectrum_is_plus_minus_i_eta0(g1 in 0.05f64..20.0, g3 in -10.0f64..10.0, eta0 in 0.1f64..3.0) {
            let g = from_g1_g3(g1, g3, eta0);
            let q = QuadForm2::from_g(&g);
            let scale = 1.0 + q.g2.abs() + g1 + g3.abs();
            for (ev, s) in lambda_matrix(&q).eigenvalues().iter().zip([-1.0, 1.0]) {
                prop_assert!((ev - Complex64::new(0.0, s * eta0)).norm() <= 1e-12 * scale);
            }
            let flipped = QuadForm2 { g3: -g3, ..q };
            let (a, b) = (lambda_matrix(&q).eigenvalues(), lambda_matrix(&flipped).eigenvalues());
            prop_assert!((a[0] - b[0]).norm() <= 1e-12 * scale);
        }

        #[test]
        fn unit_determinant_reconstruction(g1 in 0.05f64..20.0, g3 in -10.0f64..10.0) {
            let g = from_g1_g3(g1, g3, 1.0);
            let scale = 1.0 + g.g2;
            prop_assert!(invariant_reconstruction_check(&g).unwrap() <= 1e-12 * scale);
            let sp = symplectic_diag(&g).unwrap();
            prop_assert!(sp.adjoint_identity_defect() <= 1e-12 * scale);
        }
    }
}
