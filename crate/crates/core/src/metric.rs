//! Similarity transformation `rho = exp(Gamma)` mapping the amplifier onto a
//! Hermitian oscillator with effective mass `M0` and squared frequency
//! `Omega0^2`.

use std::sync::Mutex;

use thiserror::Error;

use crate::numerics::{self, find_root, Matrix3, NumericsError};
use crate::signals::{AmplifierParams, AmplifierSpec, Signal, SignalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("invalid metric parameters: kappa0^2 = {kappa0_sq} must exceed 4 kappa^2 = {bound}")]
    InvalidParams { kappa0_sq: f64, bound: f64 },
    #[error("kappa0 = {kappa0} is outside the constraint domain or at its pole")]
    ExcludedPoint { kappa0: f64 },
    #[error(
        "no metric: no sign change of the kappa0 constraint on ({lo}, {hi}) for kappa = {kappa} \
         ({samples} samples{}); parameters may be in the broken-PT regime or kappa is out of range",
        pole.map(|p| format!(", pole at {p} excluded")).unwrap_or_default()
    )]
    NoMetric { kappa: f64, lo: f64, hi: f64, samples: usize, pole: Option<f64> },
    #[error("kappa must be nonzero when alpha != beta")]
    ZeroKappa,
    #[error("hermitization failed: |alpha0 - beta0| = {residual:e} exceeds tolerance {tol:e}")]
    HermitizationFailure { residual: f64, tol: f64 },
    #[error("degenerate effective mass: omega0 = 2 alpha0 = {omega0}")]
    DegenerateMass { omega0: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Parameters of the generator `Gamma`; `theta = sqrt(kappa0^2 - 4 kappa^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricParams {
    pub kappa: f64,
    pub kappa0: f64,
    pub theta: f64,
}

impl MetricParams {
    pub fn new(kappa: f64, kappa0: f64) -> Result<Self, MetricError> {
        let kappa0_sq = kappa0 * kappa0;
        let bound = 4.0 * kappa * kappa;
        if !(kappa0_sq > bound) || !kappa.is_finite() || !kappa0.is_finite() {
            return Err(MetricError::InvalidParams { kappa0_sq, bound });
        }
        Ok(MetricParams { kappa, kappa0, theta: (kappa0_sq - bound).sqrt() })
    }

    /// `Gamma = 0`: the transformation is the identity.
    pub fn identity() -> Self {
        MetricParams { kappa: 0.0, kappa0: 0.0, theta: 0.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.kappa == 0.0 && self.kappa0 == 0.0
    }

    /// The real 3x3 generator acting on (omega, alpha, beta).
    pub fn generator(&self) -> Matrix3 {
        let (k, k0) = (self.kappa, self.kappa0);
        Matrix3::from_rows([
            [0.0, -4.0 * k, 4.0 * k],
            [2.0 * k, -2.0 * k0, 0.0],
            [-2.0 * k, 0.0, 2.0 * k0],
        ])
    }
}

const SERIES_THETA: f64 = 1e-4;

/// `(cosh 2θ, (cosh 2θ - 1)/θ², sinh 2θ/θ)` with a series below θ = 1e-4.
fn hyperbolic_parts(theta: f64) -> (f64, f64, f64) {
    if theta < SERIES_THETA {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (
            1.0 + 2.0 * t2 + (2.0 / 3.0) * t4,
            2.0 + (2.0 / 3.0) * t2 + (4.0 / 45.0) * t4,
            2.0 + (4.0 / 3.0) * t2 + (4.0 / 15.0) * t4,
        )
    } else {
        // cosh 2θ - 1 = 2 sinh²θ avoids cancellation for small θ.
        let sh = theta.sinh() / theta;
        ((2.0 * theta).cosh(), 2.0 * sh * sh, (2.0 * theta).sinh() / theta)
    }
}

/// Closed-form entries of `k = exp(K)`, rewritten so the removable θ → 0
/// singularity cancels analytically.
pub fn k_matrix_closed(p: &MetricParams) -> Matrix3 {
    let (k, k0) = (p.kappa, p.kappa0);
    let (c, c1, s1) = hyperbolic_parts(p.theta);
    let kk = k * k;
    Matrix3::from_rows([
        [1.0 - 4.0 * kk * c1, -2.0 * k * (s1 - k0 * c1), 2.0 * k * (k0 * c1 + s1)],
        [k * (s1 - k0 * c1), c + 2.0 * kk * c1 - k0 * s1, 2.0 * kk * c1],
        [-k * (k0 * c1 + s1), 2.0 * kk * c1, c + 2.0 * kk * c1 + k0 * s1],
    ])
}

/// The transcendental equation fixing `kappa0` for a given `kappa` at one
/// parameter point: `tanh(2θ)/θ = (β - α) / (2ωκ - (α + β) κ0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kappa0Constraint {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Kappa0Constraint {
    pub fn from_params(p: &AmplifierParams, kappa: f64) -> Self {
        Kappa0Constraint { omega: p.omega, alpha: p.alpha, beta: p.beta, kappa }
    }

    /// Lower end of the admissible domain, `2|kappa|`.
    pub fn lower_bound(&self) -> f64 {
        2.0 * self.kappa.abs()
    }

    /// `2 ω κ / (α + β)`, where the right-hand side diverges.
    pub fn pole(&self) -> Option<f64> {
        let nu = self.alpha + self.beta;
        (nu != 0.0).then(|| 2.0 * self.omega * self.kappa / nu)
    }

    /// `tanh(2θ)/θ`, with its θ → 0 limit.
    pub fn lhs(&self, kappa0: f64) -> f64 {
        let theta = (kappa0 * kappa0 - 4.0 * self.kappa * self.kappa).sqrt();
        if theta < SERIES_THETA {
            let t2 = theta * theta;
            2.0 - (8.0 / 3.0) * t2 + (64.0 / 15.0) * t2 * t2
        } else {
            (2.0 * theta).tanh() / theta
        }
    }

    pub fn rhs(&self, kappa0: f64) -> f64 {
        (self.beta - self.alpha) / (2.0 * self.omega * self.kappa - (self.alpha + self.beta) * kappa0)
    }

    fn raw(&self, kappa0: f64) -> f64 {
        self.lhs(kappa0) - self.rhs(kappa0)
    }

    /// `F(kappa0) = lhs - rhs`; errors outside `kappa0^2 > 4 kappa^2` and at
    /// the pole.
    pub fn value(&self, kappa0: f64) -> Result<f64, MetricError> {
        let den = 2.0 * self.omega * self.kappa - (self.alpha + self.beta) * kappa0;
        if !(kappa0 * kappa0 > 4.0 * self.kappa * self.kappa) || den == 0.0 {
            return Err(MetricError::ExcludedPoint { kappa0 });
        }
        Ok(self.raw(kappa0))
    }
}

pub fn kappa0_constraint(
    spec: &AmplifierSpec,
    kappa: f64,
    t: f64,
) -> Result<Kappa0Constraint, MetricError> {
    Ok(Kappa0Constraint::from_params(&spec.params_at(t)?, kappa))
}

fn is_hermitian(p: &AmplifierParams) -> bool {
    (p.alpha - p.beta).abs() <= 1e-14 * (1.0 + p.alpha.abs() + p.beta.abs())
}

/// Upper end of the bracket scan for `kappa0`.
pub fn kappa0_scan_limit(kappa: f64) -> f64 {
    100.0 * kappa.abs() + 100.0
}

const SCAN_UNIFORM: usize = 2048;
const SCAN_LOG: usize = 512;

/// Smallest admissible `kappa0` root for the given parameter point.
///
/// Hermitian input (`alpha == beta`) returns the identity metric.
pub fn solve_metric_params(
    p: &AmplifierParams,
    kappa: f64,
    tol: f64,
) -> Result<MetricParams, MetricError> {
    if is_hermitian(p) {
        return Ok(MetricParams::identity());
    }
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(MetricError::ZeroKappa);
    }
    let c = Kappa0Constraint::from_params(p, kappa);
    let lo = c.lower_bound() * (1.0 + 1e-9);
    let hi = kappa0_scan_limit(kappa);

    let mut xs: Vec<f64> = Vec::with_capacity(SCAN_UNIFORM + SCAN_LOG + 2);
    for k in 0..=SCAN_UNIFORM {
        xs.push(lo + (hi - lo) * k as f64 / SCAN_UNIFORM as f64);
    }
    let (d0, d1) = ((lo * 1e-9).max(1e-12), hi - lo);
    for k in 0..SCAN_LOG {
        xs.push(lo + d0 * (d1 / d0).powf(k as f64 / SCAN_LOG as f64));
    }
    let pole = c.pole().filter(|&x| x > lo && x < hi);
    if let Some(x) = pole {
        let eps = 1e-12 * x.abs();
        xs.push(x - eps);
        xs.push(x + eps);
    }
    xs.retain(|&x| x >= lo && x <= hi);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();

    let f = |x: f64| c.raw(x);
    let mut prev: Option<(f64, f64)> = None;
    for &x in &xs {
        let fx = f(x);
        if let Some((xp, fp)) = prev {
            let across_pole = pole.is_some_and(|q| xp < q && x > q);
            if !across_pole && fp.is_finite() && fx.is_finite() {
                if fp == 0.0 {
                    return MetricParams::new(kappa, xp);
                }
                if fp * fx < 0.0 {
                    let root = find_root(f, xp, x, tol)?;
                    return MetricParams::new(kappa, root);
                }
            }
        }
        prev = Some((x, fx));
    }
    Err(MetricError::NoMetric { kappa, lo, hi, samples: xs.len(), pole })
}

pub fn solve_metric(
    spec: &AmplifierSpec,
    kappa: f64,
    t: f64,
    tol: f64,
) -> Result<MetricParams, MetricError> {
    solve_metric_params(&spec.params_at(t)?, kappa, tol)
}

/// Root nearest to `hint`, searched in an expanding bracket that never
/// crosses the pole; falls back to the smallest root.
fn solve_near(
    p: &AmplifierParams,
    kappa: f64,
    tol: f64,
    hint: f64,
) -> Result<MetricParams, MetricError> {
    if is_hermitian(p) {
        return Ok(MetricParams::identity());
    }
    let c = Kappa0Constraint::from_params(p, kappa);
    let lo = c.lower_bound() * (1.0 + 1e-9);
    let hi = kappa0_scan_limit(kappa);
    let pole = c.pole();
    let f = |x: f64| c.raw(x);
    let mut width = 1e-3 * hint.abs().max(1e-3);
    while width < 0.5 * hint.abs() {
        let mut a = (hint - width).max(lo);
        let mut b = (hint + width).min(hi);
        if let Some(q) = pole {
            if a < q && b > q {
                if hint < q {
                    b = q - 1e-12 * q.abs();
                } else {
                    a = q + 1e-12 * q.abs();
                }
            }
        }
        let (fa, fb) = (f(a), f(b));
        if fa.is_finite() && fb.is_finite() && fa * fb <= 0.0 {
            let root = find_root(f, a, b, tol)?;
            return MetricParams::new(kappa, root);
        }
        width *= 4.0;
    }
    solve_metric_params(p, kappa, tol)
}

/// Coefficients of the transformed Hamiltonian
/// `omega0 (a†a + 1/2) + alpha0 a^2 + beta0 a†^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitizedCoeffs {
    /// From the reduced closed forms (matrix route for the identity metric).
    pub omega0: f64,
    pub alpha0: f64,
    /// Third row of `k (omega, alpha, beta)^T`.
    pub beta0: f64,
    /// `|alpha0 - beta0|` from the matrix route.
    pub hermiticity_residual: f64,
    /// Largest deviation between closed-form and matrix-route `(omega0, alpha0)`.
    pub closed_form_deviation: f64,
}

/// Reduced closed forms for `(omega0, alpha0)`, valid once the constraint holds.
pub fn reduced_coeffs(p: &AmplifierParams, m: &MetricParams) -> (f64, f64) {
    let (w, a, b) = (p.omega, p.alpha, p.beta);
    let (k, k0, th) = (m.kappa, m.kappa0, m.theta);
    let nu = a + b;
    let ch = (2.0 * th).cosh();
    let tt = th * (2.0 * th).tanh();
    let th2 = th * th;
    let omega0 = (k0 * (w * k0 - 2.0 * k * nu) + 2.0 * k * (k0 * nu + (b - a) * tt - 2.0 * w * k) * ch) / th2;
    let alpha0 = (k * (w * k0 - 2.0 * k * nu) + ch * ((w * k - a * k0) * (tt - k0) + 2.0 * k * k * (b - a))) / th2;
    (omega0, alpha0)
}

pub fn hermitized_coeffs_params(
    p: &AmplifierParams,
    m: &MetricParams,
    tol: f64,
) -> Result<HermitizedCoeffs, MetricError> {
    let [w0, a0, b0] = k_matrix_closed(m).mul_vec([p.omega, p.alpha, p.beta]);
    let (omega0, alpha0) = if m.is_identity() || m.theta < SERIES_THETA {
        (w0, a0)
    } else {
        reduced_coeffs(p, m)
    };
    let residual = (a0 - b0).abs();
    if !(residual <= tol) {
        return Err(MetricError::HermitizationFailure { residual, tol });
    }
    Ok(HermitizedCoeffs {
        omega0,
        alpha0,
        beta0: b0,
        hermiticity_residual: residual,
        closed_form_deviation: (omega0 - w0).abs().max((alpha0 - a0).abs()),
    })
}

pub fn hermitized_coeffs(
    spec: &AmplifierSpec,
    m: &MetricParams,
    t: f64,
    tol: f64,
) -> Result<HermitizedCoeffs, MetricError> {
    hermitized_coeffs_params(&spec.params_at(t)?, m, tol)
}

/// Effective Hermitian oscillator `p^2/(2 M0) + M0 Omega0^2 x^2 / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianOscillator {
    pub m0: f64,
    pub omega0_sq: f64,
}

impl HermitianOscillator {
    /// Negative squared frequency: an inverted oscillator.
    pub fn is_inverted(&self) -> bool {
        self.omega0_sq < 0.0
    }
}

pub fn hermitian_oscillator_params(
    c: &HermitizedCoeffs,
    p: &AmplifierParams,
) -> Result<HermitianOscillator, MetricError> {
    let den = c.omega0 - 2.0 * c.alpha0;
    if den.abs() <= 4.0 * f64::EPSILON * c.omega0.abs().max(f64::MIN_POSITIVE) {
        return Err(MetricError::DegenerateMass { omega0: c.omega0 });
    }
    Ok(HermitianOscillator {
        m0: p.mass * p.omega / den,
        omega0_sq: c.omega0 * c.omega0 - 4.0 * c.alpha0 * c.alpha0,
    })
}

pub fn hermitian_oscillator(
    c: &HermitizedCoeffs,
    spec: &AmplifierSpec,
    t: f64,
) -> Result<HermitianOscillator, MetricError> {
    hermitian_oscillator_params(c, &spec.params_at(t)?)
}

/// Everything the pipeline derives at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartnerPoint {
    pub t: f64,
    pub metric: MetricParams,
    pub coeffs: HermitizedCoeffs,
    pub oscillator: HermitianOscillator,
    /// The warm-started root differs from the smallest admissible root.
    pub branch_jump: bool,
}

/// Time-dependent Hermitian partner, re-solving the metric pointwise.
///
/// Consecutive evaluations warm-start from the previous root.
pub struct HermitianPartner {
    spec: AmplifierSpec,
    kappa: f64,
    tol: f64,
    hermiticity_tol: f64,
    last_root: Mutex<Option<f64>>,
}

impl HermitianPartner {
    pub fn new(spec: AmplifierSpec, kappa: f64, tol: f64) -> Self {
        HermitianPartner { spec, kappa, tol, hermiticity_tol: 1e-6, last_root: Mutex::new(None) }
    }

    pub fn spec(&self) -> &AmplifierSpec {
        &self.spec
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn metric_at(&self, p: &AmplifierParams) -> Result<MetricParams, MetricError> {
        let hint = *self.last_root.lock().unwrap();
        let m = match hint {
            Some(h) if h > 0.0 => solve_near(p, self.kappa, self.tol, h)?,
            _ => solve_metric_params(p, self.kappa, self.tol)?,
        };
        if !m.is_identity() {
            *self.last_root.lock().unwrap() = Some(m.kappa0);
        }
        Ok(m)
    }

    pub fn solve_at(&self, t: f64) -> Result<PartnerPoint, MetricError> {
        let p = self.spec.params_at(t)?;
        let metric = self.metric_at(&p)?;
        let fresh = solve_metric_params(&p, self.kappa, self.tol)?;
        let branch_jump = (fresh.kappa0 - metric.kappa0).abs() > 1e-6 * (1.0 + fresh.kappa0.abs());
        let coeffs = hermitized_coeffs_params(&p, &metric, self.hermiticity_tol)?;
        let oscillator = hermitian_oscillator_params(&coeffs, &p)?;
        Ok(PartnerPoint { t, metric, coeffs, oscillator, branch_jump })
    }

    /// Sequential sweep over `times`, warm-starting each solve.
    pub fn track(&self, times: &[f64]) -> Result<Vec<PartnerPoint>, MetricError> {
        times.iter().map(|&t| self.solve_at(t)).collect()
    }

    fn oscillator_at(&self, t: f64) -> Option<HermitianOscillator> {
        let p = self.spec.params_at(t).ok()?;
        let m = self.metric_at(&p).ok()?;
        let c = hermitized_coeffs_params(&p, &m, self.hermiticity_tol).ok()?;
        hermitian_oscillator_params(&c, &p).ok()
    }

    pub fn mass_signal(&self) -> PartnerMass<'_> {
        PartnerMass(self)
    }

    pub fn frequency_sq_signal(&self) -> PartnerFrequencySq<'_> {
        PartnerFrequencySq(self)
    }
}

/// `M0(t)` of a [`HermitianPartner`]; NaN where the metric cannot be solved.
pub struct PartnerMass<'a>(&'a HermitianPartner);
/// `Omega0^2(t)` of a [`HermitianPartner`].
pub struct PartnerFrequencySq<'a>(&'a HermitianPartner);

impl Signal for PartnerMass<'_> {
    fn value(&self, t: f64) -> f64 {
        self.0.oscillator_at(t).map_or(f64::NAN, |o| o.m0)
    }
    fn domain(&self) -> (f64, f64) {
        self.0.spec.domain()
    }
}

impl Signal for PartnerFrequencySq<'_> {
    fn value(&self, t: f64) -> f64 {
        self.0.oscillator_at(t).map_or(f64::NAN, |o| o.omega0_sq)
    }
    fn domain(&self) -> (f64, f64) {
        self.0.spec.domain()
    }
}

/// `k` computed through the matrix exponential instead of closed forms.
pub fn k_matrix_exp(p: &MetricParams) -> Result<Matrix3, MetricError> {
    Ok(numerics::mat_exp(&p.generator())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params() -> AmplifierParams {
        AmplifierParams { omega: 1.0, alpha: 0.1, beta: 0.2, mass: 1.0 }
    }

    #[test]
    fn diagonal_generator() {
        let m = MetricParams::new(0.0, 1.0).unwrap();
        assert_eq!(m.theta, 1.0);
        let k = k_matrix_closed(&m);
        let e = std::f64::consts::E;
        assert!(k.max_abs_diff(&Matrix3::diag([1.0, 1.0 / (e * e), e * e])) < 1e-14);
    }

    #[test]
    fn identity_limit() {
        let k = k_matrix_closed(&MetricParams::identity());
        assert!(k.max_abs_diff(&Matrix3::identity()) < 1e-15);
        assert!(MetricParams::new(1.0, 2.0).is_err());
        assert!(MetricParams::new(1.0, -2.5).is_ok());
    }

    #[test]
    fn closed_form_matches_exponential() {
        for &(k, k0) in &[(1.0, 5.10208), (-0.7, 1.5), (0.3, 0.6000001), (2.0, 4.0 + 1e-9), (0.1, 7.0)] {
            let m = MetricParams::new(k, k0).unwrap();
            let closed = k_matrix_closed(&m);
            let exp = k_matrix_exp(&m).unwrap();
            let scale = exp.max_abs().max(1.0);
            assert!(closed.max_abs_diff(&exp) <= 1e-9 * scale, "k={k} k0={k0}");
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        let k: f64 = 0.5;
        for &th in &[0.99e-4, 1.01e-4] {
            let k0 = (th * th + 4.0 * k * k).sqrt();
            let m = MetricParams::new(k, k0).unwrap();
            let exp = k_matrix_exp(&m).unwrap();
            assert!(k_matrix_closed(&m).max_abs_diff(&exp) < 1e-10);
        }
    }

    #[test]
    fn reference_root() {
        let m = solve_metric_params(&reference_params(), 1.0, 1e-13).unwrap();
        assert!((m.kappa0 - 5.10208).abs() < 1e-4, "{}", m.kappa0);
        assert!((m.theta - (m.kappa0 * m.kappa0 - 4.0).sqrt()).abs() < 1e-14);
        let c = Kappa0Constraint::from_params(&reference_params(), 1.0);
        assert!(c.value(m.kappa0).unwrap().abs() <= 1e-8);
    }

    #[test]
    fn constraint_bracket_and_pole() {
        let c = Kappa0Constraint::from_params(&reference_params(), 1.0);
        let pole = c.pole().unwrap();
        assert!((pole - 20.0 / 3.0).abs() < 1e-14);
        // Both ends of [3, 8] are positive; the pole sits between them.
        assert!(c.value(3.0).unwrap() > 0.0 && c.value(8.0).unwrap() > 0.0);
        // Below the pole the root is bracketed.
        assert!(c.value(3.0).unwrap() * c.value(6.5).unwrap() < 0.0);
        assert!(matches!(c.value(pole), Err(MetricError::ExcludedPoint { .. })));
        assert!(matches!(c.value(1.5), Err(MetricError::ExcludedPoint { .. })));
    }

    #[test]
    fn hermitian_input_gives_identity() {
        let p = AmplifierParams { omega: 1.0, alpha: 0.1, beta: 0.1, mass: 1.0 };
        let m = solve_metric_params(&p, 1.0, 1e-12).unwrap();
        assert!(m.is_identity());
        let c = hermitized_coeffs_params(&p, &m, 1e-12).unwrap();
        assert_eq!((c.omega0, c.alpha0), (1.0, 0.1));
    }

    #[test]
    fn continuity_in_beta() {
        let a = solve_metric_params(&reference_params(), 1.0, 1e-13).unwrap();
        let mut q = reference_params();
        q.beta = 0.2001;
        let b = solve_metric_params(&q, 1.0, 1e-13).unwrap();
        assert!((a.kappa0 - b.kappa0).abs() < 1e-2);
        let c = Kappa0Constraint::from_params(&q, 1.0);
        assert!(c.value(b.kappa0).unwrap().abs() < 1e-8);
    }

    #[test]
    fn reduced_forms_match_matrix_route() {
        let p = reference_params();
        let m = solve_metric_params(&p, 1.0, 1e-14).unwrap();
        let c = hermitized_coeffs_params(&p, &m, 1e-6).unwrap();
        assert!(c.closed_form_deviation <= 1e-8, "{}", c.closed_form_deviation);
        assert!(c.hermiticity_residual <= 1e-6);
    }

    #[test]
    fn hermitization_failure_reported() {
        let p = reference_params();
        let m = MetricParams::new(1.0, 4.0).unwrap();
        assert!(matches!(
            hermitized_coeffs_params(&p, &m, 1e-6),
            Err(MetricError::HermitizationFailure { .. })
        ));
    }

    #[test]
    fn oscillator_examples() {
        let p = AmplifierParams { omega: 1.0, alpha: 0.0, beta: 0.0, mass: 1.0 };
        let c = HermitizedCoeffs {
            omega0: 1.0,
            alpha0: 0.25,
            beta0: 0.25,
            hermiticity_residual: 0.0,
            closed_form_deviation: 0.0,
        };
        let o = hermitian_oscillator_params(&c, &p).unwrap();
        assert!((o.m0 - 2.0).abs() < 1e-15 && (o.omega0_sq - 0.75).abs() < 1e-15);
        let c0 = HermitizedCoeffs { alpha0: 0.0, omega0: 1.5, ..c };
        let o = hermitian_oscillator_params(&c0, &p).unwrap();
        assert!((o.m0 - 1.0 / 1.5).abs() < 1e-15 && (o.omega0_sq - 2.25).abs() < 1e-15);
        let bad = HermitizedCoeffs { alpha0: 0.5, ..c };
        assert!(matches!(hermitian_oscillator_params(&bad, &p), Err(MetricError::DegenerateMass { .. })));
    }

    #[test]
    fn broken_regime_reports_no_metric() {
        // alpha, beta of opposite sign: no root in the scanned range.
        let p = AmplifierParams { omega: 1.0, alpha: 0.3, beta: -0.2, mass: 1.0 };
        match solve_metric_params(&p, 1.0, 1e-12) {
            Err(MetricError::NoMetric { .. }) => {}
            other => panic!("expected NoMetric, got {other:?}"),
        }
        assert_eq!(solve_metric_params(&reference_params(), 0.0, 1e-12), Err(MetricError::ZeroKappa));
    }

    #[test]
    fn partner_tracks_modulated_parameters() {
        use crate::signals::ParameterSignal;
        let spec = AmplifierSpec {
            omega: ParameterSignal::constant(1.0),
            alpha: ParameterSignal::constant(0.1),
            beta: ParameterSignal::Cosine { amp: 0.02, freq: 1.0, phase: 0.0, offset: 0.2 },
            mass: ParameterSignal::constant(1.0),
        };
        let partner = HermitianPartner::new(spec, 1.0, 1e-13);
        let times: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let pts = partner.track(&times).unwrap();
        assert!(pts.iter().all(|p| !p.branch_jump));
        let m0 = partner.mass_signal();
        assert!((m0.value(1.0) - pts[10].oscillator.m0).abs() < 1e-10);
    }
}
