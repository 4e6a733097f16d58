//! Time-dependent amplifier parameters and the PT-regime classification.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("t = {t} lies outside the signal domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("degenerate equivalent mass at t = {t}: omega equals alpha + beta")]
    DegenerateMass { t: f64 },
    #[error("{name}(t) must be positive, got {value} at t = {t}")]
    NonPositive { name: &'static str, t: f64, value: f64 },
    #[error("signal {name} is not finite at t = {t}")]
    NonFinite { name: &'static str, t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A real function of time with a declared domain.
///
/// `value` returns NaN outside the domain; `try_value` reports it.
pub trait Signal: Send + Sync {
    fn value(&self, t: f64) -> f64;

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Time derivative. The default is a Richardson-extrapolated central
    /// difference with step 1e-6 times the local time scale.
    fn derivative(&self, t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1.0);
        numerics::derivative(|s| self.value(s), t, h, self.domain())
    }

    fn try_value(&self, t: f64) -> Result<f64, SignalError> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(SignalError::OutOfDomain { t, lo, hi });
        }
        Ok(self.value(t))
    }
}

impl<S: Signal + ?Sized> Signal for &S {
    fn value(&self, t: f64) -> f64 {
        (**self).value(t)
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
    fn derivative(&self, t: f64) -> f64 {
        (**self).derivative(t)
    }
}

/// Closure-backed signal, for derived quantities.
pub struct FnSignal<F> {
    f: F,
    domain: (f64, f64),
}

impl<F: Fn(f64) -> f64 + Send + Sync> FnSignal<F> {
    pub fn new(f: F, domain: (f64, f64)) -> Self {
        FnSignal { f, domain }
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> Signal for FnSignal<F> {
    fn value(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain;
        if t >= lo && t <= hi {
            (self.f)(t)
        } else {
            f64::NAN
        }
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// Tabulated samples interpolated by piecewise cubic Hermite polynomials
/// with finite-difference slopes. No extrapolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct Table {
    t: Vec<f64>,
    v: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl TryFrom<RawTable> for Table {
    type Error = SignalError;
    fn try_from(raw: RawTable) -> Result<Self, SignalError> {
        Table::new(raw.t, raw.v)
    }
}

impl From<Table> for RawTable {
    fn from(t: Table) -> Self {
        RawTable { t: t.t, v: t.v }
    }
}

impl Table {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self, SignalError> {
        if t.len() != v.len() {
            return Err(SignalError::InvalidTable(format!(
                "t has {} samples but v has {}",
                t.len(),
                v.len()
            )));
        }
        if t.len() < 2 {
            return Err(SignalError::InvalidTable("need at least two samples".into()));
        }
        if t.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(SignalError::InvalidTable("samples must be finite".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SignalError::InvalidTable("t must be strictly increasing".into()));
        }
        let slopes = fd_slopes(&t, &v);
        Ok(Table { t, v, slopes })
    }

    fn locate(&self, x: f64) -> usize {
        let i = self.t.partition_point(|&s| s <= x);
        i.clamp(1, self.t.len() - 1) - 1
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let i = self.locate(x);
        let h = self.t[i + 1] - self.t[i];
        let s = (x - self.t[i]) / h;
        let (y0, y1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let u = 1.0 - s;
        let val = (1.0 + 2.0 * s) * u * u * y0 + s * u * u * m0 + s * s * (3.0 - 2.0 * s) * y1
            - s * s * u * m1;
        let der = (6.0 * s * (s - 1.0) * (y0 - y1) + u * (1.0 - 3.0 * s) * m0
            + s * (3.0 * s - 2.0) * m1)
            / h;
        (val, der)
    }
}

/// Slopes of the local interpolating parabola through neighbouring samples.
fn fd_slopes(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n == 2 {
        let m = (v[1] - v[0]) / (t[1] - t[0]);
        return vec![m, m];
    }
    let parabola = |i0: usize, x: f64| {
        let (x0, x1, x2) = (t[i0], t[i0 + 1], t[i0 + 2]);
        let (y0, y1, y2) = (v[i0], v[i0 + 1], v[i0 + 2]);
        y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| {
            let i0 = i.saturating_sub(1).min(n - 3);
            parabola(i0, t[i])
        })
        .collect()
}

/// A parameter signal as described in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ParameterSignal {
    Constant {
        value: f64,
    },
    /// `amp * cos(freq * t + phase) + offset`
    Cosine {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `coeff * t^power`; restricted to t > 0 unless `power` is a
    /// nonnegative integer.
    Toy {
        coeff: f64,
        power: f64,
    },
    Table(Table),
    /// `offset + scale * of(t)`
    Affine {
        offset: f64,
        scale: f64,
        of: Box<ParameterSignal>,
    },
}

impl ParameterSignal {
    pub fn constant(value: f64) -> Self {
        ParameterSignal::Constant { value }
    }

    pub fn cosine(amp: f64, freq: f64, phase: f64) -> Self {
        ParameterSignal::Cosine { amp, freq, phase, offset: 0.0 }
    }

    pub fn toy(coeff: f64, power: f64) -> Self {
        ParameterSignal::Toy { coeff, power }
    }

    pub fn table(t: Vec<f64>, v: Vec<f64>) -> Result<Self, SignalError> {
        Ok(ParameterSignal::Table(Table::new(t, v)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ParameterSignal::Constant { .. } => "constant",
            ParameterSignal::Cosine { .. } => "cosine",
            ParameterSignal::Toy { .. } => "toy",
            ParameterSignal::Table(_) => "table",
            ParameterSignal::Affine { .. } => "affine",
        }
    }

    fn raw(&self, t: f64) -> f64 {
        match self {
            ParameterSignal::Constant { value } => *value,
            ParameterSignal::Cosine { amp, freq, phase, offset } => {
                amp * (freq * t + phase).cos() + offset
            }
            ParameterSignal::Toy { coeff, power } => coeff * t.powf(*power),
            ParameterSignal::Table(tab) => tab.eval(t).0,
            ParameterSignal::Affine { offset, scale, of } => offset + scale * of.raw(t),
        }
    }

    fn raw_derivative(&self, t: f64) -> f64 {
        match self {
            ParameterSignal::Constant { .. } => 0.0,
            ParameterSignal::Cosine { amp, freq, phase, .. } => -amp * freq * (freq * t + phase).sin(),
            ParameterSignal::Toy { coeff, power } => {
                if *power == 0.0 {
                    0.0
                } else {
                    coeff * power * t.powf(power - 1.0)
                }
            }
            ParameterSignal::Table(tab) => tab.eval(t).1,
            ParameterSignal::Affine { scale, of, .. } => scale * of.raw_derivative(t),
        }
    }
}

impl Signal for ParameterSignal {
    fn value(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        if t >= lo && t <= hi {
            self.raw(t)
        } else {
            f64::NAN
        }
    }

    fn domain(&self) -> (f64, f64) {
        match self {
            ParameterSignal::Toy { power, .. } => {
                if *power >= 0.0 && power.fract() == 0.0 {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (f64::MIN_POSITIVE, f64::INFINITY)
                }
            }
            ParameterSignal::Table(tab) => (tab.t[0], *tab.t.last().unwrap()),
            ParameterSignal::Affine { of, .. } => of.domain(),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        if t >= lo && t <= hi {
            self.raw_derivative(t)
        } else {
            f64::NAN
        }
    }
}

/// Largest `|s(t) - s(-t)|` over the symmetric part of the domain, sampled
/// on `samples` points of `[0, t_max]`. `None` when the domain has no
/// symmetric part.
pub fn evenness_defect(s: &dyn Signal, t_max: f64, samples: usize) -> Option<f64> {
    let (lo, hi) = s.domain();
    let reach = t_max.min(-lo).min(hi);
    if !(reach > 0.0) {
        return None;
    }
    let n = samples.max(2);
    Some(
        (0..n)
            .map(|k| {
                let t = reach * k as f64 / (n - 1) as f64;
                (s.value(t) - s.value(-t)).abs()
            })
            .fold(0.0, f64::max),
    )
}

/// Parameter values at a single time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplifierParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mass: f64,
}

impl AmplifierParams {
    pub fn nu_plus(&self) -> f64 {
        self.alpha + self.beta
    }
    pub fn nu_minus(&self) -> f64 {
        self.alpha - self.beta
    }
}

/// The four input signals of the amplifier Hamiltonian (hbar = 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifierSpec {
    pub omega: ParameterSignal,
    pub alpha: ParameterSignal,
    pub beta: ParameterSignal,
    pub mass: ParameterSignal,
}

impl AmplifierSpec {
    pub fn constant(omega: f64, alpha: f64, beta: f64, mass: f64) -> Self {
        AmplifierSpec {
            omega: ParameterSignal::constant(omega),
            alpha: ParameterSignal::constant(alpha),
            beta: ParameterSignal::constant(beta),
            mass: ParameterSignal::constant(mass),
        }
    }

    /// Intersection of the four signal domains.
    pub fn domain(&self) -> (f64, f64) {
        [&self.omega, &self.alpha, &self.beta, &self.mass]
            .iter()
            .map(|s| s.domain())
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), (c, d)| (a.max(c), b.min(d)))
    }

    /// Evaluates all signals at `t`, enforcing `mass > 0` and `omega > 0`.
    pub fn params_at(&self, t: f64) -> Result<AmplifierParams, SignalError> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(SignalError::OutOfDomain { t, lo, hi });
        }
        let p = AmplifierParams {
            omega: self.omega.value(t),
            alpha: self.alpha.value(t),
            beta: self.beta.value(t),
            mass: self.mass.value(t),
        };
        for (name, v) in [("omega", p.omega), ("alpha", p.alpha), ("beta", p.beta), ("mass", p.mass)] {
            if !v.is_finite() {
                return Err(SignalError::NonFinite { name, t });
            }
        }
        if !(p.mass > 0.0) {
            return Err(SignalError::NonPositive { name: "mass", t, value: p.mass });
        }
        if !(p.omega > 0.0) {
            return Err(SignalError::NonPositive { name: "omega", t, value: p.omega });
        }
        Ok(p)
    }
}

/// Position-momentum form of the amplifier: mass, squared frequency (may be
/// negative) and the symmetric/antisymmetric amplification rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivalentForm {
    pub mass: f64,
    pub omega_sq: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
}

impl EquivalentForm {
    pub fn from_params(p: &AmplifierParams, t: f64) -> Result<Self, SignalError> {
        let nu_plus = p.nu_plus();
        let inv_mass = (1.0 - nu_plus / p.omega) / p.mass;
        if (p.omega - nu_plus).abs() <= 4.0 * f64::EPSILON * p.omega.abs() {
            return Err(SignalError::DegenerateMass { t });
        }
        Ok(EquivalentForm {
            mass: 1.0 / inv_mass,
            omega_sq: p.omega * p.omega - nu_plus * nu_plus,
            nu_plus,
            nu_minus: p.nu_minus(),
        })
    }
}

pub fn equivalent_form(spec: &AmplifierSpec, t: f64) -> Result<EquivalentForm, SignalError> {
    EquivalentForm::from_params(&spec.params_at(t)?, t)
}

/// Coefficients of the Hamiltonian as a bilinear form over (x, p):
/// `h11 x^2 + h12 x p + h21 p x + h22 p^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearForm {
    pub h11: f64,
    pub h22: f64,
    pub h12: Complex64,
    pub h21: Complex64,
}

impl BilinearForm {
    /// Built from the bare parameters; finite even where the equivalent mass
    /// diverges (then `h22 = 0`).
    pub fn from_params(p: &AmplifierParams) -> Self {
        let cross = Complex64::new(0.0, 0.5 * p.nu_minus());
        BilinearForm {
            h11: 0.5 * p.mass * p.omega * (p.omega + p.nu_plus()),
            h22: (p.omega - p.nu_plus()) / (2.0 * p.mass * p.omega),
            h12: cross,
            h21: cross,
        }
    }

    pub fn from_equivalent(e: &EquivalentForm) -> Self {
        let cross = Complex64::new(0.0, 0.5 * e.nu_minus);
        BilinearForm {
            h11: 0.5 * e.mass * e.omega_sq,
            h22: 0.5 / e.mass,
            h12: cross,
            h21: cross,
        }
    }

    /// `(Re tau)^2 - 4 Re Delta`.
    pub fn discriminant(&self) -> f64 {
        let tau = self.h11 + self.h22;
        let delta = Complex64::new(self.h11 * self.h22, 0.0) - self.h12 * self.h21;
        tau * tau - 4.0 * delta.re
    }
}

/// Unbroken-PT test on the bilinear-form coefficients.
pub fn pt_unbroken(h11: f64, h22: f64, h12: Complex64, h21: Complex64) -> bool {
    BilinearForm { h11, h22, h12, h21 }.discriminant() >= 0.0
}

/// Unbroken-PT classification of a parameter point: the discriminant test
/// together with a nonnegative inverse equivalent mass.
pub fn pt_unbroken_amplifier(p: &AmplifierParams) -> bool {
    let h = BilinearForm::from_params(p);
    pt_unbroken(h.h11, h.h22, h.h12, h.h21) && h.h22 >= 0.0
}

/// The closed-form amplification constraint `alpha beta (1 - alpha - beta) >= 0`.
pub fn amplification_constraint(alpha: f64, beta: f64) -> bool {
    alpha * beta * (1.0 - alpha - beta) >= 0.0
}

/// Boolean grid over the (alpha, beta) plane at unit bare mass and frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct PtRegion {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major, alpha outer.
    pub unbroken: Vec<bool>,
}

impl PtRegion {
    pub fn at(&self, i: usize, j: usize) -> bool {
        self.unbroken[i * self.betas.len() + j]
    }
}

pub fn grid_points(range: (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                range.1
            } else {
                range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn pt_region_scan(
    alpha_range: (f64, f64),
    beta_range: (f64, f64),
    n: usize,
) -> Result<PtRegion, SignalError> {
    if n < 2 {
        return Err(SignalError::InvalidArgument(format!("grid size must be >= 2, got {n}")));
    }
    let alphas = grid_points(alpha_range, n);
    let betas = grid_points(beta_range, n);
    let mut unbroken = Vec::with_capacity(n * n);
    for &alpha in &alphas {
        for &beta in &betas {
            unbroken.push(pt_unbroken_amplifier(&AmplifierParams {
                omega: 1.0,
                alpha,
                beta,
                mass: 1.0,
            }));
        }
    }
    Ok(PtRegion { alphas, betas, unbroken })
}

/// Weakly modulated oscillator realized as an amplifier spec:
/// m = m0 (1 + eps f), omega = omega0 (1 + eps f / 2),
/// alpha = beta = omega0 eps f / 2.
pub fn modulated_spec(m0: f64, omega0: f64, eps: f64, f: ParameterSignal) -> AmplifierSpec {
    if eps.abs() > 0.2 {
        log::warn!("modulation amplitude {eps} exceeds 0.2; first-order realization is inaccurate");
    }
    let affine = |offset: f64, scale: f64| ParameterSignal::Affine {
        offset,
        scale,
        of: Box::new(f.clone()),
    };
    AmplifierSpec {
        omega: affine(omega0, 0.5 * omega0 * eps),
        alpha: affine(0.0, 0.5 * omega0 * eps),
        beta: affine(0.0, 0.5 * omega0 * eps),
        mass: affine(m0, m0 * eps),
    }
}
