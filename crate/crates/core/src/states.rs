//! Invariant eigenfunctions, Lewis-Riesenfeld phases, the assembled
//! Schrödinger solution and second-moment diagnostics.
//!
//! Conventions: `hbar = 1`, `p = -i d/dx`, the Hermitian partner is
//! `H = p^2/(2 M0) + M0 Omega0^2 x^2 / 2`, and the mode parameter is
//! `g = (eta0 + i g3)/g1`. Its real part is positive on every solution, so
//! the principal branches of `g^(1/4)` and `g^(1/2)` are continuous in time.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::ep::{lr_rhs, EpError, EpSolution, GCoefficients, ToyBranch, ToyModel, ToyVariant};
use crate::numerics::{hermite, hermite_generic, quad_with, NumericsError, QuadOptions};
use crate::signals::{ParameterSignal, Signal};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatesError {
    #[error("non-normalizable mode: Re g = {re} <= 0")]
    NonNormalizable { re: f64 },
    #[error("parameter domain: r_g = {r_g} < 1 at t = {t}")]
    ParameterDomain { r_g: f64, t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Ep(#[from] EpError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which eigenfunction formula to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhiForm {
    /// `(g_r/pi)^(1/4)/sqrt(2^n n!) e^{-g x^2/2} H_n(sqrt(g_r) x)`: normalized
    /// eigenfunctions of the invariant.
    Eigen,
    /// `(g/pi)^(1/4)/sqrt(2^n n!) e^{-g x^2/2} H_n(sqrt(g) x)` with complex
    /// roots: the printed form, neither normalized nor an eigenfunction for
    /// `n >= 2` when `g` is complex.
    Printed,
}

fn hermite_norm(n: usize) -> f64 {
    let mut f = 1.0;
    for k in 1..=n {
        f *= 2.0 * k as f64;
    }
    f.sqrt()
}

fn check_mode(g: Complex64) -> Result<(), StatesError> {
    if !(g.re > 0.0) {
        return Err(StatesError::NonNormalizable { re: g.re });
    }
    Ok(())
}

fn phi_parts(n: usize, g: Complex64, form: PhiForm) -> (Complex64, Complex64) {
    match form {
        PhiForm::Eigen => {
            let c = (g.re / PI).powf(0.25) / hermite_norm(n);
            (Complex64::new(c, 0.0), Complex64::new(g.re.sqrt(), 0.0))
        }
        PhiForm::Printed => ((g / PI).powf(0.25) / hermite_norm(n), g.sqrt()),
    }
}

fn hermite_c(n: usize, z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        Complex64::new(hermite(n, z.re), 0.0)
    } else {
        hermite_generic(n, z)
    }
}

/// `phi_n(x)` for mode parameter `g`.
pub fn phi_n(n: usize, x: f64, g: Complex64, form: PhiForm) -> Result<Complex64, StatesError> {
    check_mode(g)?;
    Ok(phi_unchecked(n, x, g, form))
}

fn phi_unchecked(n: usize, x: f64, g: Complex64, form: PhiForm) -> Complex64 {
    let (c, s) = phi_parts(n, g, form);
    c * (-g * (0.5 * x * x)).exp() * hermite_c(n, s * x)
}

/// `d phi_n / dx`, from `H_n' = 2n H_{n-1}`.
pub fn phi_n_dx(n: usize, x: f64, g: Complex64, form: PhiForm) -> Result<Complex64, StatesError> {
    check_mode(g)?;
    Ok(phi_dx_unchecked(n, x, g, form))
}

fn phi_dx_unchecked(n: usize, x: f64, g: Complex64, form: PhiForm) -> Complex64 {
    let (c, s) = phi_parts(n, g, form);
    let e = (-g * (0.5 * x * x)).exp();
    let lower = if n == 0 { Complex64::new(0.0, 0.0) } else { s * hermite_c(n - 1, s * x) * (2.0 * n as f64) };
    c * e * (lower - g * x * hermite_c(n, s * x))
}

/// Ground state written through `eta` directly.
pub fn phi0_ground(x: f64, eta: f64, etadot: f64, m0: f64, eta0: f64) -> Complex64 {
    let a = (eta0 / PI).powf(0.25) / eta.sqrt();
    let expo = Complex64::new(eta0, -m0 * eta * etadot) * (-(x * x) / (2.0 * eta * eta));
    a * expo.exp()
}

fn x_options(g: Complex64, tol: f64) -> QuadOptions {
    let mut o = QuadOptions::new(tol).with_scale(1.0 / g.re.sqrt()).with_breakpoints([0.0]);
    o.rel_tol = 1e-13;
    o.tail_threshold = 1e-16;
    o
}

/// `int phi_m^* phi_n dx` by adaptive quadrature.
pub fn overlap(m: usize, n: usize, g: Complex64, form: PhiForm) -> Result<Complex64, StatesError> {
    check_mode(g)?;
    let f = |x: f64| phi_unchecked(m, x, g, form).conj() * phi_unchecked(n, x, g, form);
    Ok(quad_with(f, f64::NEG_INFINITY, f64::INFINITY, &x_options(g, 1e-14))?.value)
}

pub fn norm_sq(n: usize, g: Complex64, form: PhiForm) -> Result<f64, StatesError> {
    Ok(overlap(n, n, g, form)?.re)
}

/// `(omega_rho, alpha_rho)` with `H = omega_rho (a_+ a_- + 1/2) - alpha_rho a_-^2
/// - alpha_rho^* a_+^2` in the invariant's ladder operators.
pub fn h_rho_ladder_coeffs(eta: f64, etadot: f64, m0: f64, omega0_sq: f64, eta0: f64) -> (f64, Complex64) {
    let e2 = eta * eta;
    let omega_rho = (eta0 * eta0 + m0 * m0 * omega0_sq * e2 * e2 + m0 * m0 * e2 * etadot * etadot)
        / (2.0 * m0 * eta0 * e2);
    let alpha = Complex64::new(omega_rho - eta0 / (m0 * e2), -etadot / eta) * 0.5;
    (omega_rho, alpha)
}

/// Everything the state formulas need at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeState {
    pub t: f64,
    pub eta: f64,
    pub etadot: f64,
    pub eta0: f64,
    pub m0: f64,
    pub omega0_sq: f64,
    pub g: GCoefficients,
    /// `(g1', g2', g3')` from the coefficient equations.
    pub gdot: [f64; 3],
}

impl ModeState {
    pub fn new(t: f64, eta: f64, etadot: f64, eta0: f64, m0: f64, omega0_sq: f64) -> Self {
        let g = GCoefficients::from_eta(eta, etadot, m0, eta0);
        let gdot = lr_rhs(g.as_array(), m0, omega0_sq);
        ModeState { t, eta, etadot, eta0, m0, omega0_sq, g, gdot }
    }

    /// `g = (eta0 + i g3)/g1`.
    pub fn mode(&self) -> Complex64 {
        Complex64::new(self.eta0, self.g.g3) / self.g.g1
    }

    pub fn mode_dot(&self) -> Complex64 {
        let [d1, _, d3] = self.gdot;
        (I * d3 * self.g.g1 - Complex64::new(self.eta0, self.g.g3) * d1) / (self.g.g1 * self.g.g1)
    }

    pub fn r_g(&self) -> f64 {
        (self.g.g1 * self.g.g2).sqrt()
    }

    pub fn h_rho(&self) -> (f64, Complex64) {
        h_rho_ladder_coeffs(self.eta, self.etadot, self.m0, self.omega0_sq, self.eta0)
    }

    /// Rate of the total LR phase for level `n`, `-(n+1/2) eta0/(M0 eta^2)`.
    pub fn total_phase_rate(&self, n: usize) -> f64 {
        -(n as f64 + 0.5) * self.eta0 / (self.m0 * self.eta * self.eta)
    }

    pub fn dynamical_rate(&self, n: usize) -> f64 {
        -(n as f64 + 0.5) * self.h_rho().0
    }

    /// Real geometric rate `(2n+1) g1 (d/dt Im g) / (4 eta0)` for the
    /// normalized eigenfunctions.
    pub fn geometric_real_rate(&self, n: usize) -> f64 {
        let gi_dot = self.mode_dot().im;
        (2.0 * n as f64 + 1.0) * self.g.g1 * gi_dot / (4.0 * self.eta0)
    }

    /// Printed rate of `Im theta_n^(g)` (derived for `eta0 = 1`).
    pub fn geometric_im_rate_printed(&self, n: usize) -> Result<f64, StatesError> {
        let GCoefficients { g1, g2, .. } = self.g;
        let [d1, d2, d3] = self.gdot;
        let r_g = self.r_g();
        if r_g < 1.0 - 1e-9 {
            return Err(StatesError::ParameterDomain { r_g, t: self.t });
        }
        let rp = (1.0 + 1.0 / r_g).sqrt();
        let rm = (1.0 - 1.0 / r_g).max(0.0).sqrt();
        let nf = n as f64;
        Ok(nf / (2.0 * g1.sqrt()) * (d3 * rp / r_g - d1 * g2 * rm) * self.eta
            + 0.125 * (d2 / g2 - d1 / g1)
            + 0.5 * (nf + 0.5) * d1 / g1)
    }

    /// Printed complex geometric rate
    /// `n g' sqrt(g1/(2g)) + i g'/(4g) - i (n+1/2) g' g1 / 2`.
    pub fn geometric_rate_printed_complex(&self, n: usize) -> Complex64 {
        let (g, gd) = (self.mode(), self.mode_dot());
        let nf = n as f64;
        gd * nf * (self.g.g1 / (g * 2.0)).sqrt() + I * gd / (g * 4.0) - I * gd * (nf + 0.5) * self.g.g1 * 0.5
    }

    /// `e^{-n int(...)} / (eta^{2n} (1 + M0^2 eta^2 eta'^2)^{1/4})` without the
    /// integral, i.e. the instantaneous part of the printed amplitude.
    pub fn printed_amplitude_local(&self, n: usize) -> f64 {
        let e2 = self.eta * self.eta;
        let q = 1.0 + self.m0 * self.m0 * e2 * self.etadot * self.etadot;
        1.0 / (e2.powi(n as i32) * q.powf(0.25))
    }

    /// Integrand of the exponent in the printed amplitude.
    pub fn printed_amplitude_rate(&self) -> f64 {
        let r_g = self.r_g();
        let rp = (1.0 + 1.0 / r_g).sqrt();
        let rm = (1.0 - 1.0 / r_g).max(0.0).sqrt();
        self.gdot[2] * rp / r_g - self.gdot[0] * self.g.g2 * rm
    }
}

/// An EP solution together with the partner's coefficient signals.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub sol: EpSolution,
    pub m0: ParameterSignal,
    pub omega0_sq: ParameterSignal,
}

const PHASE_TOL: f64 = 1e-13;

fn time_quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64, StatesError> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut o = QuadOptions::new(PHASE_TOL);
    o.rel_tol = 1e-13;
    Ok(sign * quad_with(f, lo, hi, &o)?.value)
}

impl Pipeline {
    pub fn new(sol: EpSolution, m0: ParameterSignal, omega0_sq: ParameterSignal) -> Self {
        Pipeline { sol, m0, omega0_sq }
    }

    /// Toy partner on `span` using the smooth closed-form branch.
    pub fn toy(model: &ToyModel, branch: ToyBranch, span: (f64, f64)) -> Self {
        Pipeline {
            sol: model.solution(branch, ToyVariant::SignedSin, span),
            m0: ToyModel::mass_signal(),
            omega0_sq: ToyModel::omega_sq_signal(),
        }
    }

    /// Unit oscillator `M0 = Omega0 = eta = 1`.
    pub fn static_unit(span: (f64, f64)) -> Result<Self, StatesError> {
        let one = ParameterSignal::constant(1.0);
        let sol = crate::ep::ep_integrate(&one, &one, 1.0, 1.0, 0.0, span, 1e-12)?;
        Ok(Pipeline { sol, m0: one.clone(), omega0_sq: one })
    }

    /// Phase origin.
    pub fn t0(&self) -> f64 {
        self.sol.domain().0
    }

    pub fn domain(&self) -> (f64, f64) {
        self.sol.domain()
    }

    pub fn state(&self, t: f64) -> Result<ModeState, StatesError> {
        let (eta, etadot) = self.sol.eta(t)?;
        Ok(ModeState::new(t, eta, etadot, self.sol.eta0(), self.m0.value(t), self.omega0_sq.value(t)))
    }

    fn state_or_nan(&self, t: f64) -> ModeState {
        self.state(t)
            .unwrap_or_else(|_| ModeState::new(t, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN))
    }

    pub fn mode(&self, t: f64) -> Result<Complex64, StatesError> {
        Ok(self.state(t)?.mode())
    }

    /// `int_{t0}^t dtau / (M0 eta^2)`; the total LR phase is `-(n+1/2) eta0`
    /// times this.
    pub fn phase_integral(&self, t: f64) -> Result<f64, StatesError> {
        time_quad(|s| {
            let m = self.state_or_nan(s);
            1.0 / (m.m0 * m.eta * m.eta)
        }, self.t0(), t)
    }

    pub fn total_phase(&self, n: usize, t: f64) -> Result<f64, StatesError> {
        Ok(-(n as f64 + 0.5) * self.sol.eta0() * self.phase_integral(t)?)
    }

    pub fn dynamical_phase(&self, n: usize, t: f64) -> Result<f64, StatesError> {
        dynamical_phase(n, |s| self.state_or_nan(s).h_rho().0, self.t0(), t)
    }

    /// Integrated printed rate of `Im theta_n^(g)` from the phase origin.
    pub fn geometric_phase_im(&self, n: usize, t: f64) -> Result<f64, StatesError> {
        // Validate the domain condition at the end points before integrating.
        for s in [self.t0(), t] {
            self.state(s)?.geometric_im_rate_printed(n)?;
        }
        time_quad(|s| self.state_or_nan(s).geometric_im_rate_printed(n).unwrap_or(f64::NAN), self.t0(), t)
    }

    pub fn geometric_phase_printed_complex(&self, n: usize, t: f64) -> Result<Complex64, StatesError> {
        let re = time_quad(|s| self.state_or_nan(s).geometric_rate_printed_complex(n).re, self.t0(), t)?;
        let im = time_quad(|s| self.state_or_nan(s).geometric_rate_printed_complex(n).im, self.t0(), t)?;
        Ok(Complex64::new(re, im))
    }

    /// `(1/8) ln(g1 g2)` relative to the phase origin.
    pub fn geometric_phase_im_closed_n0(&self, t: f64) -> Result<f64, StatesError> {
        let (a, b) = (self.state(self.t0())?, self.state(t)?);
        Ok(0.125 * ((b.g.g1 * b.g.g2).ln() - (a.g.g1 * a.g.g2).ln()))
    }

    /// Printed amplitude prefactor for level `n` at `t`.
    pub fn printed_amplitude(&self, n: usize, t: f64) -> Result<f64, StatesError> {
        let integral = if n == 0 {
            0.0
        } else {
            time_quad(|s| self.state_or_nan(s).printed_amplitude_rate(), self.t0(), t)?
        };
        Ok((-(n as f64) * integral).exp() * self.state(t)?.printed_amplitude_local(n))
    }

    pub fn phase_trajectory(&self, n: usize, times: &[f64]) -> Result<PhaseTrajectory, StatesError> {
        let theta_d = times.iter().map(|&t| self.dynamical_phase(n, t)).collect::<Result<_, _>>()?;
        let theta_g_im = times.iter().map(|&t| self.geometric_phase_im(n, t)).collect::<Result<_, _>>()?;
        Ok(PhaseTrajectory { n, times: times.to_vec(), theta_d, theta_g_im })
    }
}

/// `-(n + 1/2) int_{t0}^t omega_rho` by adaptive quadrature.
pub fn dynamical_phase<F: Fn(f64) -> f64>(n: usize, omega_rho: F, t0: f64, t: f64) -> Result<f64, StatesError> {
    Ok(-(n as f64 + 0.5) * time_quad(omega_rho, t0, t)?)
}

/// Phases of one level sampled in time, both zero at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrajectory {
    pub n: usize,
    pub times: Vec<f64>,
    pub theta_d: Vec<f64>,
    pub theta_g_im: Vec<f64>,
}

/// Brute-force geometric rate `i <phi|d_t phi> / <phi|phi>` at `t`, with the
/// time derivative by Richardson central differences of `phi(x, g(t))`.
pub fn geometric_rate_oracle(p: &Pipeline, n: usize, form: PhiForm, t: f64) -> Result<Complex64, StatesError> {
    let (lo, hi) = p.domain();
    let h = 1e-5 * (hi - lo).max(1e-3);
    let g0 = p.mode(t)?;
    check_mode(g0)?;
    let gd = |s: f64| p.mode(s.clamp(lo, hi)).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    // Stencil offsets and weights for d/dt, shared by every x. Interior:
    // Richardson-extrapolated central differences (4 D(h/2) - D(h)) / 3.
    // At the ends: the second-order one-sided rule, extrapolated likewise.
    let pts: Vec<(f64, f64)> = if t - h >= lo && t + h <= hi {
        let (w1, w2) = (1.0 / (6.0 * h), 4.0 / (3.0 * h));
        vec![(-h, w1), (h, -w1), (-0.5 * h, -w2), (0.5 * h, w2)]
    } else {
        let d = if t + 2.0 * h <= hi { 1.0 } else { -1.0 };
        // One-sided D(k) = (-3 f0 + 4 f(k) - f(2k)) / (2k); combine k = h, h/2.
        let one_sided = |k: f64, c: f64| vec![(0.0, -3.0 * c / (2.0 * k)), (d * k, 4.0 * c / (2.0 * k)), (2.0 * d * k, -c / (2.0 * k))];
        let mut v = one_sided(0.5 * h, 4.0 / 3.0);
        v.extend(one_sided(h, -1.0 / 3.0));
        v.into_iter().map(|(dt, w)| (dt, d * w)).collect()
    };
    let modes: Vec<(Complex64, f64)> = pts.iter().map(|&(dt, w)| (gd(t + dt), w)).collect();
    let dphi = |x: f64| -> Complex64 { modes.iter().map(|&(g, w)| phi_unchecked(n, x, g, form) * w).sum() };
    let mut o = x_options(g0, 1e-13);
    o.rel_tol = 1e-11;
    let num = quad_with(|x| phi_unchecked(n, x, g0, form).conj() * dphi(x), f64::NEG_INFINITY, f64::INFINITY, &o)?.value;
    let den = quad_with(|x| phi_unchecked(n, x, g0, form).norm_sqr(), f64::NEG_INFINITY, f64::INFINITY, &o)?.value;
    Ok(I * num / den)
}

/// Time integral of [`geometric_rate_oracle`] from the phase origin.
pub fn geometric_phase_oracle(p: &Pipeline, n: usize, form: PhiForm, t: f64) -> Result<Complex64, StatesError> {
    let rate = |s: f64, part: fn(Complex64) -> f64| {
        geometric_rate_oracle(p, n, form, s).map(part).unwrap_or(f64::NAN)
    };
    let opts = |tol: f64| {
        let mut o = QuadOptions::new(tol);
        o.rel_tol = 1e-10;
        o
    };
    let (a, b) = (p.t0(), t);
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let re = quad_with(|s| rate(s, |z| z.re), lo, hi, &opts(1e-10))?.value;
    let im = quad_with(|s| rate(s, |z| z.im), lo, hi, &opts(1e-10))?.value;
    Ok(Complex64::new(re, im) * sign)
}

/// How level amplitudes and phases are assembled into `psi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PsiRoute {
    /// Normalized eigenfunctions with the total LR phase: an exact solution.
    Eigen,
    /// Printed eigenfunctions dressed with `exp(-Im theta_g)` from the
    /// integrated printed rate. The argument of the `g^(1/4)` prefactor is
    /// removed relative to the origin.
    PrintedIntegrated,
    /// Printed eigenfunctions with the printed amplitude prefactor.
    PrintedPrefactor,
}

impl PsiRoute {
    pub fn form(self) -> PhiForm {
        match self {
            PsiRoute::Eigen => PhiForm::Eigen,
            _ => PhiForm::Printed,
        }
    }
}

/// A superposition `sum_n c_n e^{i theta_n} phi_n`.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub pipeline: Pipeline,
    pub coeffs: Vec<(usize, Complex64)>,
    pub route: PsiRoute,
}

/// `psi` frozen at one time: per-level factors already multiplied in.
#[derive(Clone, Debug)]
pub struct Slice {
    pub state: ModeState,
    pub mode: Complex64,
    pub form: PhiForm,
    pub terms: Vec<(usize, Complex64)>,
}

impl Slice {
    pub fn psi(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|&(n, c)| c * phi_unchecked(n, x, self.mode, self.form)).sum()
    }
}

impl Evolution {
    pub fn new(pipeline: Pipeline, coeffs: Vec<(usize, Complex64)>, route: PsiRoute) -> Self {
        Evolution { pipeline, coeffs, route }
    }

    pub fn ground(pipeline: Pipeline, route: PsiRoute) -> Self {
        Evolution::new(pipeline, vec![(0, Complex64::new(1.0, 0.0))], route)
    }

    pub fn slice(&self, t: f64) -> Result<Slice, StatesError> {
        let p = &self.pipeline;
        let state = p.state(t)?;
        let mode = state.mode();
        check_mode(mode)?;
        let q = p.phase_integral(t)?;
        let eta0 = state.eta0;
        let arg_shift = match self.route {
            PsiRoute::Eigen => 0.0,
            _ => (mode.arg() - p.mode(p.t0())?.arg()) / 4.0,
        };
        let mut terms = Vec::with_capacity(self.coeffs.len());
        for &(n, c) in &self.coeffs {
            let theta = -(n as f64 + 0.5) * eta0 * q - arg_shift;
            let amp = match self.route {
                PsiRoute::Eigen => 1.0,
                PsiRoute::PrintedIntegrated => (-p.geometric_phase_im(n, t)?).exp(),
                PsiRoute::PrintedPrefactor => p.printed_amplitude(n, t)?,
            };
            terms.push((n, c * Complex64::from_polar(amp, theta)));
        }
        Ok(Slice { state, mode, form: self.route.form(), terms })
    }

    pub fn psi(&self, x: f64, t: f64) -> Result<Complex64, StatesError> {
        Ok(self.slice(t)?.psi(x))
    }

    /// Printed amplitude against `exp(-Im theta_g)` scaled to agree at the
    /// origin.
    pub fn amplitude_check(&self, n: usize, t: f64) -> Result<AmplitudeCheck, StatesError> {
        let p = &self.pipeline;
        let printed = p.printed_amplitude(n, t)?;
        let integrated = p.printed_amplitude(n, p.t0())? * (-p.geometric_phase_im(n, t)?).exp();
        Ok(AmplitudeCheck { t, n, printed, integrated, relative_deviation: (printed / integrated - 1.0).abs() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeCheck {
    pub t: f64,
    pub n: usize,
    pub printed: f64,
    pub integrated: f64,
    pub relative_deviation: f64,
}

/// Largest `|i psi_t - H psi|` over the grid, with Richardson central
/// differences in time (step `ht`) and a five-point Laplacian (step `hx`).
///
/// Every time stencil must lie inside the pipeline domain.
pub fn schrodinger_residual(
    ev: &Evolution,
    xs: &[f64],
    ts: &[f64],
    ht: f64,
    hx: f64,
) -> Result<f64, StatesError> {
    let (lo, hi) = ev.pipeline.domain();
    if ts.iter().any(|&t| t - ht < lo || t + ht > hi) {
        return Err(StatesError::InvalidArgument("time stencil leaves the solution domain".into()));
    }
    let per_t: Vec<Result<f64, StatesError>> = ts
        .par_iter()
        .map(|&t| {
            let s0 = ev.slice(t)?;
            let sm = ev.slice(t - ht)?;
            let sp = ev.slice(t + ht)?;
            let smh = ev.slice(t - 0.5 * ht)?;
            let sph = ev.slice(t + 0.5 * ht)?;
            let (m, w2) = (s0.state.m0, s0.state.omega0_sq);
            let mut worst: f64 = 0.0;
            for &x in xs {
                let d1 = (sp.psi(x) - sm.psi(x)) / (2.0 * ht);
                let d2 = (sph.psi(x) - smh.psi(x)) / ht;
                let dt = (d2 * 4.0 - d1) / 3.0;
                let f = |y: f64| s0.psi(y);
                let lap = (-f(x + 2.0 * hx) + f(x + hx) * 16.0 - f(x) * 30.0 + f(x - hx) * 16.0 - f(x - 2.0 * hx))
                    / (12.0 * hx * hx);
                let h_psi = -lap / (2.0 * m) + f(x) * (0.5 * m * w2 * x * x);
                worst = worst.max((I * dt - h_psi).norm());
            }
            Ok(worst)
        })
        .collect();
    per_t.into_iter().try_fold(0.0f64, |a, r| Ok(a.max(r?)))
}

/// Largest `|I phi_n - eps_n phi_n|` over `xs`, with the invariant realized
/// as `g2 x^2 - g1 d^2/dx^2 - i g3 (2x d/dx + 1)` and five-point stencils.
pub fn invariant_eigen_residual(
    n: usize,
    state: &ModeState,
    form: PhiForm,
    xs: &[f64],
    h: f64,
) -> Result<f64, StatesError> {
    let g = state.mode();
    check_mode(g)?;
    let GCoefficients { g1, g2, g3, eta0 } = state.g;
    let eps = crate::invariant::invariant_eigenvalue(n as u32, eta0);
    let f = |x: f64| phi_unchecked(n, x, g, form);
    let mut worst: f64 = 0.0;
    for &x in xs {
        let d1 = (f(x - 2.0 * h) - f(x - h) * 8.0 + f(x + h) * 8.0 - f(x + 2.0 * h)) / (12.0 * h);
        let d2 = (-f(x + 2.0 * h) + f(x + h) * 16.0 - f(x) * 30.0 + f(x - h) * 16.0 - f(x - 2.0 * h)) / (12.0 * h * h);
        let v = f(x);
        let applied = v * (g2 * x * x) - d2 * g1 - I * g3 * (d1 * (2.0 * x) + v);
        worst = worst.max((applied - v * eps).norm());
    }
    Ok(worst)
}

/// Second moments `V11 = <x^2>`, `V22 = <p^2>`, `V12 = <{x,p}>/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covariance2 {
    pub v11: f64,
    pub v22: f64,
    pub v12: f64,
}

impl Covariance2 {
    pub fn det(&self) -> f64 {
        self.v11 * self.v22 - self.v12 * self.v12
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CovarianceForm {
    /// Moments of the normalized eigenstates:
    /// `(2n+1)/(2 eta0) [[g1, -g3], [-g3, g2]]`.
    Moments,
    /// Printed elements `(2n+1)/2 e^{-2 theta} (g1, g2, M0 eta')`.
    Printed,
}

pub fn covariance(n: usize, state: &ModeState, form: CovarianceForm, theta_im: f64) -> Covariance2 {
    let k = 2.0 * n as f64 + 1.0;
    match form {
        CovarianceForm::Moments => {
            let s = k / (2.0 * state.eta0);
            Covariance2 { v11: s * state.g.g1, v22: s * state.g.g2, v12: -s * state.g.g3 }
        }
        CovarianceForm::Printed => {
            let s = 0.5 * k * (-2.0 * theta_im).exp();
            Covariance2 { v11: s * state.g.g1, v22: s * state.g.g2, v12: s * state.m0 * state.etadot }
        }
    }
}

/// Moments of `phi_n` by quadrature, normalized by its norm.
pub fn covariance_oracle(n: usize, g: Complex64, form: PhiForm) -> Result<Covariance2, StatesError> {
    check_mode(g)?;
    let o = x_options(g, 1e-14);
    let inf = f64::INFINITY;
    let norm = quad_with(|x| phi_unchecked(n, x, g, form).norm_sqr(), -inf, inf, &o)?.value;
    let xx = quad_with(|x| x * x * phi_unchecked(n, x, g, form).norm_sqr(), -inf, inf, &o)?.value;
    let pp = quad_with(|x| phi_dx_unchecked(n, x, g, form).norm_sqr(), -inf, inf, &o)?.value;
    // Re <phi| x p |phi> with p = -i d/dx.
    let xp = quad_with(
        |x| (phi_unchecked(n, x, g, form).conj() * (-I) * phi_dx_unchecked(n, x, g, form) * x).re,
        -inf,
        inf,
        &o,
    )?
    .value;
    Ok(Covariance2 { v11: xx / norm, v22: pp / norm, v12: xp / norm })
}

/// Robertson-Schrödinger check `det V >= 1/4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RsupVerdict {
    pub holds: bool,
    pub margin: f64,
}

pub fn rsup_check(v: &Covariance2) -> RsupVerdict {
    let margin = v.det() - 0.25;
    RsupVerdict { holds: margin >= -1e-12, margin }
}

/// Printed constraint `1 + M0^2 eta^2 eta'^2 >= M0^2 eta'^2 + sqrt(1 + M0^2 eta^2 eta'^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaFormVerdict {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn rsup_eta_form(eta: f64, etadot: f64, m0: f64) -> EtaFormVerdict {
    let q = 1.0 + m0 * m0 * eta * eta * etadot * etadot;
    let lhs = q;
    let rhs = m0 * m0 * etadot * etadot + q.sqrt();
    EtaFormVerdict { lhs, rhs, holds: lhs >= rhs - 1e-12 * lhs }
}

/// One sample of the probability density dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityRow {
    pub t: f64,
    pub x: f64,
    pub psi: Complex64,
}

pub fn density_grid(ev: &Evolution, xs: &[f64], ts: &[f64]) -> Result<Vec<DensityRow>, StatesError> {
    let blocks: Vec<Result<Vec<DensityRow>, StatesError>> = ts
        .par_iter()
        .map(|&t| {
            let s = ev.slice(t)?;
            Ok(xs.iter().map(|&x| DensityRow { t, x, psi: s.psi(x) }).collect())
        })
        .collect();
    let mut out = Vec::with_capacity(xs.len() * ts.len());
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

pub const DENSITY_CSV_HEADER: &str = "t,x,re_psi,im_psi,abs2";

pub fn density_to_csv(rows: &[DensityRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 100);
    out.push_str(DENSITY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.t,
            r.x,
            r.psi.re,
            r.psi.im,
            r.psi.norm_sqr()
        ));
    }
    out
}
