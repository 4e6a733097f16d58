//! Ermakov-Pinney auxiliary equation
//! `eta'' + (M0'/M0) eta' + Omega0^2 eta = eta0^2 / (M0^2 eta^3)`
//! and the invariant coefficients built from its solutions.

use std::cell::Cell;

use thiserror::Error;

use crate::numerics::{integrate_ode_with, NumericsError, OdeOptions, Trajectory};
use crate::signals::{ParameterSignal, Signal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpError {
    #[error("coefficient singularity: M0 vanishes or changes sign near t = {t}")]
    CoefficientSingularity { t: f64 },
    #[error("barrier violation: eta reached {eta:e} at t = {t}; tolerance is likely too loose")]
    BarrierViolation { t: f64, eta: f64 },
    #[error("invalid integration constant c1 = {c1}: need c1 >= 1")]
    InvalidConstant { c1: f64 },
    #[error("t = {t} outside the solution domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `eta`, its first two derivatives, and whether `t` sits on a kink of a
/// non-smooth closed form (derivatives are then one-sided).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaState {
    pub eta: f64,
    pub etadot: f64,
    pub etaddot: f64,
    pub kink: bool,
}

/// Residual of the EP equation for a given state.
pub fn ep_residual(s: &EtaState, m0: f64, m0_dot: f64, omega0_sq: f64, eta0: f64) -> f64 {
    s.etaddot + (m0_dot / m0) * s.etadot + omega0_sq * s.eta
        - eta0 * eta0 / (m0 * m0 * s.eta.powi(3))
}

/// Closed-form branches of the toy model `M0 = t`, `Omega0^2 = 1/t^2`,
/// `eta0 = 1`.
///
/// The outer index gives the overall sign `(-1)^j`, the suffix the sign of
/// the inner square root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ToyBranch {
    OnePlus,
    OneMinus,
    TwoPlus,
    TwoMinus,
}

impl ToyBranch {
    pub const ALL: [ToyBranch; 4] =
        [ToyBranch::OnePlus, ToyBranch::OneMinus, ToyBranch::TwoPlus, ToyBranch::TwoMinus];

    /// Positive root with the `+` inner sign.
    pub const ETA_PLUS: ToyBranch = ToyBranch::TwoPlus;
    /// Positive root with the `-` inner sign.
    pub const ETA_MINUS: ToyBranch = ToyBranch::TwoMinus;

    pub fn outer_sign(self) -> f64 {
        match self {
            ToyBranch::OnePlus | ToyBranch::OneMinus => -1.0,
            ToyBranch::TwoPlus | ToyBranch::TwoMinus => 1.0,
        }
    }

    pub fn inner_sign(self) -> f64 {
        match self {
            ToyBranch::OnePlus | ToyBranch::TwoPlus => 1.0,
            ToyBranch::OneMinus | ToyBranch::TwoMinus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ToyBranch::OnePlus => "1+",
            ToyBranch::OneMinus => "1-",
            ToyBranch::TwoPlus => "2+",
            ToyBranch::TwoMinus => "2-",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "1+" => Some(ToyBranch::OnePlus),
            "1-" => Some(ToyBranch::OneMinus),
            "2+" | "eta_plus" => Some(ToyBranch::TwoPlus),
            "2-" | "eta_minus" => Some(ToyBranch::TwoMinus),
            _ => None,
        }
    }
}

/// Which oscillating term enters `eta^2 = c1 +- D * s(phi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ToyVariant {
    /// `s = |sin phi|`: kinks wherever `sin phi = 0`.
    AbsSin,
    /// `s = sin phi`: smooth everywhere.
    SignedSin,
}

const KINK_EPS: f64 = 1e-12;

/// The toy Hermitian partner together with its integration constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyModel {
    pub c1: f64,
    pub c2: f64,
}

impl ToyModel {
    pub fn new(c1: f64, c2: f64) -> Result<Self, EpError> {
        if !(c1 >= 1.0) || !c2.is_finite() || !c1.is_finite() {
            return Err(EpError::InvalidConstant { c1 });
        }
        Ok(ToyModel { c1, c2 })
    }

    pub fn mass_signal() -> ParameterSignal {
        ParameterSignal::toy(1.0, 1.0)
    }

    pub fn omega_sq_signal() -> ParameterSignal {
        ParameterSignal::toy(1.0, -2.0)
    }

    pub fn phase(&self, t: f64) -> f64 {
        2.0 * self.c2 - 2.0 * t.ln()
    }

    /// Evaluates a branch at `t > 0`.
    pub fn eval(&self, branch: ToyBranch, variant: ToyVariant, t: f64) -> Result<EtaState, EpError> {
        if !(t > 0.0) {
            return Err(EpError::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
        }
        let d = (self.c1 * self.c1 - 1.0).sqrt();
        let phi = self.phase(t);
        let (sin, cos) = phi.sin_cos();
        let (s, kink) = match variant {
            ToyVariant::SignedSin => (1.0, false),
            ToyVariant::AbsSin => (if sin < 0.0 { -1.0 } else { 1.0 }, sin.abs() < KINK_EPS),
        };
        let sd = branch.inner_sign() * s * d;
        let u = self.c1 + sd * sin;
        let du = -2.0 * sd * cos / t;
        let ddu = sd * (-4.0 * sin + 2.0 * cos) / (t * t);
        let sign = branch.outer_sign();
        let r = u.sqrt();
        Ok(EtaState {
            eta: sign * r,
            etadot: sign * du / (2.0 * r),
            etaddot: sign * (ddu / (2.0 * r) - du * du / (4.0 * u * r)),
            kink,
        })
    }

    /// Times in `(a, b)` where `sin phi = 0`, ascending.
    /// Kinks of the `|sin|` variant inside `(a, b)`; empty unless
    /// `0 < a < b` with both ends finite.
    pub fn kinks(&self, a: f64, b: f64) -> Vec<f64> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Vec::new();
        }
        // phi decreases in t; sin phi = 0 at phi = k pi.
        let (pa, pb) = (self.phase(a), self.phase(b));
        let (lo, hi) = (pa.min(pb), pa.max(pb));
        let k0 = (lo / std::f64::consts::PI).ceil() as i64;
        let k1 = (hi / std::f64::consts::PI).floor() as i64;
        let mut ts: Vec<f64> = (k0..=k1)
            .map(|k| ((2.0 * self.c2 - k as f64 * std::f64::consts::PI) / 2.0).exp())
            .filter(|&t| t > a && t < b)
            .collect();
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ts
    }

    pub fn solution(&self, branch: ToyBranch, variant: ToyVariant, span: (f64, f64)) -> EpSolution {
        EpSolution {
            eta0: 1.0,
            domain: span,
            kind: SolutionKind::Toy { model: *self, branch, variant },
        }
    }
}

/// Residual of the EP equation for a toy branch at `t`, using analytic
/// derivatives.
pub fn toy_residual(model: &ToyModel, branch: ToyBranch, variant: ToyVariant, t: f64) -> Result<f64, EpError> {
    let s = model.eval(branch, variant, t)?;
    Ok(ep_residual(&s, t, 1.0, 1.0 / (t * t), 1.0))
}

/// Outcome of testing which toy variant is a genuine smooth solution.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantVerdict {
    /// Largest pointwise residual of the signed variant.
    pub signed_residual: f64,
    /// Largest pointwise residual of the `|sin|` variant away from kinks.
    pub abs_residual_smooth: f64,
    /// Largest jump of `eta'` of the `|sin|` variant across a kink.
    pub abs_derivative_jump: f64,
    pub kinks: Vec<f64>,
    pub smooth_variant: ToyVariant,
}

impl VariantVerdict {
    pub fn summary(&self) -> String {
        let chosen = match self.smooth_variant {
            ToyVariant::SignedSin => "signed sin",
            ToyVariant::AbsSin => "|sin|",
        };
        format!(
            "smooth solution: {chosen} variant (signed residual {:.2e}; |sin| residual off kinks {:.2e}, \
             {} kink(s), derivative jump {:.2e})",
            self.signed_residual,
            self.abs_residual_smooth,
            self.kinks.len(),
            self.abs_derivative_jump
        )
    }
}

/// Decides on `[a, b]` which variant solves the EP equation as a C1 curve.
pub fn smooth_variant_verdict(
    model: &ToyModel,
    branch: ToyBranch,
    a: f64,
    b: f64,
    samples: usize,
) -> Result<VariantVerdict, EpError> {
    if !(a > 0.0 && a < b && b.is_finite()) || samples == 0 {
        return Err(EpError::InvalidArgument(format!(
            "toy verdict needs 0 < a < b finite and samples > 0, got [{a}, {b}], {samples}"
        )));
    }
    let kinks = model.kinks(a, b);
    let mut signed_residual: f64 = 0.0;
    let mut abs_residual_smooth: f64 = 0.0;
    for k in 0..=samples {
        let t = a + (b - a) * k as f64 / samples as f64;
        signed_residual = signed_residual.max(toy_residual(model, branch, ToyVariant::SignedSin, t)?.abs());
        let s = model.eval(branch, ToyVariant::AbsSin, t)?;
        if !s.kink && kinks.iter().all(|&tk| (t - tk).abs() > 1e-9 * tk) {
            abs_residual_smooth = abs_residual_smooth.max(toy_residual(model, branch, ToyVariant::AbsSin, t)?.abs());
        }
    }
    let mut abs_derivative_jump: f64 = 0.0;
    for &tk in &kinks {
        let h = 1e-9 * tk;
        let l = model.eval(branch, ToyVariant::AbsSin, tk - h)?;
        let r = model.eval(branch, ToyVariant::AbsSin, tk + h)?;
        abs_derivative_jump = abs_derivative_jump.max((r.etadot - l.etadot).abs());
    }
    let abs_is_smooth = kinks.is_empty() || abs_derivative_jump < 1e-6;
    let smooth_variant = if signed_residual <= 1e-8 || !abs_is_smooth {
        ToyVariant::SignedSin
    } else {
        ToyVariant::AbsSin
    };
    Ok(VariantVerdict { signed_residual, abs_residual_smooth, abs_derivative_jump, kinks, smooth_variant })
}

#[derive(Clone, Debug)]
enum SolutionKind {
    Toy { model: ToyModel, branch: ToyBranch, variant: ToyVariant },
    Numeric { traj: Trajectory },
}

/// Where an [`EpSolution`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClosedFormToy,
    Numeric,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::ClosedFormToy => "closed-form-toy",
            Provenance::Numeric => "numeric",
        }
    }
}

/// A solution `eta(t)` on a closed interval.
#[derive(Clone, Debug)]
pub struct EpSolution {
    eta0: f64,
    domain: (f64, f64),
    kind: SolutionKind,
}

impl EpSolution {
    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            SolutionKind::Toy { .. } => Provenance::ClosedFormToy,
            SolutionKind::Numeric { .. } => Provenance::Numeric,
        }
    }

    /// Step nodes of a numeric solution; empty for closed forms.
    pub fn nodes(&self) -> &[f64] {
        match &self.kind {
            SolutionKind::Numeric { traj } => traj.times(),
            SolutionKind::Toy { .. } => &[],
        }
    }

    pub fn state(&self, t: f64) -> Result<EtaState, EpError> {
        let (lo, hi) = self.domain;
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(EpError::OutOfDomain { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        match &self.kind {
            SolutionKind::Toy { model, branch, variant } => model.eval(*branch, *variant, t),
            SolutionKind::Numeric { traj, .. } => {
                let y = traj.eval(t)?;
                let dy = traj.eval_derivative(t)?;
                Ok(EtaState { eta: y[0], etadot: y[1], etaddot: dy[1], kink: false })
            }
        }
    }

    /// `(eta, eta')` at `t`.
    pub fn eta(&self, t: f64) -> Result<(f64, f64), EpError> {
        let s = self.state(t)?;
        Ok((s.eta, s.etadot))
    }
}

/// Default starting values `((M0 Omega0)^(-1/2) sqrt(eta0), 0)`, the static
/// solution for frozen coefficients.
pub fn default_initial_conditions(
    m0: &dyn Signal,
    omega0_sq: &dyn Signal,
    eta0: f64,
    t_start: f64,
) -> Result<(f64, f64), EpError> {
    let m = m0.value(t_start);
    let w2 = omega0_sq.value(t_start);
    if !(m > 0.0 && w2 > 0.0) {
        return Err(EpError::InvalidArgument(format!(
            "no static initial value at t = {t_start}: M0 = {m}, Omega0^2 = {w2} must be positive"
        )));
    }
    Ok(((eta0 / (m * w2.sqrt())).sqrt(), 0.0))
}

fn check_mass(m0: &dyn Signal, span: (f64, f64)) -> Result<(), EpError> {
    const N: usize = 2000;
    let m_start = m0.value(span.0);
    if !(m_start.is_finite() && m_start != 0.0) {
        return Err(EpError::CoefficientSingularity { t: span.0 });
    }
    for k in 1..=N {
        let t = span.0 + (span.1 - span.0) * k as f64 / N as f64;
        let m = m0.value(t);
        if !m.is_finite() || m == 0.0 || m.signum() != m_start.signum() {
            return Err(EpError::CoefficientSingularity { t });
        }
    }
    Ok(())
}

/// Integrates the EP equation numerically over `t_span` (either direction).
///
/// `M0'` comes from [`Signal::derivative`]: analytic for tagged parameter
/// signals, finite differences otherwise.
pub fn ep_integrate(
    m0: &dyn Signal,
    omega0_sq: &dyn Signal,
    eta0: f64,
    eta_init: f64,
    etadot_init: f64,
    t_span: (f64, f64),
    tol: f64,
) -> Result<EpSolution, EpError> {
    if !(eta_init > 0.0) || !etadot_init.is_finite() {
        return Err(EpError::InvalidArgument(format!("eta_init = {eta_init} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(EpError::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    check_mass(m0, t_span)?;

    let floor = 1e-8 * eta_init;
    let failure: Cell<Option<EpError>> = Cell::new(None);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let m = m0.value(t);
        if !m.is_finite() || m == 0.0 {
            failure.set(Some(EpError::CoefficientSingularity { t }));
            dy.fill(f64::NAN);
            return;
        }
        if !(y[0] > floor) {
            failure.set(Some(EpError::BarrierViolation { t, eta: y[0] }));
        }
        let md = m0.derivative(t);
        let w2 = omega0_sq.value(t);
        dy[0] = y[1];
        dy[1] = -(md / m) * y[1] - w2 * y[0] + eta0 * eta0 / (m * m * y[0].powi(3));
    };
    let mut opts = OdeOptions::new(tol, tol * 1e-3);
    opts.max_steps = 2_000_000;
    let traj = integrate_ode_with(rhs, &[eta_init, etadot_init], t_span, &opts);
    if let Some(err) = failure.take() {
        return Err(err);
    }
    let traj = traj?;
    if let Some((i, y)) = traj.states().iter().enumerate().find(|(_, y)| !(y[0] > floor)) {
        return Err(EpError::BarrierViolation { t: traj.times()[i], eta: y[0] });
    }
    let domain = (traj.t_start(), traj.t_end());
    Ok(EpSolution { eta0, domain, kind: SolutionKind::Numeric { traj } })
}

/// Coefficients of the invariant `g1 p^2 + g2 x^2 + g3 {x, p}` (up to a
/// factor 1/2), with the additive constant fixed to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GCoefficients {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub eta0: f64,
}

impl GCoefficients {
    pub fn from_eta(eta: f64, etadot: f64, m0: f64, eta0: f64) -> Self {
        GCoefficients {
            g1: eta * eta,
            g2: m0 * m0 * etadot * etadot + eta0 * eta0 / (eta * eta),
            g3: -m0 * eta * etadot,
            eta0,
        }
    }

    /// `g3^2 - g1 g2 + eta0^2`, zero along every solution.
    pub fn ermakov_defect(&self) -> f64 {
        self.g3 * self.g3 - self.g1 * self.g2 + self.eta0 * self.eta0
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.g1, self.g2, self.g3]
    }
}

pub fn g_from_eta(sol: &EpSolution, m0: &dyn Signal, t: f64) -> Result<GCoefficients, EpError> {
    let (eta, etadot) = sol.eta(t)?;
    Ok(GCoefficients::from_eta(eta, etadot, m0.value(t), sol.eta0()))
}

/// Right-hand side of the linear system the invariant coefficients obey.
pub fn lr_rhs(g: [f64; 3], m0: f64, omega0_sq: f64) -> [f64; 3] {
    [
        -(2.0 / m0) * g[2],
        2.0 * m0 * omega0_sq * g[2],
        m0 * omega0_sq * g[0] - g[1] / m0,
    ]
}

/// Residual triple of the coefficient equations at interior node `i` of a
/// sampled series, with central differences for the derivatives.
pub fn lr_residual(
    times: &[f64],
    g: &[GCoefficients],
    m0: &dyn Signal,
    omega0_sq: &dyn Signal,
    i: usize,
) -> Result<[f64; 3], EpError> {
    if times.len() != g.len() || times.len() < 3 {
        return Err(EpError::InvalidArgument("lr_residual: need matching series of length >= 3".into()));
    }
    if i == 0 || i + 1 >= times.len() {
        return Err(EpError::InvalidArgument(format!("lr_residual: node {i} is not interior")));
    }
    let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
    let (h0, h1) = (t1 - t0, t2 - t1);
    let (a, b, c) = (g[i - 1].as_array(), g[i].as_array(), g[i + 1].as_array());
    let f = lr_rhs(b, m0.value(t1), omega0_sq.value(t1));
    let mut r = [0.0; 3];
    for k in 0..3 {
        // Three-point derivative on a possibly nonuniform grid.
        let d = -h1 / (h0 * (h0 + h1)) * a[k] + (h1 - h0) / (h0 * h1) * b[k] + h0 / (h1 * (h0 + h1)) * c[k];
        r[k] = d - f[k];
    }
    Ok(r)
}

/// Largest absolute component of [`lr_residual`] over all interior nodes.
pub fn lr_residual_max(
    times: &[f64],
    g: &[GCoefficients],
    m0: &dyn Signal,
    omega0_sq: &dyn Signal,
) -> Result<f64, EpError> {
    let mut worst: f64 = 0.0;
    for i in 1..times.len().saturating_sub(1) {
        let r = lr_residual(times, g, m0, omega0_sq, i)?;
        worst = r.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    Ok(worst)
}

/// Integrates the linear coefficient system directly from `g_init`.
///
/// `tol` targets the global error; steps are controlled at `tol / 100`
/// because the local error accumulates over long spans.
///
/// Independent of any EP solution, so conservation of
/// [`GCoefficients::ermakov_defect`] along it is a genuine numerical check.
pub fn lr_integrate(
    m0: &dyn Signal,
    omega0_sq: &dyn Signal,
    g_init: GCoefficients,
    t_span: (f64, f64),
    tol: f64,
) -> Result<Trajectory, EpError> {
    check_mass(m0, t_span)?;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let f = lr_rhs([y[0], y[1], y[2]], m0.value(t), omega0_sq.value(t));
        dy.copy_from_slice(&f);
    };
    let local = (1e-2 * tol).max(1e-14);
    let mut opts = OdeOptions::new(local, local * 1e-3);
    opts.max_steps = 2_000_000;
    Ok(integrate_ode_with(rhs, &g_init.as_array(), t_span, &opts)?)
}

/// One row of the trajectory dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpRow {
    pub t: f64,
    pub eta: f64,
    pub etadot: f64,
    pub g: GCoefficients,
    pub residual: f64,
}

/// Samples `sol` on `times` with the invariant coefficients and the EP
/// residual.
///
/// For numeric solutions the second derivative in the residual comes from
/// central differences of the dense `eta'`, so the column measures the
/// consistency of the interpolant rather than repeating the right-hand side.
pub fn tabulate(
    sol: &EpSolution,
    m0: &dyn Signal,
    omega0_sq: &dyn Signal,
    times: &[f64],
) -> Result<Vec<EpRow>, EpError> {
    let (lo, hi) = sol.domain();
    times
        .iter()
        .map(|&t| {
            let mut s = sol.state(t)?;
            if sol.provenance() == Provenance::Numeric {
                let h = 1e-4 * (hi - lo);
                let dom = (lo, hi);
                s.etaddot = crate::numerics::derivative(
                    |x: f64| sol.state(x.clamp(lo, hi)).map(|v| v.etadot).unwrap_or(f64::NAN),
                    t,
                    h,
                    dom,
                );
            }
            let m = m0.value(t);
            let g = GCoefficients::from_eta(s.eta, s.etadot, m, sol.eta0());
            let residual = ep_residual(&s, m, m0.derivative(t), omega0_sq.value(t), sol.eta0());
            Ok(EpRow { t, eta: s.eta, etadot: s.etadot, g, residual })
        })
        .collect()
}

pub const CSV_HEADER: &str = "t,eta,etadot,g1,g2,g3,residual";

pub fn rows_to_csv(rows: &[EpRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.t, r.eta, r.etadot, r.g.g1, r.g.g2, r.g.g3, r.residual
        ));
    }
    out
}
