//! Momentum-space ground state, the two-lobe cat state and its Wigner
//! distribution `W(x,p) = (2 pi)^{-1/2} int psi_c(p - s/2) psi_c^*(p + s/2) e^{isx} ds`.
//!
//! The cat state is built with `eta = g_r^{-1/2}`, which is what the
//! ground state gives at `eta0 = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{quad_with, NumericsError, QuadOptions};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WignerError {
    #[error("non-normalizable mode: Re g = {re} <= 0")]
    NonNormalizable { re: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn check_mode(g: Complex64) -> Result<(), WignerError> {
    if !(g.re > 0.0) || !g.im.is_finite() {
        return Err(WignerError::NonNormalizable { re: g.re });
    }
    Ok(())
}

/// `(k_g/sqrt(g)) exp(-p^2/(2g) - i p x0)` with
/// `k_g = (g/(pi eta^4 |g|^2))^{1/4}`.
pub fn psi_tilde(p: f64, g: Complex64, eta: f64, x0: f64) -> Result<Complex64, WignerError> {
    check_mode(g)?;
    Ok(psi_tilde_unchecked(p, g, eta, x0))
}

fn psi_tilde_unchecked(p: f64, g: Complex64, eta: f64, x0: f64) -> Complex64 {
    let kg = (g / (PI * eta.powi(4) * g.norm_sqr())).powf(0.25);
    kg / g.sqrt() * (-(p * p) / (g * 2.0) - I * (p * x0)).exp()
}

/// `(2 pi)^{-1/2} int phi0(x - x0) e^{-ipx} dx` by quadrature, for the
/// normalized ground state with mode `g`.
pub fn psi_tilde_ft_oracle(p: f64, g: Complex64, x0: f64) -> Result<Complex64, WignerError> {
    check_mode(g)?;
    let c = (g.re / PI).powf(0.25);
    let f = |x: f64| c * (-g * (0.5 * (x - x0) * (x - x0)) - I * (p * x)).exp();
    let mut o = QuadOptions::new(1e-13).with_breakpoints([x0]).with_scale(1.0 / g.re.sqrt());
    o.tail_threshold = 1e-17;
    Ok(quad_with(f, f64::NEG_INFINITY, f64::INFINITY, &o)?.value / (2.0 * PI).sqrt())
}

/// Constant `psi_tilde / FT[phi0]` at `eta = g_r^{-1/2}`: `(g_r / conj(g))^{1/4}`.
pub fn psi_tilde_ft_factor(g: Complex64) -> Complex64 {
    (Complex64::new(g.re, 0.0) / g.conj()).powf(0.25)
}

/// Lobe offsets of the cat state.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatSpec {
    pub x0: f64,
    pub p0: f64,
}

impl Default for CatSpec {
    fn default() -> Self {
        CatSpec { x0: 3.0, p0: 3.0 }
    }
}

fn cat_eta(g: Complex64) -> f64 {
    1.0 / g.re.sqrt()
}

/// `(psi_tilde(p - p0; x0) + psi_tilde(p + p0; -x0)) / sqrt(2)`.
pub fn cat_state(p: f64, g: Complex64, eta: f64, spec: &CatSpec) -> Result<Complex64, WignerError> {
    check_mode(g)?;
    Ok(cat_unchecked(p, g, eta, spec))
}

fn cat_unchecked(p: f64, g: Complex64, eta: f64, spec: &CatSpec) -> Complex64 {
    (psi_tilde_unchecked(p - spec.p0, g, eta, spec.x0) + psi_tilde_unchecked(p + spec.p0, g, eta, -spec.x0))
        / 2f64.sqrt()
}

/// `int |psi_c|^2 dp`.
pub fn cat_norm(g: Complex64, spec: &CatSpec) -> Result<f64, WignerError> {
    check_mode(g)?;
    let eta = cat_eta(g);
    let mut o = QuadOptions::new(1e-13)
        .with_breakpoints([-spec.p0, 0.0, spec.p0])
        .with_scale(g.norm() / g.re.sqrt());
    o.rel_tol = 1e-13;
    Ok(quad_with(|p| cat_unchecked(p, g, eta, spec).norm_sqr(), f64::NEG_INFINITY, f64::INFINITY, &o)?.value)
}

/// Interference cosine argument `a x0 p + b p0 x`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CosineArgument {
    pub a: f64,
    pub b: f64,
}

impl CosineArgument {
    /// As printed, `cos(2 x0 p + 2 p x0)`.
    pub const PRINTED: CosineArgument = CosineArgument { a: 4.0, b: 0.0 };
    /// Selected by the Fourier oracle, `cos(2 x0 p + 2 p0 x)`.
    pub const ORACLE: CosineArgument = CosineArgument { a: 2.0, b: 2.0 };

    pub fn eval(&self, x: f64, p: f64, spec: &CatSpec) -> f64 {
        self.a * spec.x0 * p + self.b * spec.p0 * x
    }
}

impl Default for CosineArgument {
    fn default() -> Self {
        CosineArgument::ORACLE
    }
}

/// Closed-form `W` with the oracle-selected interference argument.
pub fn wigner_closed(x: f64, p: f64, g: Complex64, spec: &CatSpec) -> Result<f64, WignerError> {
    wigner_closed_with(x, p, g, spec, CosineArgument::ORACLE)
}

pub fn wigner_closed_with(
    x: f64,
    p: f64,
    g: Complex64,
    spec: &CatSpec,
    arg: CosineArgument,
) -> Result<f64, WignerError> {
    check_mode(g)?;
    Ok(closed_unchecked(x, p, g, spec, arg))
}

fn closed_unchecked(x: f64, p: f64, g: Complex64, spec: &CatSpec, arg: CosineArgument) -> f64 {
    let (gr, gi) = (g.re, g.im);
    let g2 = g.norm_sqr();
    let (x0, p0) = (spec.x0, spec.p0);
    let i1 = (-(p - p0).powi(2) / gr - g2 * (x + x0).powi(2) / gr + 2.0 * gi * (p - p0) * (x + x0) / gr).exp();
    let i4 = (-(p + p0).powi(2) / gr - g2 * (x - x0).powi(2) / gr + 2.0 * gi * (p + p0) * (x - x0) / gr).exp();
    let i23 = 2.0
        * (-p * p / gr - gr * x * x - gi * (gi * x * x - 2.0 * x * p) / gr).exp()
        * arg.eval(x, p, spec).cos();
    (gr / (2.0 * PI * g.norm())).sqrt() * (i1 + i23 + i4)
}

/// Numerical Fourier oracle for `W`; both parts of the integral are kept so
/// the reality of `W` can be checked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WignerValue {
    pub re: f64,
    pub im: f64,
    pub error: f64,
}

pub fn wigner_numeric(x: f64, p: f64, g: Complex64, spec: &CatSpec) -> Result<WignerValue, WignerError> {
    check_mode(g)?;
    let eta = cat_eta(g);
    let f = |s: f64| {
        cat_unchecked(p - 0.5 * s, g, eta, spec) * cat_unchecked(p + 0.5 * s, g, eta, spec).conj()
            * Complex64::from_polar(1.0, s * x)
    };
    let p0 = spec.p0;
    let mut o = QuadOptions::new(1e-13)
        .with_breakpoints([0.0, 2.0 * (p - p0), 2.0 * (p + p0), -2.0 * (p - p0), -2.0 * (p + p0)])
        .with_scale(g.norm() / g.re.sqrt());
    o.tail_threshold = 1e-16;
    let est = quad_with(f, f64::NEG_INFINITY, f64::INFINITY, &o)?;
    let k = 1.0 / (2.0 * PI).sqrt();
    Ok(WignerValue { re: est.value.re * k, im: est.value.im * k, error: est.error * k })
}

/// Rectangle in phase space.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

/// Lobe centers plus six of the wider of the two marginal widths,
/// `sigma^2 = max(1/(2 g_r), |g|^2/(2 g_r))`.
pub fn default_bounds(g: Complex64, spec: &CatSpec) -> GridBounds {
    let sigma = (0.5 / g.re).max(0.5 * g.norm_sqr() / g.re).sqrt();
    let (xr, pr) = (spec.x0.abs() + 6.0 * sigma, spec.p0.abs() + 6.0 * sigma);
    GridBounds { x_min: -xr, x_max: xr, p_min: -pr, p_max: pr }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// `W` sampled on a uniform grid; `values[i * np + j]` is `W(xs[i], ps[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub t: Option<f64>,
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ps.len() + j]
    }

    /// Largest `|W(x,p) - W(-x,-p)|`; meaningful for symmetric bounds.
    pub fn point_asymmetry(&self) -> f64 {
        let (nx, np) = (self.xs.len(), self.ps.len());
        let mut worst: f64 = 0.0;
        for i in 0..nx {
            for j in 0..np {
                worst = worst.max((self.at(i, j) - self.at(nx - 1 - i, np - 1 - j)).abs());
            }
        }
        worst
    }

    /// `# t=<t> nx=<nx> np=<np>`, a column header, then `x,p,W` rows with
    /// `x` outer.
    pub fn to_csv(&self) -> String {
        let t = self.t.map_or_else(|| "none".to_string(), |t| t.to_string());
        let mut out = format!("# t={} nx={} np={}\nx,p,W\n", t, self.xs.len(), self.ps.len());
        for (i, x) in self.xs.iter().enumerate() {
            for (j, p) in self.ps.iter().enumerate() {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", x, p, self.at(i, j)));
            }
        }
        out
    }
}

/// Closed-form grid, parallel over rows.
pub fn wigner_grid(
    g: Complex64,
    spec: &CatSpec,
    nx: usize,
    np: usize,
    bounds: &GridBounds,
    arg: CosineArgument,
) -> Result<WignerGrid, WignerError> {
    check_mode(g)?;
    if nx < 16 || np < 16 {
        return Err(WignerError::InvalidGrid(format!("need nx, np >= 16, got {nx} x {np}")));
    }
    if !(bounds.x_max > bounds.x_min && bounds.p_max > bounds.p_min) {
        return Err(WignerError::InvalidGrid("empty bounds".into()));
    }
    let xs = linspace(bounds.x_min, bounds.x_max, nx);
    let ps = linspace(bounds.p_min, bounds.p_max, np);
    let values: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|&x| ps.iter().map(move |&p| closed_unchecked(x, p, g, spec, arg)))
        .collect();
    Ok(WignerGrid { t: None, xs, ps, values })
}

/// Largest `|closed - numeric|` and largest imaginary residue over an
/// `nx x np` grid with default bounds.
pub fn oracle_grid_deviation(
    g: Complex64,
    spec: &CatSpec,
    nx: usize,
    np: usize,
) -> Result<(f64, f64), WignerError> {
    let grid = wigner_grid(g, spec, nx, np, &default_bounds(g, spec), CosineArgument::ORACLE)?;
    grid_oracle_deviation(&grid, g, spec, 1.0)
}

/// Compares every grid value against `scale` times the numerical oracle;
/// returns the largest deviation and the largest imaginary residue.
pub fn grid_oracle_deviation(
    grid: &WignerGrid,
    g: Complex64,
    spec: &CatSpec,
    scale: f64,
) -> Result<(f64, f64), WignerError> {
    let rows: Vec<Result<(f64, f64), WignerError>> = (0..grid.xs.len())
        .into_par_iter()
        .map(|i| {
            let mut dev: f64 = 0.0;
            let mut im: f64 = 0.0;
            for (j, &p) in grid.ps.iter().enumerate() {
                let n = wigner_numeric(grid.xs[i], p, g, spec)?;
                dev = dev.max((grid.at(i, j) - scale * n.re).abs());
                im = im.max((scale * n.im).abs());
            }
            Ok((dev, im))
        })
        .collect();
    rows.into_iter().try_fold((0.0f64, 0.0f64), |(d, i), r| {
        let (a, b) = r?;
        Ok((d.max(a), i.max(b)))
    })
}

/// `W(0, 0)` from the closed form.
pub fn origin_interference(g: Complex64, spec: &CatSpec) -> Result<f64, WignerError> {
    wigner_closed(0.0, 0.0, g, spec)
}

/// `int int W dx dp = sqrt(2 pi) int |psi_c|^2 dp` under the kept
/// `(2 pi)^{-1/2}` convention; divide by it for a unit-mass distribution.
pub fn phase_space_integral(g: Complex64, spec: &CatSpec) -> Result<f64, WignerError> {
    Ok((2.0 * PI).sqrt() * cat_norm(g, spec)?)
}

pub fn wigner_normalized(x: f64, p: f64, g: Complex64, spec: &CatSpec) -> Result<f64, WignerError> {
    Ok(wigner_closed(x, p, g, spec)? / phase_space_integral(g, spec)?)
}

/// Outcome of fitting the interference argument to oracle samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineFit {
    pub arg: CosineArgument,
    /// Root-mean-square deviation from the oracle at the fitted argument.
    pub rms: f64,
    /// Same for the printed argument.
    pub printed_rms: f64,
}

/// Least-squares fit of `(a, b)` against the numerical oracle at `points`.
///
/// Scans `a` in `[0, 4]`, `b` in `[-4, 4]` (the cosine is even, so `a >= 0`
/// loses nothing), then refines by pattern search.
pub fn fit_cosine_argument(g: Complex64, spec: &CatSpec, points: &[(f64, f64)]) -> Result<CosineFit, WignerError> {
    check_mode(g)?;
    let oracle: Vec<f64> = points
        .par_iter()
        .map(|&(x, p)| wigner_numeric(x, p, g, spec).map(|v| v.re))
        .collect::<Result<_, _>>()?;
    let rms = |arg: CosineArgument| {
        let s: f64 = points
            .iter()
            .zip(&oracle)
            .map(|(&(x, p), w)| (closed_unchecked(x, p, g, spec, arg) - w).powi(2))
            .sum();
        (s / points.len() as f64).sqrt()
    };
    let mut best = CosineArgument { a: 0.0, b: 0.0 };
    let mut best_v = f64::INFINITY;
    for i in 0..=16 {
        for j in 0..=32 {
            let c = CosineArgument { a: 0.25 * i as f64, b: -4.0 + 0.25 * j as f64 };
            let v = rms(c);
            if v < best_v {
                best_v = v;
                best = c;
            }
        }
    }
    let mut step = 0.125;
    while step > 1e-12 {
        let mut moved = false;
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let c = CosineArgument { a: best.a + da, b: best.b + db };
            let v = rms(c);
            if v < best_v {
                best_v = v;
                best = c;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(CosineFit { arg: best, rms: best_v, printed_rms: rms(CosineArgument::PRINTED) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn psi_tilde_examples() {
        let v = psi_tilde(0.0, c(1.0, 0.0), 1.0, 0.0).unwrap();
        assert!((v - PI.powf(-0.25)).norm() < 1e-15);
        let g = c(0.8, 0.6);
        for p in [-2.0, 0.3, 1.7] {
            let a = psi_tilde(p, g, 1.0, 0.0).unwrap().norm();
            let b = psi_tilde(p, g, 1.0, 2.5).unwrap().norm();
            assert!((a - b).abs() < 1e-15);
        }
        assert!(psi_tilde(0.0, c(0.0, 1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn psi_tilde_against_fourier_transform() {
        for g in [c(1.0, 0.0), c(1.0, -0.4), c(0.3, 0.9)] {
            let eta = cat_eta(g);
            let k = psi_tilde_ft_factor(g);
            for (p, x0) in [(0.0, 0.0), (0.7, 1.5), (-1.2, -0.4)] {
                let ft = psi_tilde_ft_oracle(p, g, x0).unwrap();
                assert!((psi_tilde(p, g, eta, x0).unwrap() - k * ft).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn cat_examples() {
        let g = c(1.0, -0.3);
        let spec0 = CatSpec { x0: 0.0, p0: 0.0 };
        let eta = cat_eta(g);
        let v = cat_state(0.4, g, eta, &spec0).unwrap();
        assert!((v - psi_tilde(0.4, g, eta, 0.0).unwrap() * 2f64.sqrt()).norm() < 1e-15);
        let far = CatSpec { x0: 0.0, p0: 40.0 };
        let v = cat_state(40.0, g, eta, &far).unwrap();
        assert!((v - psi_tilde(0.0, g, eta, 0.0).unwrap() / 2f64.sqrt()).norm() < 1e-15);
        let n = cat_norm(c(1.0, 0.0), &CatSpec { x0: 5.0, p0: 5.0 }).unwrap();
        assert!((n - 1.0).abs() <= (-25f64).exp() + 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        let z = CatSpec { x0: 0.0, p0: 0.0 };
        let w = wigner_closed(0.3, -0.2, c(1.0, 0.0), &z).unwrap();
        assert!((w - 4.0 / (2.0 * PI).sqrt() * (-0.13f64).exp()).abs() < 1e-14);
        assert!((origin_interference(c(1.0, 0.0), &z).unwrap() - 4.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
        let far = CatSpec { x0: 10.0, p0: 10.0 };
        assert!((origin_interference(c(1.0, 0.0), &far).unwrap() - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
        let five = CatSpec { x0: 5.0, p0: 5.0 };
        assert!((wigner_closed(0.0, 0.0, c(1.0, 0.0), &five).unwrap() - 0.797_884_560_802_865_4).abs() < 1e-9);
    }

    #[test]
    fn numeric_matches_closed_form() {
        let g = c(1.0, -0.4);
        let spec = CatSpec::default();
        let n = wigner_numeric(1.0, 1.0, g, &spec).unwrap();
        assert!((n.re - wigner_closed(1.0, 1.0, g, &spec).unwrap()).abs() <= 1e-6);
        assert!(n.im.abs() <= 1e-10);
        // Single Gaussian: the coincident cat divided by two.
        let z = CatSpec { x0: 0.0, p0: 0.0 };
        let single = wigner_numeric(0.4, -0.3, g, &z).unwrap().re / 2.0;
        let i1 = (g.re / (2.0 * PI * g.norm())).sqrt()
            * (-0.09 / g.re - g.norm_sqr() * 0.16 / g.re + 2.0 * g.im * (-0.3) * 0.4 / g.re).exp();
        assert!((single - 2.0 * i1).abs() <= 1e-10);
    }

    #[test]
    fn oracle_selects_corrected_argument() {
        let g = c(1.0, -0.4);
        let spec = CatSpec::default();
        let pts: Vec<(f64, f64)> = [(-1.0, 0.5), (0.3, -0.2), (0.5, 0.1), (1.0, 1.0), (-0.7, -0.9), (0.0, 0.8)].to_vec();
        let fit = fit_cosine_argument(g, &spec, &pts).unwrap();
        assert!((fit.arg.a - 2.0).abs() < 1e-6 && (fit.arg.b - 2.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.rms < 1e-8 && fit.printed_rms > 1e-2);
    }

    #[test]
    fn grid_symmetry_and_csv() {
        let g = c(0.7, 0.3);
        let spec = CatSpec::default();
        let b = default_bounds(g, &spec);
        let grid = wigner_grid(g, &spec, 41, 41, &b, CosineArgument::ORACLE).unwrap();
        assert!(grid.point_asymmetry() <= 1e-10);
        assert!(grid.values.iter().all(|v| v.is_finite()));
        let csv = grid.to_csv();
        assert!(csv.starts_with("# t=none nx=41 np=41\nx,p,W\n"));
        assert_eq!(csv.lines().count(), 2 + 41 * 41);
        assert!(wigner_grid(g, &spec, 8, 41, &b, CosineArgument::ORACLE).is_err());
    }

    #[test]
    fn marginal_factor_is_constant() {
        let g = c(0.9, -0.5);
        let spec = CatSpec { x0: 1.0, p0: 1.5 };
        let eta = cat_eta(g);
        let mut o = QuadOptions::new(1e-14).with_scale(1.0);
        o.rel_tol = 1e-13;
        for p in [-1.5, 0.0, 0.4, 2.0] {
            let m = quad_with(|x| wigner_closed(x, p, g, &spec).unwrap(), f64::NEG_INFINITY, f64::INFINITY, &o)
                .unwrap()
                .value;
            let ratio = m / cat_state(p, g, eta, &spec).unwrap().norm_sqr();
            assert!((ratio - (2.0 * PI).sqrt()).abs() <= 1e-6, "p={p} ratio={ratio}");
        }
    }

    #[test]
    fn origin_independent_of_separation() {
        let g = c(1.0, -0.2);
        let a = origin_interference(g, &CatSpec { x0: 8.0, p0: 8.0 }).unwrap();
        let b = origin_interference(g, &CatSpec { x0: 12.0, p0: 9.0 }).unwrap();
        assert!((a - b).abs() <= 1e-6);
    }
}
