//! Numerical kernels: matrix exponential, root finding, ODE integration,
//! quadrature, Hermite polynomials and finite differences.

pub mod diff;
pub mod hermite;
pub mod matrix;
pub mod ode;
pub mod quad;
pub mod roots;

use num_complex::Complex64;
use thiserror::Error;

pub use diff::derivative;
pub use hermite::{hermite, hermite_generic};
pub use matrix::{mat_exp, Matrix3, Scalar};
pub use ode::{integrate_ode, integrate_ode_with, OdeOptions, Trajectory};
pub use quad::{quad, quad_with, QuadEstimate, QuadOptions, QuadValue};
pub use roots::find_root;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("root search did not converge after {iterations} iterations, bracket [{lo}, {hi}]")]
    Convergence { iterations: usize, lo: f64, hi: f64 },
    #[error("step size underflow (singularity) at t = {t}")]
    Singularity { t: f64 },
    #[error("quadrature missed its tolerance: best estimate {estimate}, error {error:e}")]
    Accuracy { estimate: Complex64, error: f64 },
    #[error("non-finite integrand on [{a}, {b}]")]
    NonFinite { a: f64, b: f64 },
}
