//! Globally adaptive Gauss-Kronrod (7/15) quadrature with tail truncation
//! for infinite limits.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::NumericsError;

/// Values that can be integrated: real or complex.
pub trait QuadValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
    fn to_complex(self) -> Complex64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integration settings.
#[derive(Clone, Debug)]
pub struct QuadOptions {
    /// Absolute error target.
    pub abs_tol: f64,
    /// Relative error target; the looser of the two wins.
    pub rel_tol: f64,
    pub max_subintervals: usize,
    /// Integrand magnitude below which infinite tails are cut off.
    pub tail_threshold: f64,
    /// Points where the integrand has structure (peaks, kinks). Used to seed
    /// the initial partition and to anchor tail scans.
    pub breakpoints: Vec<f64>,
    /// Length scale of the first tail-scan step.
    pub scale: f64,
}

impl QuadOptions {
    pub fn new(abs_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol: 0.0,
            max_subintervals: 4000,
            tail_threshold: 1e-14,
            breakpoints: Vec::new(),
            scale: 1.0,
        }
    }

    pub fn with_breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points.into_iter().filter(|p| p.is_finite()));
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

/// Result of a successful integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadEstimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

/// Integrates `f` over `[a, b]` to absolute accuracy `tol`. Either limit may
/// be infinite.
pub fn quad<T, F>(f: F, a: f64, b: f64, tol: f64) -> Result<T, NumericsError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    quad_with(f, a, b, &QuadOptions::new(tol)).map(|r| r.value)
}

pub fn quad_with<T, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadEstimate<T>, NumericsError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if a.is_nan() || b.is_nan() || !(opts.abs_tol > 0.0 || opts.rel_tol > 0.0) {
        return Err(NumericsError::InvalidArgument(format!(
            "quad: invalid limits or tolerance (a={a}, b={b}, tol={})",
            opts.abs_tol
        )));
    }
    if a == b {
        return Ok(QuadEstimate { value: T::zero(), error: 0.0, evaluations: 0 });
    }
    if a > b {
        return quad_with(f, b, a, opts).map(|r| QuadEstimate { value: r.value * -1.0, ..r });
    }

    let mut evals = 0usize;
    let mut cuts: Vec<f64> = Vec::new();
    let (lo, hi) = {
        let finite_bps: Vec<f64> = opts
            .breakpoints
            .iter()
            .copied()
            .filter(|p| *p > a && *p < b)
            .collect();
        let anchor_hi = if a.is_finite() {
            a
        } else {
            finite_bps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let anchor_lo = if b.is_finite() {
            b
        } else {
            finite_bps.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let default_anchor = if a.is_finite() {
            a
        } else if b.is_finite() {
            b
        } else {
            0.0
        };
        let anchor_hi = if anchor_hi.is_finite() { anchor_hi } else { default_anchor };
        let anchor_lo = if anchor_lo.is_finite() { anchor_lo } else { default_anchor };
        let lo = if a.is_finite() {
            a
        } else {
            tail_cut(&f, anchor_lo, -1.0, opts, &mut evals, &mut cuts)
        };
        let hi = if b.is_finite() {
            b
        } else {
            tail_cut(&f, anchor_hi, 1.0, opts, &mut evals, &mut cuts)
        };
        (lo, hi)
    };

    let mut nodes: Vec<f64> = vec![lo, hi];
    nodes.extend(opts.breakpoints.iter().copied().filter(|p| *p > lo && *p < hi));
    nodes.extend(cuts.iter().copied().filter(|p| *p > lo && *p < hi));
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    nodes.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * x.abs().max(1.0));

    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut total_err = 0.0;
    for w in nodes.windows(2) {
        let seg = gk15(&f, w[0], w[1]);
        evals += 15;
        if !seg.error.is_finite() {
            return Err(NumericsError::NonFinite { a: seg.a, b: seg.b });
        }
        total = total + seg.value;
        total_err += seg.error;
        heap.push(seg);
    }

    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if total_err <= target {
            break;
        }
        if heap.len() >= opts.max_subintervals {
            return Err(NumericsError::Accuracy {
                estimate: total.to_complex(),
                error: total_err,
            });
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval cannot be split further in floating point.
            return Err(NumericsError::Accuracy {
                estimate: total.to_complex(),
                error: total_err,
            });
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evals += 30;
        if !(left.error.is_finite() && right.error.is_finite()) {
            return Err(NumericsError::NonFinite { a: worst.a, b: worst.b });
        }
        total = total - worst.value + left.value + right.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Refresh the running sums periodically to shed rounding drift.
        if heap.len() % 64 == 0 {
            total = heap.iter().fold(T::zero(), |acc, s| acc + s.value);
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().fold(T::zero(), |acc, s| acc + s.value);
    let error = heap.iter().map(|s| s.error).sum();
    Ok(QuadEstimate { value, error, evaluations: evals })
}

/// Walks outward from `anchor` in geometrically growing steps until the
/// integrand stays below the tail threshold, and returns the cut point.
fn tail_cut<T, F>(
    f: &F,
    anchor: f64,
    dir: f64,
    opts: &QuadOptions,
    evals: &mut usize,
    cuts: &mut Vec<f64>,
) -> f64
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let scale = if opts.scale > 0.0 { opts.scale } else { 1.0 };
    let mut last_above = 0.0;
    let mut quiet = 0;
    let mut d = 0.0;
    for k in 0..64 {
        d = scale * 2f64.powi(k);
        let x = anchor + dir * d;
        *evals += 1;
        let v = f(x).magnitude();
        if v >= opts.tail_threshold || !v.is_finite() {
            last_above = d;
            quiet = 0;
        } else {
            quiet += 1;
        }
        if k >= 6 && quiet >= 4 {
            break;
        }
    }
    let reach = if last_above > 0.0 { 2.0 * last_above } else { d.min(scale * 4.0) };
    // Seed the partition with the scan points inside the kept range.
    let mut s = scale;
    while s < reach {
        cuts.push(anchor + dir * s);
        s *= 2.0;
    }
    anchor + dir * reach
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<T, F>(f: &F, a: f64, b: f64) -> Segment<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kron = kron + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kron * 0.5;
    let mut resasc = WGK[7] * (fc - mean).magnitude();
    let mut resabs = WGK[7] * fc.magnitude();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
        resabs += WGK[j] * (fv1[j].magnitude() + fv2[j].magnitude());
    }
    let resasc = resasc * h.abs();
    let resabs = resabs * h.abs();
    let mut err = ((kron - gauss) * h).magnitude();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let round = 10.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (10.0 * f64::EPSILON) && err < round {
        err = round;
    }
    if !err.is_finite() {
        err = f64::INFINITY;
    }
    Segment { a, b, value: kron * h, error: err }
}
