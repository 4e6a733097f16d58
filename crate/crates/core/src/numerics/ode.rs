//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! Trajectories produced by the integrator interpolate with the method's own
//! fourth-order continuous extension; trajectories assembled from bare nodes
//! fall back to cubic Hermite interpolation. Both are C1 across nodes.

use super::NumericsError;

/// Step-size control and safety limits.
#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        OdeOptions {
            rel_tol,
            abs_tol,
            initial_step: None,
            max_step: None,
            max_steps: 1_000_000,
        }
    }
}

/// Accepted steps of an integration, with state and derivative at each node.
///
/// Times are stored strictly increasing even for backward integrations.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    // Per-segment continuous-extension coefficients (r3, r4, r5), in
    // storage order. Absent for node-only trajectories.
    dense: Option<Vec<[Vec<f64>; 3]>>,
}

impl Trajectory {
    /// Builds a trajectory from nodes; validates ordering and dimensions.
    pub fn from_nodes(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        derivs: Vec<Vec<f64>>,
    ) -> Result<Self, NumericsError> {
        if times.len() < 2 || states.len() != times.len() || derivs.len() != times.len() {
            return Err(NumericsError::InvalidArgument(
                "trajectory needs at least two nodes with matching states".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NumericsError::InvalidArgument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        let dim = states[0].len();
        if states.iter().chain(derivs.iter()).any(|s| s.len() != dim) {
            return Err(NumericsError::InvalidArgument(
                "trajectory state dimension must be constant".into(),
            ));
        }
        Ok(Trajectory { times, states, derivs, dense: None })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn derivatives(&self) -> &[Vec<f64>] {
        &self.derivs
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn segment(&self, t: f64) -> Result<usize, NumericsError> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-12 * (t1 - t0).abs().max(t1.abs());
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(NumericsError::InvalidArgument(format!(
                "time {t} outside trajectory [{t0}, {t1}]"
            )));
        }
        let i = self.times.partition_point(|&s| s <= t);
        Ok(i.clamp(1, self.times.len() - 1) - 1)
    }

    /// Interpolated state at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, NumericsError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), NumericsError> {
        let i = self.segment(t)?;
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let (ya, yb) = (&self.states[i], &self.states[i + 1]);
        if let Some(dense) = &self.dense {
            let [r3, r4, r5] = &dense[i];
            let u = 1.0 - s;
            for k in 0..out.len() {
                let r2 = yb[k] - ya[k];
                out[k] = ya[k] + s * (r2 + u * (r3[k] + s * (r4[k] + u * r5[k])));
            }
            return Ok(());
        }
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (fa, fb) = (&self.derivs[i], &self.derivs[i + 1]);
        for k in 0..out.len() {
            out[k] = h00 * ya[k] + h10 * h * fa[k] + h01 * yb[k] + h11 * h * fb[k];
        }
        Ok(())
    }

    /// Time derivative of the interpolant at `t`.
    pub fn eval_derivative(&self, t: f64) -> Result<Vec<f64>, NumericsError> {
        let i = self.segment(t)?;
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let (ya, yb) = (&self.states[i], &self.states[i + 1]);
        if let Some(dense) = &self.dense {
            let [r3, r4, r5] = &dense[i];
            let c3 = 1.0 - 2.0 * s;
            let c4 = s * (2.0 - 3.0 * s);
            let c5 = 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
            return Ok((0..self.dim())
                .map(|k| (yb[k] - ya[k] + c3 * r3[k] + c4 * r4[k] + c5 * r5[k]) / h)
                .collect());
        }
        let d00 = 6.0 * s * (s - 1.0) / h;
        let d10 = (1.0 - s) * (1.0 - 3.0 * s);
        let d01 = -d00;
        let d11 = s * (3.0 * s - 2.0);
        let (fa, fb) = (&self.derivs[i], &self.derivs[i + 1]);
        Ok((0..self.dim())
            .map(|k| d00 * ya[k] + d10 * fa[k] + d01 * yb[k] + d11 * fb[k])
            .collect())
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

// Dormand-Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer, Norsett & Wanner).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = rhs(t, y)` over `t_span` with the given tolerances.
pub fn integrate_ode<F>(
    rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory, NumericsError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_ode_with(rhs, y0, t_span, &OdeOptions::new(rel_tol, abs_tol))
}

pub fn integrate_ode_with<F>(
    mut rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    opts: &OdeOptions,
) -> Result<Trajectory, NumericsError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
        return Err(NumericsError::InvalidArgument(format!(
            "integrate_ode: degenerate time span ({t0}, {t1})"
        )));
    }
    if !(opts.rel_tol > 0.0) || !(opts.abs_tol >= 0.0) {
        return Err(NumericsError::InvalidArgument(
            "integrate_ode: tolerances must be positive".into(),
        ));
    }
    if y0.is_empty() || y0.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::InvalidArgument(
            "integrate_ode: initial state must be finite and nonempty".into(),
        ));
    }
    let n = y0.len();
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let max_step = opts.max_step.unwrap_or(span);

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n];
    rhs(t, &y, &mut f);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::Singularity { t });
    }

    let weight = |a: f64, b: f64| opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
    let mut h = match opts.initial_step {
        Some(h) => h.abs().min(max_step),
        None => {
            let d0 = rms(y.iter().map(|&v| v / weight(v, v)));
            let d1 = rms(y.iter().zip(&f).map(|(&v, &fv)| fv / weight(v, v)));
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            let h0 = h0.min(max_step).min(span);
            let y1: Vec<f64> = y.iter().zip(&f).map(|(&v, &fv)| v + dir * h0 * fv).collect();
            let mut f1 = vec![0.0; n];
            rhs(t + dir * h0, &y1, &mut f1);
            let d2 = rms(
                f1.iter()
                    .zip(&f)
                    .zip(&y)
                    .map(|((&a, &b), &v)| (a - b) / weight(v, v)),
            ) / h0;
            let h1 = if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            };
            (100.0 * h0).min(h1).min(max_step)
        }
    };

    let mut times = vec![t];
    let mut states = vec![y.clone()];
    let mut derivs = vec![f.clone()];
    let mut dense: Vec<[Vec<f64>; 3]> = Vec::new();

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let mut steps = 0usize;
    while dir * (t1 - t) > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(NumericsError::Singularity { t });
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1e-300) || !h.is_finite() {
            return Err(NumericsError::Singularity { t });
        }
        let mut last = false;
        if h >= (t1 - t).abs() {
            h = (t1 - t).abs();
            last = true;
        }
        let hs = dir * h;

        for i in 0..n {
            tmp[i] = y[i] + hs * A21 * f[i];
        }
        rhs(t + C2 * hs, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A31 * f[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A41 * f[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A51 * f[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i]
                + hs * (A61 * f[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + hs, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] =
                y[i] + hs * (B1 * f[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        rhs(t_new, &y_new, &mut k7);

        let err = rms((0..n).map(|i| {
            let e = hs
                * (E1 * f[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            e / weight(y[i], y_new[i])
        }));

        if err.is_finite() && err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
            let mut r3 = vec![0.0; n];
            let mut r4 = vec![0.0; n];
            let mut r5 = vec![0.0; n];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * f[i] - ydiff;
                r3[i] = bspl;
                r4[i] = ydiff - hs * k7[i] - bspl;
                r5[i] = hs
                    * (D1 * f[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            dense.push([r3, r4, r5]);
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut f, &mut k7);
            times.push(t);
            states.push(y.clone());
            derivs.push(f.clone());
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * factor).min(max_step);
        } else {
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= factor;
        }
    }

    if dir < 0.0 {
        // Re-expand each segment polynomial around its new left node
        // (s -> 1-s): r3 -> r3 + r4, r4 -> -r4, r5 unchanged.
        times.reverse();
        states.reverse();
        derivs.reverse();
        dense.reverse();
        for seg in dense.iter_mut() {
            let [r3, r4, _] = seg;
            for k in 0..n {
                r3[k] += r4[k];
                r4[k] = -r4[k];
            }
        }
    }
    let mut tr = Trajectory::from_nodes(times, states, derivs)?;
    tr.dense = Some(dense);
    Ok(tr)
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in it {
        s += v * v;
        n += 1;
    }
    (s / n.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::{mat_exp, Matrix3};

    #[test]
    fn exponential_decay() {
        let tr = integrate_ode(|_, y, d| d[0] = -y[0], &[1.0], (0.0, 1.0), 1e-11, 1e-13).unwrap();
        assert!((tr.last_state()[0] - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(tr.t_end(), 1.0);
    }

    #[test]
    fn oscillator_energy_drift() {
        let tr = integrate_ode(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &[1.0, 0.0],
            (0.0, 100.0),
            1e-11,
            1e-13,
        )
        .unwrap();
        let drift = tr
            .states()
            .iter()
            .map(|s| (0.5 * (s[0] * s[0] + s[1] * s[1]) - 0.5).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-6, "drift {drift}");
    }

    #[test]
    fn linear_system_matches_exponential() {
        let a = Matrix3::from_rows([[-0.3, 1.0, 0.2], [-1.0, -0.1, 0.0], [0.4, 0.3, -0.5]]);
        let y0 = [1.0, -0.5, 2.0];
        let rel = 1e-9;
        let tr = integrate_ode(
            |_, y, d| {
                let v = a.mul_vec([y[0], y[1], y[2]]);
                d.copy_from_slice(&v);
            },
            &y0,
            (0.0, 3.0),
            rel,
            1e-12,
        )
        .unwrap();
        for &t in &[0.5, 1.7, 3.0] {
            let exact = mat_exp(&a.scale(t)).unwrap().mul_vec(y0);
            let got = tr.eval(t).unwrap();
            for k in 0..3 {
                let e = (got[k] - exact[k]).abs();
                assert!(e <= 10.0 * rel * exact[k].abs().max(1.0), "t={t} k={k} err={e:e}");
            }
        }
    }

    #[test]
    fn backward_integration_is_stored_increasing() {
        let tr = integrate_ode(|_, y, d| d[0] = y[0], &[1.0], (1.0, 0.0), 1e-10, 1e-12).unwrap();
        assert!(tr.times().windows(2).all(|w| w[1] > w[0]));
        assert!((tr.eval(0.0).unwrap()[0] - (-1.0f64).exp()).abs() < 1e-8);
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!((tr.eval(t).unwrap()[0] - (t - 1.0).exp()).abs() < 1e-9);
            assert!((tr.eval_derivative(t).unwrap()[0] - (t - 1.0).exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn dense_output_is_continuous_and_accurate() {
        let tr = integrate_ode(|t, _, d| d[0] = t.cos(), &[0.0], (0.0, 5.0), 1e-10, 1e-12).unwrap();
        for k in 0..=500 {
            let t = 5.0 * k as f64 / 500.0;
            assert!((tr.eval(t).unwrap()[0] - t.sin()).abs() < 1e-9);
            assert!((tr.eval_derivative(t).unwrap()[0] - t.cos()).abs() < 1e-7);
        }
        assert!(tr.eval(5.5).is_err());
    }

    #[test]
    fn blow_up_reports_singularity() {
        // y' = y^2, y(0)=1 blows up at t=1.
        let err = integrate_ode(|_, y, d| d[0] = y[0] * y[0], &[1.0], (0.0, 2.0), 1e-8, 1e-10)
            .unwrap_err();
        match err {
            NumericsError::Singularity { t } => assert!(t > 0.99 && t <= 1.0 + 1e-6, "t={t}"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn degenerate_span() {
        assert!(integrate_ode(|_, _, d| d[0] = 0.0, &[1.0], (1.0, 1.0), 1e-8, 1e-8).is_err());
    }
}
