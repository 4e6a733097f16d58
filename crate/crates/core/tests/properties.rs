//! Randomized invariants across the pipeline.

use num_complex::Complex64;
use proptest::prelude::*;

use pt_amplifier::ep::{ep_residual, EtaState, GCoefficients, ToyBranch, ToyModel, ToyVariant};
use pt_amplifier::metric::{
    hermitian_oscillator_params, hermitized_coeffs_params, k_matrix_closed, k_matrix_exp, solve_metric_params,
    Kappa0Constraint, MetricParams,
};
use pt_amplifier::numerics::{hermite, integrate_ode, mat_exp, quad_with, Matrix3, QuadOptions};
use pt_amplifier::signals::{amplification_constraint, pt_unbroken_amplifier, AmplifierParams, EquivalentForm};
use pt_amplifier::states::{norm_sq, PhiForm};
use pt_amplifier::wigner::{default_bounds, origin_interference, wigner_grid, CatSpec, CosineArgument};

fn matrix() -> impl Strategy<Value = Matrix3> {
    (prop::array::uniform9(-1.0..1.0f64), 0.0..10.0f64).prop_map(|(e, r)| {
        let m = Matrix3::from_rows([[e[0], e[1], e[2]], [e[3], e[4], e[5]], [e[6], e[7], e[8]]]);
        let n = m.norm1();
        if n > 0.0 { m.scale(r / n) } else { m }
    })
}

fn unit_params(alpha: f64, beta: f64) -> AmplifierParams {
    AmplifierParams { omega: 1.0, alpha, beta, mass: 1.0 }
}

fn mode() -> impl Strategy<Value = Complex64> {
    (0.2..3.0f64, -2.0..2.0f64).prop_map(|(r, i)| Complex64::new(r, i))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_inverts(a in matrix()) {
        let e = mat_exp(&a).unwrap() * mat_exp(&a.scale(-1.0)).unwrap();
        prop_assert!(e.max_abs_diff(&Matrix3::identity()) <= 1e-10);
    }

    #[test]
    fn linear_ode_matches_exponential(a in matrix(), y in prop::array::uniform3(-1.0..1.0f64)) {
        let a = a.scale(0.3);
        let tr = integrate_ode(|_, y, dy| dy.copy_from_slice(&a.mul_vec([y[0], y[1], y[2]])), &y, (0.0, 1.0), 1e-10, 1e-12)
            .unwrap();
        let exact = mat_exp(&a).unwrap().mul_vec(y);
        let got = tr.last_state();
        let scale = exact.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for k in 0..3 {
            prop_assert!((got[k] - exact[k]).abs() <= 10.0 * 1e-10 * scale, "{} vs {}", got[k], exact[k]);
        }
    }

    #[test]
    fn predicate_matches_closed_region_for_positive_rates(alpha in 1e-6..1.5f64, beta in 1e-6..1.5f64) {
        prop_assert_eq!(pt_unbroken_amplifier(&unit_params(alpha, beta)), amplification_constraint(alpha, beta));
    }

    #[test]
    fn closed_transformation_is_the_exponential(kappa in -2.0..2.0f64, theta in 1e-3..4.0f64, flip: bool) {
        let k0 = (theta * theta + 4.0 * kappa * kappa).sqrt() * if flip { -1.0 } else { 1.0 };
        let m = MetricParams::new(kappa, k0).unwrap();
        let closed = k_matrix_closed(&m);
        let exp = k_matrix_exp(&m).unwrap();
        let scale = exp.max_abs().max(1.0);
        prop_assert!(closed.max_abs_diff(&exp) <= 1e-9 * scale);
        prop_assert!((closed.determinant() - 1.0).abs() <= 1e-9 * scale.powi(3));
    }

    #[test]
    fn metric_root_satisfies_constraint(alpha in 0.01..0.45f64, beta in 0.01..0.45f64, kappa in 0.2..3.0f64) {
        prop_assume!((alpha - beta).abs() > 1e-3);
        let p = unit_params(alpha, beta);
        let m = solve_metric_params(&p, kappa, 1e-13).unwrap();
        let f = Kappa0Constraint::from_params(&p, kappa).value(m.kappa0).unwrap();
        prop_assert!(f.abs() <= 1e-8, "F = {f:e}");
    }

    #[test]
    fn hermitian_input_keeps_equivalent_form(omega in 0.5..2.0f64, rate in 0.0..0.2f64, mass in 0.5..2.0f64) {
        let p = AmplifierParams { omega, alpha: rate, beta: rate, mass };
        let m = solve_metric_params(&p, 1.0, 1e-12).unwrap();
        prop_assert!(m.is_identity());
        let c = hermitized_coeffs_params(&p, &m, 1e-10).unwrap();
        let o = hermitian_oscillator_params(&c, &p).unwrap();
        let e = EquivalentForm::from_params(&p, 0.0).unwrap();
        prop_assert_eq!(e.nu_minus, 0.0);
        prop_assert!((o.m0 - e.mass).abs() <= 1e-10 * e.mass.abs());
        prop_assert!((o.omega0_sq - e.omega_sq).abs() <= 1e-10);
    }

    #[test]
    fn toy_branches_conserve_ermakov_and_flip_sign(c1 in 1.0..6.0f64, c2 in -3.0..3.0f64, t in 1.0..10.0f64, b in 0usize..4) {
        let model = ToyModel::new(c1, c2).unwrap();
        let s = model.eval(ToyBranch::ALL[b], ToyVariant::SignedSin, t).unwrap();
        let g = GCoefficients::from_eta(s.eta, s.etadot, t, 1.0);
        prop_assert!(g.g1 > 0.0);
        prop_assert!(g.ermakov_defect().abs() <= 1e-8 * g.g1 * g.g2);
        let r = ep_residual(&s, t, 1.0, 1.0 / (t * t), 1.0);
        let neg = EtaState { eta: -s.eta, etadot: -s.etadot, etaddot: -s.etaddot, kink: s.kink };
        let rn = ep_residual(&neg, t, 1.0, 1.0 / (t * t), 1.0);
        let scale = s.etaddot.abs() + 1.0 / (t * t * s.eta.powi(3)).abs();
        prop_assert!(r.abs() <= 1e-8 * scale);
        prop_assert!(rn.abs() <= 1e-8 * scale);
    }

    #[test]
    fn eigenfunctions_are_normalized(g in mode(), n in 0usize..=6) {
        let v = norm_sq(n, g, PhiForm::Eigen).unwrap();
        prop_assert!((v - 1.0).abs() <= 1e-8, "n = {n}, norm {v}");
    }

    #[test]
    fn symmetric_cat_is_point_symmetric(g in mode(), x0 in -4.0..4.0f64, p0 in -4.0..4.0f64) {
        let cat = CatSpec { x0, p0 };
        let grid = wigner_grid(g, &cat, 33, 33, &default_bounds(g, &cat), CosineArgument::ORACLE).unwrap();
        let peak = grid.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(grid.point_asymmetry() <= 1e-12 * peak.max(1.0));
    }

    #[test]
    fn origin_interference_ignores_lobe_offsets(g in mode(), x0 in 10.0..20.0f64, p0 in 10.0..20.0f64) {
        // lobes sit many standard deviations apart for these offsets
        let near = origin_interference(g, &CatSpec { x0: 10.0, p0: 10.0 }).unwrap();
        let far = origin_interference(g, &CatSpec { x0, p0 }).unwrap();
        prop_assert!((near.abs() - far.abs()).abs() <= 1e-6, "{near} vs {far}");
    }
}

#[test]
fn hermite_polynomials_are_orthogonal() {
    let norm = |n: usize| (1..=n).fold(std::f64::consts::PI.sqrt(), |a, k| a * 2.0 * k as f64);
    for m in 0..=8usize {
        for n in 0..=8usize {
            // errors are measured against the norms, since off-diagonal values vanish
            let scale = (norm(m) * norm(n)).sqrt();
            let opts = QuadOptions::new(1e-11 * scale);
            let v: f64 = quad_with(|x: f64| hermite(m, x) * hermite(n, x) * (-x * x).exp(), -12.0, 12.0, &opts).unwrap().value;
            let want = if m == n { norm(n) } else { 0.0 };
            assert!((v - want).abs() <= 1e-8 * scale, "m = {m}, n = {n}: {v} vs {want}");
        }
    }
}

#[test]
fn region_identity_breaks_where_rates_have_opposite_signs() {
    // alpha beta < 0 with alpha + beta > 1: the closed region admits the point,
    // the predicate does not.
    assert!(amplification_constraint(-0.5, 1.5));
    assert!(!pt_unbroken_amplifier(&unit_params(-0.5, 1.5)));
}
