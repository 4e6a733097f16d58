//! Command implementations. Each returns the files it wrote.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};

use pt_amplifier::ep::{
    default_initial_conditions, ep_integrate, rows_to_csv, smooth_variant_verdict, tabulate, ToyBranch, ToyModel,
};
use pt_amplifier::metric::{
    hermitian_oscillator_params, hermitized_coeffs_params, solve_metric_params, HermitianPartner, Kappa0Constraint,
};
use pt_amplifier::signals::{
    amplification_constraint, pt_region_scan, pt_unbroken_amplifier, AmplifierParams, BilinearForm, ParameterSignal,
};
use pt_amplifier::states::{covariance, density_grid, density_to_csv, rsup_check, CovarianceForm, Evolution, Pipeline, PsiRoute};
use pt_amplifier::wigner::{
    default_bounds, grid_oracle_deviation, phase_space_integral, wigner_closed_with, wigner_grid, GridBounds,
    WignerGrid,
};

use crate::config::{EpMode, RunConfig};
use crate::CliError;

/// Largest closed-versus-oracle deviation accepted by `--oracle-check`.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn check_rates(cfg: &RunConfig, p: &AmplifierParams, t: f64) -> Result<(), CliError> {
    if !cfg.allow_negative_rates && (p.alpha < 0.0 || p.beta < 0.0) {
        return Err(CliError::Domain(format!(
            "negative amplification rate at t = {t}: alpha = {}, beta = {}; the default domain is \
             alpha, beta >= 0 (set allow_negative_rates to override)",
            p.alpha, p.beta
        )));
    }
    Ok(())
}

/// `pt_region.csv`: `alpha,beta,unbroken,constraint` with booleans as 0/1;
/// `constraint` is the closed-form region `alpha beta (1 - alpha - beta) >= 0`.
pub fn pt_region(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let c = &cfg.pt_region;
    let region = pt_region_scan((c.alpha[0], c.alpha[1]), (c.beta[0], c.beta[1]), c.n)?;
    let mut csv = String::from("alpha,beta,unbroken,constraint\n");
    let mut disagree = 0usize;
    for (i, &a) in region.alphas.iter().enumerate() {
        for (j, &b) in region.betas.iter().enumerate() {
            let (u, k) = (region.at(i, j), amplification_constraint(a, b));
            disagree += usize::from(u != k);
            writeln!(csv, "{},{},{},{}", f(a), f(b), u as u8, k as u8).unwrap();
        }
    }
    if disagree > 0 {
        warn!("{disagree} grid points where the predicate and the closed-form region disagree");
    }
    Ok(vec![write(&cfg.out, "pt_region.csv", &csv)?])
}

/// `kappa0_constraint.csv`: `kappa0,lhs,rhs,F` from just above `2|kappa|`
/// to `max(20, 2 kappa0)`, skipping the pole.
fn constraint_curve(cfg: &RunConfig, p: &AmplifierParams, root: f64) -> Result<PathBuf, CliError> {
    let c = Kappa0Constraint::from_params(p, cfg.kappa);
    let lo = c.lower_bound() + 1e-6;
    let mut csv = String::from("kappa0,lhs,rhs,F\n");
    for k0 in lin(lo, 20f64.max(2.0 * root.abs()), 2001) {
        if let Ok(v) = c.value(k0) {
            writeln!(csv, "{},{},{},{}", f(k0), f(c.lhs(k0)), f(c.rhs(k0)), f(v)).unwrap();
        }
    }
    write(&cfg.out, "kappa0_constraint.csv", &csv)
}

/// Metric solve at `metric_time`, returned as a `key = value` report. Also
/// writes the constraint curve when the input is not already Hermitian.
pub fn metric_solve(cfg: &RunConfig) -> Result<String, CliError> {
    let t = cfg.metric_time;
    let p = cfg.amplifier.params_at(t)?;
    check_rates(cfg, &p, t)?;
    if !pt_unbroken_amplifier(&p) {
        let h = BilinearForm::from_params(&p);
        return Err(CliError::Domain(format!(
            "broken PT at t = {t}: discriminant = {:.6e} (needs >= 0), p^2 coefficient = {:.6e} (needs >= 0), \
             alpha beta (1 - alpha - beta) = {:.6e}",
            h.discriminant(),
            h.h22,
            p.alpha * p.beta * (1.0 - p.alpha - p.beta)
        )));
    }
    let m = solve_metric_params(&p, cfg.kappa, cfg.tol.min(1e-12))?;
    let c = hermitized_coeffs_params(&p, &m, 1e-6)?;
    let o = hermitian_oscillator_params(&c, &p)?;
    let mut r = String::new();
    writeln!(r, "t = {}", f(t)).unwrap();
    writeln!(r, "omega = {}\nalpha = {}\nbeta = {}\nmass = {}", f(p.omega), f(p.alpha), f(p.beta), f(p.mass)).unwrap();
    if m.is_identity() {
        writeln!(r, "metric = identity (alpha = beta, Hermitian input)").unwrap();
    } else {
        constraint_curve(cfg, &p, m.kappa0)?;
        writeln!(r, "kappa = {}\nkappa0 = {}\ntheta = {}", f(m.kappa), f(m.kappa0), f(m.theta)).unwrap();
    }
    writeln!(r, "omega0 = {}\nalpha0 = {}\nbeta0 = {}", f(c.omega0), f(c.alpha0), f(c.beta0)).unwrap();
    writeln!(r, "M0 = {}\nOmega0^2 = {}", f(o.m0), f(o.omega0_sq)).unwrap();
    writeln!(r, "hermiticity_residual = {:.3e}", c.hermiticity_residual).unwrap();
    writeln!(r, "closed_form_deviation = {:.3e}", c.closed_form_deviation).unwrap();
    if o.is_inverted() {
        writeln!(r, "note = inverted oscillator (Omega0^2 < 0)").unwrap();
    }
    Ok(r)
}

/// `M0` and `Omega0^2` of the Hermitian partner sampled on `span`.
fn partner_tables(cfg: &RunConfig, span: (f64, f64)) -> Result<(ParameterSignal, ParameterSignal), CliError> {
    let partner = HermitianPartner::new(cfg.amplifier.clone(), cfg.kappa, cfg.tol.min(1e-12));
    let ts = lin(span.0, span.1, cfg.ep.partner_samples);
    let (mut m, mut w) = (Vec::with_capacity(ts.len()), Vec::with_capacity(ts.len()));
    let mut jumps = 0;
    for &t in &ts {
        check_rates(cfg, &cfg.amplifier.params_at(t)?, t)?;
        let pt = partner.solve_at(t)?;
        jumps += usize::from(pt.branch_jump);
        m.push(pt.oscillator.m0);
        w.push(pt.oscillator.omega0_sq);
    }
    if jumps > 0 {
        warn!("tracked metric root differs from the smallest root at {jumps} sample(s)");
    }
    Ok((ParameterSignal::table(ts.clone(), m)?, ParameterSignal::table(ts, w)?))
}

fn numeric_pipeline(cfg: &RunConfig, span: (f64, f64)) -> Result<Pipeline, CliError> {
    let (m, w) = partner_tables(cfg, span)?;
    let eta0 = cfg.ep.eta0;
    let eta = match cfg.ep.eta_init {
        Some(e) => e,
        None => default_initial_conditions(&m, &w, eta0, span.0)?.0,
    };
    let etadot = cfg.ep.etadot_init.unwrap_or(0.0);
    info!("EP start at t = {}: eta = {eta}, eta' = {etadot}", span.0);
    let sol = ep_integrate(&m, &w, eta0, eta, etadot, span, cfg.tol)?;
    Ok(Pipeline::new(sol, m, w))
}

fn hull(span: [f64; 2], times: &[f64]) -> (f64, f64) {
    times.iter().fold((span[0], span[1]), |(a, b), &t| (a.min(t), b.max(t)))
}

/// Pipeline covering `ep.span` and `times`. The toy model stretches its
/// span; numeric runs require the times inside `ep.span`.
pub fn build_pipeline(cfg: &RunConfig, branch: ToyBranch, times: &[f64]) -> Result<Pipeline, CliError> {
    match cfg.ep.mode {
        EpMode::Toy => {
            let model = ToyModel::new(cfg.ep.c1, cfg.ep.c2)?;
            Ok(Pipeline::toy(&model, branch, hull(cfg.ep.span, times)))
        }
        EpMode::Numeric => {
            let [a, b] = cfg.ep.span;
            if let Some(t) = times.iter().find(|&&t| t < a || t > b) {
                return Err(CliError::Domain(format!("t = {t} lies outside ep.span [{a}, {b}]")));
            }
            numeric_pipeline(cfg, (a, b))
        }
    }
}

/// `ep_numeric.csv`: numerical EP trajectory on the amplifier's partner.
pub fn ep_solve(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let span = (cfg.ep.span[0], cfg.ep.span[1]);
    let p = numeric_pipeline(cfg, span)?;
    let times = cfg.evolve_times();
    let rows = tabulate(&p.sol, &p.m0, &p.omega0_sq, &times)?;
    Ok(vec![write(&cfg.out, "ep_numeric.csv", &rows_to_csv(&rows))?])
}

/// `eta_branches.csv` (all four smooth branches) and `ep_toy.csv` (the
/// configured branch with coefficients and residual).
pub fn ep_toy(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = ToyModel::new(cfg.ep.c1, cfg.ep.c2)?;
    let branch = cfg.ep.branch()?;
    let [a, b] = cfg.ep.span;
    let verdict = smooth_variant_verdict(&model, branch, a, b, 500)?;
    println!("branch {}: {}", branch.label(), verdict.summary());
    for k in &verdict.kinks {
        println!("|sin| kink at t = {}", f(*k));
    }
    let variant = verdict.smooth_variant;
    let times = cfg.evolve_times();
    let mut csv = String::from("t,eta_1p,eta_1m,eta_2p,eta_2m\n");
    for &t in &times {
        csv.push_str(&f(t));
        for br in ToyBranch::ALL {
            csv.push(',');
            csv.push_str(&f(model.eval(br, variant, t)?.eta));
        }
        csv.push('\n');
    }
    let sol = model.solution(branch, variant, (a, b));
    let rows = tabulate(&sol, &ToyModel::mass_signal(), &ToyModel::omega_sq_signal(), &times)?;
    Ok(vec![
        write(&cfg.out, "eta_branches.csv", &csv)?,
        write(&cfg.out, "ep_toy.csv", &rows_to_csv(&rows))?,
    ])
}

fn density_branches(cfg: &RunConfig) -> Result<Vec<(ToyBranch, &'static str)>, CliError> {
    Ok(match cfg.ep.mode {
        EpMode::Toy => vec![(ToyBranch::ETA_PLUS, "density_eta_plus.csv"), (ToyBranch::ETA_MINUS, "density_eta_minus.csv")],
        EpMode::Numeric => vec![(cfg.ep.branch()?, "density.csv")],
    })
}

/// Trajectory, ground-state phases, covariance with the uncertainty margin,
/// and `|psi_0|^2` densities.
pub fn evolve(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let times = cfg.evolve_times();
    let p = build_pipeline(cfg, cfg.ep.branch()?, &times)?;
    let mut files = Vec::new();
    let rows = tabulate(&p.sol, &p.m0, &p.omega0_sq, &times)?;
    files.push(write(&cfg.out, "trajectory.csv", &rows_to_csv(&rows))?);

    let mut phases = String::from("t,theta_total,theta_dynamical,theta_geometric_re,theta_geometric_im\n");
    let mut cov = String::from("t,v11,v22,v12,det,rsup_margin\n");
    for &t in &times {
        let total = p.total_phase(0, t)?;
        let dynamical = p.dynamical_phase(0, t)?;
        let im = p.geometric_phase_im_closed_n0(t)?;
        writeln!(phases, "{},{},{},{},{}", f(t), f(total), f(dynamical), f(total - dynamical), f(im)).unwrap();
        let v = covariance(0, &p.state(t)?, CovarianceForm::Moments, 0.0);
        let r = rsup_check(&v);
        if !r.holds {
            warn!("uncertainty bound violated at t = {t}: margin {:.3e}", r.margin);
        }
        writeln!(cov, "{},{},{},{},{},{}", f(t), f(v.v11), f(v.v22), f(v.v12), f(v.det()), f(r.margin)).unwrap();
    }
    files.push(write(&cfg.out, "phases.csv", &phases)?);
    files.push(write(&cfg.out, "covariance.csv", &cov)?);

    let xs = lin(cfg.evolve.x_range[0], cfg.evolve.x_range[1], cfg.evolve.nx);
    for (branch, name) in density_branches(cfg)? {
        let pipeline = if cfg.ep.mode == EpMode::Toy { build_pipeline(cfg, branch, &times)? } else { p.clone() };
        let rows = density_grid(&Evolution::ground(pipeline, PsiRoute::Eigen), &xs, &times)?;
        files.push(write(&cfg.out, name, &density_to_csv(&rows))?);
    }
    Ok(files)
}

fn time_label(t: f64) -> String {
    format!("{t}")
}

fn union(a: &GridBounds, b: &GridBounds) -> GridBounds {
    GridBounds {
        x_min: a.x_min.min(b.x_min),
        x_max: a.x_max.max(b.x_max),
        p_min: a.p_min.min(b.p_min),
        p_max: a.p_max.max(b.p_max),
    }
}

/// One Wigner grid per configured time, `wigner_origin.csv` with `t,W00`,
/// and `wigner_compare.csv` for the first and last time on a shared grid.
pub fn wigner(cfg: &RunConfig, oracle_check: bool) -> Result<Vec<PathBuf>, CliError> {
    let w = &cfg.wigner;
    let p = build_pipeline(cfg, cfg.ep.branch()?, &w.times)?;
    let arg = w.cosine.argument();
    let cat = &cfg.cat;
    let mut files = Vec::new();
    let mut origin = String::from("t,W00\n");
    let mut worst: f64 = 0.0;
    let scaled = |g, grid: &mut WignerGrid| -> Result<f64, CliError> {
        let scale = if w.normalized { 1.0 / phase_space_integral(g, cat)? } else { 1.0 };
        grid.values.iter_mut().for_each(|v| *v *= scale);
        Ok(scale)
    };
    for &t in &w.times {
        let g = p.mode(t)?;
        let mut grid = wigner_grid(g, cat, w.nx, w.np, &default_bounds(g, cat), arg)?;
        grid.t = Some(t);
        let scale = scaled(g, &mut grid)?;
        let w00 = scale * wigner_closed_with(0.0, 0.0, g, cat, arg)?;
        writeln!(origin, "{},{}", f(t), f(w00)).unwrap();
        files.push(write(&cfg.out, &format!("wigner_t{}.csv", time_label(t)), &grid.to_csv())?);
        if oracle_check {
            let (dev, im) = grid_oracle_deviation(&grid, g, cat, scale)?;
            println!("oracle t = {t}: max |closed - numeric| = {dev:.3e}, reality residue = {im:.3e}");
            worst = worst.max(dev).max(im);
        }
    }
    files.push(write(&cfg.out, "wigner_origin.csv", &origin)?);

    if w.times.len() >= 2 {
        let (ta, tb) = (w.times[0], w.times[w.times.len() - 1]);
        let (ga, gb) = (p.mode(ta)?, p.mode(tb)?);
        let bounds = union(&default_bounds(ga, cat), &default_bounds(gb, cat));
        let mut a = wigner_grid(ga, cat, w.nx, w.np, &bounds, arg)?;
        let mut b = wigner_grid(gb, cat, w.nx, w.np, &bounds, arg)?;
        scaled(ga, &mut a)?;
        scaled(gb, &mut b)?;
        let mut csv = format!("# t_a={} t_b={} nx={} np={}\nx,p,W_a,W_b,diff\n", ta, tb, w.nx, w.np);
        for (i, x) in a.xs.iter().enumerate() {
            for (j, q) in a.ps.iter().enumerate() {
                let (va, vb) = (a.at(i, j), b.at(i, j));
                writeln!(csv, "{},{},{},{},{}", f(*x), f(*q), f(va), f(vb), f(va - vb)).unwrap();
            }
        }
        files.push(write(&cfg.out, "wigner_compare.csv", &csv)?);
    }

    if oracle_check && worst > ORACLE_TOLERANCE {
        return Err(CliError::Accuracy(format!(
            "Wigner closed form deviates from the numerical oracle by {worst:.3e} (> {ORACLE_TOLERANCE:e})"
        )));
    }
    Ok(files)
}

/// Every figure's data: region, metric report, EP branches, evolution and
/// Wigner grids.
pub fn figures(cfg: &RunConfig, oracle_check: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut files = pt_region(cfg)?;
    let report = metric_solve(cfg)?;
    print!("{report}");
    files.push(write(&cfg.out, "metric.txt", &report)?);
    files.extend(match cfg.ep.mode {
        EpMode::Toy => ep_toy(cfg)?,
        EpMode::Numeric => ep_solve(cfg)?,
    });
    files.extend(evolve(cfg)?);
    files.extend(wigner(cfg, oracle_check)?);
    Ok(files)
}
