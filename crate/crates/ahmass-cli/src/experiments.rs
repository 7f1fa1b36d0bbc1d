//! Experiment cells: each builds its inputs from the config, runs the
//! library, and returns files, scalars, named checks and tidy plot series.
//! Everything is deterministic for a fixed config (fixed seeds, fixed
//! iteration orders, shortest round-trip float formatting).

use crate::config::{Config, ConfigError};
use ahmass::cutoffs::{cancellation_residual, mass_drift, solve_cutoff, two_radius_gap, CutoffSolve};
use ahmass::flow::{flow_integrate, theorem35_certificate, write_flow_diag, FlowParams};
use ahmass::heatkernel::{
    gaussian_bound_fit, rescaled_kernel_identity, solve_kernel, write_kernel_csv,
    write_kernel_fit_json, KernelParams,
};
use ahmass::hypgeom::RadialGrid;
use ahmass::massfun::{
    mass_aspect, mass_c0, phi_average_of_mass_c2, write_mass_table, CutoffFunction, MassBreakdown,
};
use ahmass::metrics::{
    c0_kink, c0_steps, schwarzschild_ads, write_profile_csv, RadialPerturbation, Regularity,
};
use ahmass::numerics::linfit;
use std::sync::Arc;

pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub meta: Vec<(String, String)>,
}

#[derive(Default)]
pub struct ExperimentOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub scalars: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
}

pub fn fail(msg: String) -> ConfigError {
    ConfigError { line: None, message: msg }
}

// ---------------------------------------------------------------------------
// shared builders
// ---------------------------------------------------------------------------

pub fn build_grid(cfg: &Config) -> Result<Arc<RadialGrid>, ConfigError> {
    let n = cfg.get_u32("experiment", "n", 3)?;
    let policy = cfg.get_str("grid", "policy", "log");
    let s_min = cfg.get_f64("grid", "s_min", 0.5)?;
    let s_max = cfg.get_f64("grid", "s_max", 2500.0)?;
    let nodes = cfg.get_usize("grid", "nodes", 4000)?;
    let grid = match policy.as_str() {
        "log" => RadialGrid::log_uniform(n, s_min, s_max, nodes),
        "uniform" => RadialGrid::uniform(n, s_min, s_max, nodes),
        other => return Err(fail(format!("unknown grid policy '{other}' (log|uniform)"))),
    };
    grid.map_err(|e| fail(format!("grid: {e}")))
}

pub fn build_metric(cfg: &Config, grid: Arc<RadialGrid>) -> Result<RadialPerturbation, ConfigError> {
    let n = grid.n;
    let family = cfg.get_str("metric", "family", "schwarzschild_ads");
    let metric = match family.as_str() {
        "schwarzschild_ads" => {
            let m = cfg.get_f64("metric", "m", 0.1)?;
            schwarzschild_ads(m, n, grid)
        }
        "conformal" => {
            let eps = cfg.get_f64("metric", "eps", 0.05)?;
            RadialPerturbation::conformal(grid, eps)
        }
        "kink" => {
            let amplitude = cfg.get_f64("metric", "amplitude", 0.01)?;
            let tau = cfg.get_f64("metric", "tau", 1.0)?;
            let scale = cfg.get_f64("metric", "kink_scale", 2.0)?;
            c0_kink(amplitude, tau, scale, n, grid)
        }
        "steps" => {
            let amplitude = cfg.get_f64("metric", "amplitude", 0.01)?;
            let tau = cfg.get_f64("metric", "tau", 1.0)?;
            let scale = cfg.get_f64("metric", "step_scale", 2.2)?;
            let transition = cfg.get_f64("metric", "transition", 0.02)?;
            c0_steps(amplitude, tau, scale, transition, grid)
        }
        "zero" => Ok(RadialPerturbation::zero(grid)),
        other => return Err(fail(format!(
            "unknown metric family '{other}' (schwarzschild_ads|conformal|kink|steps|zero)"
        ))),
    };
    metric.map_err(|e| fail(format!("metric: {e}")))
}

fn build_cutoff(cfg: &Config) -> Result<CutoffFunction, ConfigError> {
    let center = cfg.get_f64("cutoff", "bump_center", 1.0)?;
    let width = cfg.get_f64("cutoff", "bump_width", 0.05)?;
    CutoffFunction::bump(center, width).map_err(|e| fail(format!("cutoff: {e}")))
}

fn csv_bytes<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(f: F) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("in-memory write cannot fail");
    buf
}

// ---------------------------------------------------------------------------
// mass_table
// ---------------------------------------------------------------------------

pub fn mass_table(cfg: &Config) -> Result<ExperimentOutput, ConfigError> {
    let grid = build_grid(cfg)?;
    let metric = build_metric(cfg, grid)?;
    let phi = build_cutoff(cfg)?;
    let radii = cfg.get_f64_list("mass", "radii", &[50.0, 100.0, 200.0, 400.0])?;
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(fail("mass radii must be strictly increasing".into()));
    }
    let mut out = ExperimentOutput::default();
    let rows: Vec<MassBreakdown> = radii
        .iter()
        .map(|&r| mass_c0(&metric, &phi, r).map_err(|e| fail(format!("mass_c0 at r = {r}: {e}"))))
        .collect::<Result<_, _>>()?;
    out.files.push((
        "mass_table.csv".into(),
        csv_bytes(|buf| write_mass_table(buf, &rows)),
    ));

    out.series.push(Series {
        name: "mass_c0_vs_r".into(),
        points: rows.iter().map(|b| (b.r, b.mass_c0)).collect(),
        meta: vec![],
    });
    if metric.regularity >= Regularity::C1 {
        out.series.push(Series {
            name: "mass_c2_vs_r".into(),
            points: rows
                .iter()
                .map(|b| (b.r, b.companion_c2[b.companion_c2.len() / 2].1))
                .collect(),
            meta: vec![],
        });
        if radii.len() >= 3 {
            let aspect = mass_aspect(&metric, &radii).map_err(|e| fail(e.to_string()))?;
            out.scalars.push(("mass_limit_extrapolated".into(), aspect.extrapolated_limit));
            out.scalars.push(("mass_fit_order".into(), aspect.convergence_order));
            out.scalars.push((
                "mass_divergent_flag".into(),
                if aspect.divergent { 1.0 } else { 0.0 },
            ));
        }
        // averaging identity is exact for the purely radial (beta = 0) sector
        if metric.beta.iter().all(|&b| b == 0.0) {
            let r = radii[radii.len() / 2];
            let avg = phi_average_of_mass_c2(&metric, &phi, r).map_err(|e| fail(e.to_string()))?;
            let c0 = rows[radii.len() / 2].mass_c0;
            let rel = (c0 - avg).abs() / avg.abs().max(1e-300);
            out.checks.push(Check::new(
                "averaging identity (beta = 0 sector)",
                rel <= 1e-6 || (avg == 0.0 && c0 == 0.0),
                format!("relative defect {rel:.3e} at r = {r}"),
            ));
        }
    }
    if phi.compactly_supported() {
        let worst = rows.iter().map(|b| b.boundary_term.abs()).fold(0.0f64, f64::max);
        out.checks.push(Check::new(
            "boundary term vanishes for compact cutoff",
            worst == 0.0,
            format!("max |boundary| = {worst:e}"),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// flow_run
// ---------------------------------------------------------------------------

pub fn flow_run(cfg: &Config) -> Result<ExperimentOutput, ConfigError> {
    let grid = build_grid(cfg)?;
    let metric = build_metric(cfg, grid)?;
    let horizon = cfg.get_f64("flow", "horizon", 5e-3)?;
    let dt_max = cfg.get_f64("flow", "dt_max", 1e-5)?;
    let dt_init = cfg.get_f64("flow", "dt_init", 1e-8)?;
    let eps_max = cfg.get_f64("flow", "eps_max", 0.1)?;
    let t_max = cfg.get_f64("flow", "t_max", 0.25)?;
    let snapshots = cfg.get_usize("flow", "snapshots", 33)?;
    let spacing = cfg.get_str("flow", "snapshot_spacing", "geometric");
    let snap_lo = cfg.get_f64("flow", "snapshot_start", horizon / 500.0)?;
    let profile_dumps = cfg.get_usize("flow", "profile_snapshots", 4)?;

    let sup0 = metric.sup_norm();
    if sup0 >= eps_max {
        return Err(fail(format!(
            "initial data sup |e0| = {sup0:.4} violates the smallness gate eps_max = {eps_max}"
        )));
    }
    if horizon > t_max {
        return Err(fail(format!("horizon {horizon} exceeds the configured t_max {t_max}")));
    }

    let mut params = FlowParams {
        dt_init,
        dt_max,
        eps_max,
        t_max,
        ..FlowParams::default()
    };
    params = match spacing.as_str() {
        "geometric" => params.geometric_snapshots(snap_lo, horizon, snapshots),
        "uniform" => params.uniform_snapshots(snap_lo, horizon, snapshots),
        other => return Err(fail(format!("unknown snapshot_spacing '{other}'"))),
    };
    let history = flow_integrate(&metric, horizon, &params).map_err(|e| fail(format!("flow: {e}")))?;

    let mut out = ExperimentOutput::default();
    out.files.push((
        "flow_diag.csv".into(),
        csv_bytes(|buf| write_flow_diag(buf, &history)),
    ));
    let stride = (history.states.len() / profile_dumps.max(1)).max(1);
    for st in history.states.iter().step_by(stride) {
        for (component, vals) in [("alpha", &st.e.alpha), ("beta", &st.e.beta)] {
            out.files.push((
                format!("profile_{component}_t{:.6e}.csv", st.t),
                csv_bytes(|buf| write_profile_csv(buf, component, &st.e.grid.nodes, vals)),
            ));
        }
    }
    out.series.push(Series {
        name: "sup_Dh_vs_t".into(),
        points: history.states.iter().filter(|s| s.t > 0.0).map(|s| (s.t, s.sup_dh)).collect(),
        meta: vec![("axes".into(), "log-log".into())],
    });
    out.series.push(Series {
        name: "sup_h_vs_t".into(),
        points: history.states.iter().map(|s| (s.t, s.sup_h)).collect(),
        meta: vec![],
    });
    let sup_end = history.states.last().unwrap().sup_h;
    out.scalars.push(("sup_h_initial".into(), sup0));
    out.scalars.push(("sup_h_final".into(), sup_end));
    out.checks.push(Check::new(
        "flow stayed within positivity and growth gates",
        true,
        format!("sup_h {sup0:.4e} -> {sup_end:.4e} over horizon {horizon}"),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// cutoff_drift
// ---------------------------------------------------------------------------

pub fn cutoff_drift(cfg: &Config) -> Result<ExperimentOutput, ConfigError> {
    let n = cfg.get_u32("experiment", "n", 3)?;
    let phi = build_cutoff(cfg)?;
    let radii = cfg.get_f64_list("cutoff", "radii", &[20.0, 40.0])?;
    let theta = cfg.get_f64("cutoff", "theta", 5e-5)?;
    let m = cfg.get_f64("metric", "m", 0.1)?;
    let s_min = cfg.get_f64("grid", "s_min", 1.5)?;
    let nodes = cfg.get_usize("grid", "nodes", 1200)?;
    let dt_max = cfg.get_f64("flow", "dt_max", 1.5e-6)?;
    let snapshots = cfg.get_usize("flow", "snapshots", 40)?;
    let solver = CutoffSolve::default();

    // admissible backward-horizon range for the cutoff construction
    for &r in &radii {
        let d_ab = phi.d_ab();
        let gate = 2.0 * (d_ab * r) * (d_ab * r) / n as f64;
        if theta >= gate {
            return Err(fail(format!(
                "theta = {theta} outside the admissible backward-horizon range (0, {gate:.6e}) for the cutoff construction at r = {r}"
            )));
        }
    }

    let mut out = ExperimentOutput::default();
    let mut reports = Vec::new();
    for &r in &radii {
        let grid = RadialGrid::log_uniform(n, s_min, 2.6 * r, nodes).map_err(|e| fail(e.to_string()))?;
        let e0 = schwarzschild_ads(m, n, grid).map_err(|e| fail(e.to_string()))?;
        let params = FlowParams {
            dt_init: 1e-7,
            dt_max,
            ..FlowParams::default()
        }
        .uniform_snapshots(theta / snapshots as f64, theta, snapshots);
        let history = flow_integrate(&e0, theta, &params).map_err(|e| fail(format!("flow at r = {r}: {e}")))?;
        let profile = solve_cutoff(&phi, r, theta, n, &solver).map_err(|e| fail(format!("cutoff at r = {r}: {e}")))?;
        let drift = mass_drift(&history, &profile).map_err(|e| fail(format!("drift at r = {r}: {e}")))?;
        if r == radii[0] {
            out.files.push((
                "cutoff_profile.csv".into(),
                csv_bytes(|buf| ahmass::cutoffs::write_cutoff_csv(buf, &profile, 32, 8)),
            ));
            // the identity residuals need a horizon long enough to exit the
            // final-data corner layer; evaluate them on their own solve
            let theta_cancel = cfg.get_f64("cutoff", "theta_cancellation", 1.2e-3)?;
            let cancel_profile = solve_cutoff(&phi, r, theta_cancel, n, &solver)
                .map_err(|e| fail(format!("cancellation cutoff at r = {r}: {e}")))?;
            let resid = cancellation_residual(&cancel_profile).map_err(|e| fail(e.to_string()))?;
            out.scalars.push(("cancellation_A_residual".into(), resid.a_residual));
            out.scalars.push(("cancellation_B_residual".into(), resid.b_residual));
            out.scalars.push(("cancellation_scale".into(), resid.scale));
            out.checks.push(Check::new(
                "cancellation residuals small against term scale",
                resid.a_residual < 0.1 * resid.scale && resid.b_residual < 0.1 * resid.scale,
                format!(
                    "A {:.3e}, B {:.3e} vs scale {:.3e}",
                    resid.a_residual, resid.b_residual, resid.scale
                ),
            ));
        }
        reports.push(drift);
    }
    out.files.push((
        "drift.csv".into(),
        csv_bytes(|buf| ahmass::cutoffs::write_drift_csv(buf, &reports)),
    ));
    let mut meta = Vec::new();
    if reports.len() >= 2 {
        let xs: Vec<f64> = reports.iter().map(|d| d.r.ln()).collect();
        let ys: Vec<f64> = reports.iter().map(|d| d.drift_integral.max(1e-300).ln()).collect();
        let (slope, _) = linfit(&xs, &ys);
        out.scalars.push(("drift_slope".into(), slope));
        meta.push(("fitted_slope".into(), format!("{slope}")));
    }
    out.series.push(Series {
        name: "drift_vs_r".into(),
        points: reports.iter().map(|d| (d.r, d.drift_integral)).collect(),
        meta,
    });
    out.checks.push(Check::new(
        "drift integrals finite",
        reports.iter().all(|d| d.drift_integral.is_finite()),
        format!("{} radii", reports.len()),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// two_radius
// ---------------------------------------------------------------------------

pub fn two_radius(cfg: &Config) -> Result<ExperimentOutput, ConfigError> {
    let grid = build_grid(cfg)?;
    let metric = build_metric(cfg, grid)?;
    let phi = build_cutoff(cfg)?;
    let radii = cfg.get_f64_list("cutoff", "radii", &[20.0, 28.0, 40.0, 57.0, 80.0])?;
    let eta = cfg.get_f64("cutoff", "eta", 1.0)?;
    let rp_factor = cfg.get_f64("cutoff", "rprime_factor", 2.0)?;
    let horizon = cfg.get_f64("flow", "t_max", 0.25)?;
    let solver = CutoffSolve::default();

    let mut out = ExperimentOutput::default();
    let mut rows = Vec::new();
    for &r in &radii {
        let g = two_radius_gap(&metric, &phi, &phi, r, rp_factor * r, eta, horizon, &solver)
            .map_err(|e| fail(format!("two-radius at r = {r}: {e}")))?;
        rows.push(g);
    }
    let mut csv = String::from("r,rprime,theta_r,theta_rprime,mass_r,mass_rprime,gap\n");
    for g in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            g.r, g.rprime, g.theta_r, g.theta_rprime, g.mass_r, g.mass_rprime, g.gap
        ));
    }
    out.files.push(("two_radius.csv".into(), csv.into_bytes()));
    let mut meta = Vec::new();
    if rows.len() >= 2 && rows.iter().all(|g| g.gap < 0.0) {
        let xs: Vec<f64> = rows.iter().map(|g| g.r.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|g| (-g.gap).ln()).collect();
        let (slope, _) = linfit(&xs, &ys);
        out.scalars.push(("gap_envelope_slope".into(), slope));
        meta.push(("fitted_slope".into(), format!("{slope}")));
    }
    out.series.push(Series {
        name: "gap_vs_r".into(),
        points: rows.iter().map(|g| (g.r, g.gap)).collect(),
        meta,
    });
    out.checks.push(Check::new(
        "gaps finite",
        rows.iter().all(|g| g.gap.is_finite()),
        format!("{} radii", rows.len()),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// kernel
// ---------------------------------------------------------------------------

pub fn kernel(cfg: &Config) -> Result<ExperimentOutput, ConfigError> {
    let n = cfg.get_u32("experiment", "n", 3)?;
    let t_max = cfg.get_f64("kernel", "t_max", 0.5)?;
    let sigma0 = cfg.get_f64("kernel", "sigma0", 0.01)?;
    let d_max = cfg.get_f64("kernel", "d_max", 7.0)?;
    let nodes = cfg.get_usize("kernel", "nodes", 5600)?;
    let params = KernelParams {
        d_max,
        nodes,
        ..KernelParams::default()
    };
    let run = solve_kernel(n, t_max, sigma0, &params).map_err(|e| fail(format!("kernel: {e}")))?;
    let fit = gaussian_bound_fit(&run).map_err(|e| fail(format!("kernel fit: {e}")))?;
    let ident = rescaled_kernel_identity(n, 0.1, 0.06, sigma0, &params)
        .map_err(|e| fail(format!("kernel identity: {e}")))?;

    let mut out = ExperimentOutput::default();
    out.files.push((
        "kernel.csv".into(),
        csv_bytes(|buf| write_kernel_csv(buf, &run, 4, 16)),
    ));
    out.files.push((
        "kernel_fit.json".into(),
        csv_bytes(|buf| write_kernel_fit_json(buf, &fit)),
    ));
    let worst_mass = run
        .masses
        .iter()
        .map(|m| (m - 1.0).abs())
        .fold(0.0f64, f64::max);
    out.scalars.push(("gaussian_C".into(), fit.c));
    out.scalars.push(("gaussian_D".into(), fit.d));
    out.scalars.push(("worst_mass_defect".into(), worst_mass));
    out.scalars.push(("rescaled_identity_rel_error".into(), ident.rel_error));
    out.series.push(Series {
        name: "kernel_mass_vs_t".into(),
        points: run.times.iter().zip(&run.masses).map(|(&t, &m)| (t, m)).collect(),
        meta: vec![],
    });
    out.checks.push(Check::new(
        "mass conservation within 1e-3",
        worst_mass < 1e-3,
        format!("worst defect {worst_mass:.3e}"),
    ));
    out.checks.push(Check::new(
        "Gaussian bound feasible with D <= 8",
        fit.d <= 8.0 && fit.c.is_finite(),
        format!("C = {:.4}, D = {:.3}", fit.c, fit.d),
    ));
    out.checks.push(Check::new(
        "rescaled kernel mass identity within 1%",
        ident.rel_error < 0.01,
        format!("relative error {:.3e}", ident.rel_error),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// certificate
// ---------------------------------------------------------------------------

pub fn certificate(cfg: &Config) -> Result<ExperimentOutput, ConfigError> {
    let beta = cfg.get_f64("certificate", "beta", 0.25)?;
    let c_const = cfg.get_f64("certificate", "c", 1.0)?;
    let d_const = cfg.get_f64("certificate", "d", 4.0)?;
    let dims = cfg.get_f64_list("certificate", "n_list", &[3.0, 4.0, 5.0])?;
    let fracs = cfg.get_f64_list("certificate", "t_fractions", &[0.3, 0.6, 1.0])?;

    let mut out = ExperimentOutput::default();
    let mut csv = String::from("n,t,t1,sum_t,prefactor,product,pref_times_product,tail_sum,lower_bound\n");
    let mut all_ok = true;
    let mut points = Vec::new();
    for &nf in &dims {
        let n = nf as u32;
        let tmax = (1.5f64).ln() / (2.0 * (nf - 1.0));
        for &frac in &fracs {
            let t = tmax * frac;
            let ev = theorem35_certificate(t, n, beta, -nf * (nf - 1.0), c_const, d_const)
                .map_err(|e| fail(format!("certificate at (n = {n}, t = {t}): {e}")))?;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                n,
                t,
                ev.t_seq[1],
                ev.sum_t,
                ev.prefactor,
                ev.product,
                ev.pref_times_product,
                ev.tail_sum,
                ev.lower_bound
            ));
            let lo = ((2.0 - 3.0 * nf) * (nf - 1.0) * t).exp();
            let recurrence_ok = ev.t_seq.windows(2).take(40).all(|w| w[1] < 0.75 * w[0]);
            all_ok &= recurrence_ok && ev.sum_t < 4.0 * t && ev.pref_times_product > lo && ev.pref_times_product < 1.0;
            if n == 3 {
                points.push((t, ev.pref_times_product));
            }
        }
    }
    out.files.push(("certificate.csv".into(), csv.into_bytes()));
    out.series.push(Series {
        name: "pref_times_product_vs_t".into(),
        points,
        meta: vec![("dimension".into(), "3".into())],
    });
    out.checks.push(Check::new(
        "recurrence, partial sums and product bounds on the lattice",
        all_ok,
        "t_k < (3/4) t_{k-1}, sum t_i < 4t, prefactor*product in (e^((2-3n)(n-1)t), 1)".into(),
    ));
    Ok(out)
}
