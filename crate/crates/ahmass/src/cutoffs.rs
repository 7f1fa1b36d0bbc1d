//! Time-dependent cutoff construction and the mass-drift experiments.
//!
//! The auxiliary problem is a backward heat equation with potential,
//!   (d/dt + Delta) phi1 = f(s) phi1  on (0, theta),
//!   phi1(s, theta) = sqrt(1+s^2) varphi(s/r),
//! where f(s) = 2n-2 + (n-1) s^-2 - 2(1+s^2)^-1 for s >= 0.9 r and is a
//! smooth extension with values in [2n-4, 2n-1] below. We solve for phi1 and
//! obtain the lifted profile phi = V0 phi1 (which then satisfies
//! (d/dt + Delta) phi = 2 s phi' + phi (3n-4 + (n-1) s^-2)) and the
//! normalized test function varphi_theta(l, t) = (1 + l^2 r^2)^-1 phi(l r, t).
//!
//! Solving backward is forward heat in tau = theta - t; the potential is
//! positive, so the maximum principle keeps phi1 nonnegative and bounded by
//! its final data.

use crate::flow::FlowHistory;
use crate::hypgeom::{laplacian_with, RadialGrid};
use crate::massfun::{mass_c0, CutoffFunction};
use crate::metrics::RadialPerturbation;
use crate::numerics::{fd_weights, interp_cubic, solve_tridiag, trapezoid};
use crate::{Error, Result};
use std::io::Write;
use std::sync::Arc;

/// Space-time cutoff profile and its lifts.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    pub n: u32,
    pub r: f64,
    pub theta: f64,
    pub grid: Arc<RadialGrid>,
    /// Time levels ascending, t[last] = theta (the final-data slice).
    pub times: Vec<f64>,
    /// phi1[level][node].
    pub phi1: Vec<Vec<f64>>,
    /// Potential actually used, including the sub-0.9r extension.
    pub f_used: Vec<f64>,
    pub d_ab: f64,
}

/// Resolution knobs for the cutoff solver.
#[derive(Debug, Clone)]
pub struct CutoffSolve {
    pub nodes: usize,
    pub steps: usize,
    /// Domain in units of r: [lo * r, hi * r].
    pub domain: (f64, f64),
}

impl Default for CutoffSolve {
    fn default() -> Self {
        CutoffSolve {
            nodes: 1600,
            steps: 512,
            domain: (0.4, 2.5),
        }
    }
}

/// Potential f(s): the exact coefficient for s >= 0.9 r, the constant 2n-3
/// below 0.8 r, and a cosine smoothstep between them on [0.8 r, 0.9 r].
pub fn cutoff_potential(s: f64, r: f64, n: u32) -> f64 {
    let nf = n as f64;
    let formula = 2.0 * nf - 2.0 + (nf - 1.0) / (s * s) - 2.0 / (1.0 + s * s);
    if s >= 0.9 * r {
        formula
    } else if s <= 0.8 * r {
        2.0 * nf - 3.0
    } else {
        let x = (s - 0.8 * r) / (0.1 * r);
        let w = 0.5 * (1.0 - (std::f64::consts::PI * x).cos());
        (1.0 - w) * (2.0 * nf - 3.0) + w * formula
    }
}

/// Solve the backward problem for phi1 (Crank-Nicolson in tau = theta - t).
pub fn solve_cutoff(
    varphi: &CutoffFunction,
    r: f64,
    theta: f64,
    n: u32,
    res: &CutoffSolve,
) -> Result<CutoffProfile> {
    let nf = n as f64;
    if !varphi.compactly_supported() {
        return Err(Error::Range(
            "cutoff construction needs supp varphi strictly inside (0.9, 1.1)".into(),
        ));
    }
    let d_ab = varphi.d_ab();
    if r <= (nf - 1.0).sqrt() / 0.9 {
        return Err(Error::Range(format!(
            "radius {r} too small; need r > sqrt(n-1)/0.9 so the potential stays in range"
        )));
    }
    // admissible backward horizon, with the distance scale d_ab * r of the
    // annulus gap (the s-coordinate gap; see module docs for the fit caveat)
    let theta_gate = 2.0 * (d_ab * r) * (d_ab * r) / nf;
    if !(theta > 0.0 && theta < theta_gate) {
        return Err(Error::Range(format!(
            "theta = {theta} outside the admissible range (0, {theta_gate:.6})"
        )));
    }

    let grid = RadialGrid::log_uniform(n, res.domain.0 * r, res.domain.1 * r, res.nodes)?;
    let m = grid.len();
    let dy = (grid.nodes[1] / grid.nodes[0]).ln();
    let f_used: Vec<f64> = grid.nodes.iter().map(|&s| cutoff_potential(s, r, n)).collect();
    for &f in &f_used {
        debug_assert!(f >= 2.0 * nf - 4.0 - 1e-12 && f <= 2.0 * nf - 1.0 + 1e-12);
    }

    // final data
    let final_data: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&s| (1.0 + s * s).sqrt() * varphi.phi(s / r))
        .collect();

    // L u = Delta u - f u in the log coordinate:
    // Delta = (1 + s^-2) d_yy + [(n-1) + (n-2) s^-2] d_y
    let dtau = theta / res.steps as f64;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut l_lo = vec![0.0; m];
    let mut l_di = vec![0.0; m];
    let mut l_up = vec![0.0; m];
    for i in 0..m {
        let s = grid.nodes[i];
        let a = 1.0 + 1.0 / (s * s);
        let b = (nf - 1.0) + (nf - 2.0) / (s * s);
        l_lo[i] = a / (dy * dy) - b / (2.0 * dy);
        l_di[i] = -2.0 * a / (dy * dy) - f_used[i];
        l_up[i] = a / (dy * dy) + b / (2.0 * dy);
    }
    // Dirichlet walls: the solution is negligible at the domain ends
    l_lo[0] = 0.0;
    l_di[0] = 0.0;
    l_up[0] = 0.0;
    l_lo[m - 1] = 0.0;
    l_di[m - 1] = 0.0;
    l_up[m - 1] = 0.0;
    for i in 0..m {
        lower[i] = -0.5 * dtau * l_lo[i];
        diag[i] = 1.0 - 0.5 * dtau * l_di[i];
        upper[i] = -0.5 * dtau * l_up[i];
    }

    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(res.steps + 1);
    levels.push(final_data.clone());
    let mut u = final_data;
    for _ in 0..res.steps {
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let lm = if i > 0 { l_lo[i] * u[i - 1] } else { 0.0 };
            let lp = if i + 1 < m { l_up[i] * u[i + 1] } else { 0.0 };
            rhs[i] = u[i] + 0.5 * dtau * (lm + l_di[i] * u[i] + lp);
        }
        rhs[0] = 0.0;
        rhs[m - 1] = 0.0;
        solve_tridiag(&lower, &diag, &upper, &mut rhs);
        u = rhs;
        levels.push(u.clone());
    }
    // reorder to ascending t: level j (tau_j = j dtau) sits at t = theta - tau_j
    levels.reverse();
    let times: Vec<f64> = (0..=res.steps).map(|j| theta * j as f64 / res.steps as f64).collect();

    let profile = CutoffProfile {
        n,
        r,
        theta,
        grid,
        times,
        phi1: levels,
        f_used,
        d_ab,
    };
    // maximum-principle invariants
    let maxval = profile
        .phi1
        .iter()
        .flat_map(|l| l.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let minval = profile
        .phi1
        .iter()
        .flat_map(|l| l.iter())
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if minval < -1e-10 * maxval {
        return Err(Error::FitFailure(format!(
            "cutoff positivity violated: min phi1 = {minval:.3e} against scale {maxval:.3e}"
        )));
    }
    Ok(profile)
}

impl CutoffProfile {
    /// Lifted profile phi = V0 phi1 at a time level.
    pub fn phi_level(&self, level: usize) -> Vec<f64> {
        self.grid
            .nodes
            .iter()
            .zip(&self.phi1[level])
            .map(|(&s, &v)| (1.0 + s * s).sqrt() * v)
            .collect()
    }

    fn level_bracket(&self, t: f64) -> (usize, usize, f64) {
        let j = self.times.partition_point(|&x| x <= t).min(self.times.len() - 1);
        if j == 0 {
            return (0, 0, 0.0);
        }
        let a = j - 1;
        let w = (t - self.times[a]) / (self.times[j] - self.times[a]);
        (a, j, w)
    }

    /// phi1 at (s, t) by linear blending of the bracketing levels.
    pub fn phi1_at(&self, s: f64, t: f64) -> f64 {
        let (a, b, w) = self.level_bracket(t);
        let va = interp_cubic(&self.grid.nodes, &self.phi1[a], s);
        let vb = interp_cubic(&self.grid.nodes, &self.phi1[b], s);
        va * (1.0 - w) + vb * w
    }

    /// varphi_theta(l, t) = (1 + l^2 r^2)^{-1/2} phi1(l r, t).
    pub fn varphi_theta(&self, l: f64, t: f64) -> f64 {
        let s = l * self.r;
        self.phi1_at(s, t) / (1.0 + s * s).sqrt()
    }

    /// The normalized test function at fixed t, tabulated as a cutoff usable
    /// by the mass functionals.
    pub fn varphi_theta_cutoff(&self, t: f64) -> Result<CutoffFunction> {
        let (a, b, w) = self.level_bracket(t);
        let deriv = crate::hypgeom::derivator_for(&self.grid);
        let da = deriv.d1(&self.phi1[a]);
        let db = deriv.d1(&self.phi1[b]);
        let lo = self.grid.nodes.partition_point(|&s| s < 0.87 * self.r);
        let hi = self.grid.nodes.partition_point(|&s| s <= 1.13 * self.r);
        let mut l_nodes = Vec::with_capacity(hi - lo);
        let mut phi = Vec::with_capacity(hi - lo);
        let mut dphi = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let s = self.grid.nodes[i];
            let v = self.phi1[a][i] * (1.0 - w) + self.phi1[b][i] * w;
            let dv = da[i] * (1.0 - w) + db[i] * w;
            let root = (1.0 + s * s).sqrt();
            l_nodes.push(s / self.r);
            phi.push(v / root);
            // d/dl [ (1+s^2)^{-1/2} phi1(s) ], s = l r
            dphi.push(self.r * (dv / root - s * v / (root * root * root)));
        }
        CutoffFunction::from_table(l_nodes, phi, dphi)
    }

    /// Negative control: the same final data frozen at every level (does not
    /// satisfy the evolution equation).
    pub fn frozen_final(&self) -> CutoffProfile {
        let last = self.phi1.last().unwrap().clone();
        CutoffProfile {
            phi1: vec![last; self.phi1.len()],
            ..self.clone()
        }
    }

    /// Nodes inside the annulus (0.9 r, 1.1 r), trimmed by `margin` nodes.
    fn annulus_indices(&self, margin: usize) -> (usize, usize) {
        let lo = self.grid.nodes.partition_point(|&s| s < 0.9 * self.r) + margin;
        let hi = self.grid.nodes.partition_point(|&s| s <= 1.1 * self.r) - margin;
        (lo, hi.max(lo + 1))
    }
}

/// Max-norm residuals of the proof-level coefficient identities.
#[derive(Debug, Clone)]
pub struct CancellationReport {
    pub a_residual: f64,
    pub b_residual: f64,
    pub phi_prime_pde_residual: f64,
    /// Magnitude scale of the assembled terms, for relative comparisons.
    pub scale: f64,
}

/// Evaluate the coefficient combinations that the drift argument needs to
/// vanish:
///   A = (dt+Delta)phi' + (n-2)s^-1 (dt+Delta)phi
///       + phi [2(n-2)(1-n)s^-1 + (n-2) Delta(s^-1) + 2 s^-3]
///       + phi'[2(1-n) - 2(n-2)(1+s^-2) - 2 s^-2],
///   B = -(dt+Delta)phi' + s^-1 (dt+Delta)phi
///       + phi [Delta(s^-1) + 2(1-n)s^-1 - 2n s^-3]
///       + phi'[2(n-1) + 2n s^-2 - 2 - 2 s^-2],
/// with Delta(s^-1) = (2-n)s^-1 + (3-n)s^-3, plus the derived identity
///   (dt+Delta)phi' = phi'[2(n-1) + 2(n-1)s^-2] - 2(n-1) s^-3 phi.
pub fn cancellation_residual(profile: &CutoffProfile) -> Result<CancellationReport> {
    let grid = &profile.grid;
    let nf = profile.n as f64;
    let nt = profile.times.len();
    if nt < 5 {
        return Err(Error::Sampling("residual evaluation needs >= 5 time levels".into()));
    }
    let deriv = crate::hypgeom::derivator_for(grid);
    let dt = profile.times[1] - profile.times[0];
    let (ilo, ihi) = profile.annulus_indices(3);

    // lifted levels and their spatial derivatives
    let phis: Vec<Vec<f64>> = (0..nt).map(|j| profile.phi_level(j)).collect();
    let dphis: Vec<Vec<f64>> = phis.iter().map(|p| deriv.d1(p)).collect();
    let lap_phis: Vec<Vec<f64>> = phis.iter().map(|p| laplacian_with(grid, &deriv, p)).collect();
    let lap_dphis: Vec<Vec<f64>> = dphis.iter().map(|p| laplacian_with(grid, &deriv, p)).collect();

    let mut a_res = 0.0f64;
    let mut b_res = 0.0f64;
    let mut pde_res = 0.0f64;
    let mut scale = 0.0f64;
    // interior time levels, centered second-order time derivative. The top
    // tenth of the interval is excluded: next to the final slice the bump's
    // support-edge derivatives dominate the time differences, and that data
    // corner is not part of the identity being checked.
    let j_hi = ((0.9 * nt as f64) as usize).min(nt - 2).max(3);
    for j in 2..j_hi {
        for i in ilo..ihi {
            let s = grid.nodes[i];
            let inv = 1.0 / s;
            let inv2 = inv * inv;
            let inv3 = inv2 * inv;
            let phi = phis[j][i];
            let dphi = dphis[j][i];
            let dt_phi = (phis[j + 1][i] - phis[j - 1][i]) / (2.0 * dt);
            let dt_dphi = (dphis[j + 1][i] - dphis[j - 1][i]) / (2.0 * dt);
            let heat_phi = dt_phi + lap_phis[j][i];
            let heat_dphi = dt_dphi + lap_dphis[j][i];
            let lap_inv_s = (2.0 - nf) * inv + (3.0 - nf) * inv3;

            let a = heat_dphi
                + (nf - 2.0) * inv * heat_phi
                + phi * (2.0 * (nf - 2.0) * (1.0 - nf) * inv + (nf - 2.0) * lap_inv_s + 2.0 * inv3)
                + dphi * (2.0 * (1.0 - nf) - 2.0 * (nf - 2.0) * (1.0 + inv2) - 2.0 * inv2);
            let b = -heat_dphi
                + inv * heat_phi
                + phi * (lap_inv_s + 2.0 * (1.0 - nf) * inv - 2.0 * nf * inv3)
                + dphi * (2.0 * (nf - 1.0) + 2.0 * nf * inv2 - 2.0 - 2.0 * inv2);
            let pde = heat_dphi - dphi * (2.0 * (nf - 1.0) + 2.0 * (nf - 1.0) * inv2)
                + 2.0 * (nf - 1.0) * inv3 * phi;

            a_res = a_res.max(a.abs());
            b_res = b_res.max(b.abs());
            pde_res = pde_res.max(pde.abs());
            scale = scale.max(heat_phi.abs()).max(dphi.abs() * 2.0 * nf);
        }
    }
    Ok(CancellationReport {
        a_residual: a_res,
        b_residual: b_res,
        phi_prime_pde_residual: pde_res,
        scale,
    })
}

/// Drift of the annulus mass along a flow, against the matching cutoff.
#[derive(Debug, Clone)]
pub struct DriftReport {
    pub r: f64,
    pub theta: f64,
    /// int_0^theta |d/dt [ M_{C0}(g_t, varphi_theta(., t), r) r int varphi_theta ]| dt
    pub drift_integral: f64,
    /// int_0^theta |d/dt M_{C0}(g_t, varphi_theta(., t), r)| dt
    pub normalized_drift_integral: f64,
    /// (t, bracket value, normalized mass) samples.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Time-differentiate the drift-controlled bracket and its normalized form
/// along the flow snapshots on [0, theta].
///
/// The bracket integrates against the volume measure (`mass_c0_volume`):
/// the cancellation identities that make it almost invariant transfer
/// Laplacians by parts under d mu_b. The drift bound also needs theta deep
/// in the boundary-suppressed regime; at theta comparable to the geodesic
/// gap squared of the cutoff support, the annulus-boundary flux dominates
/// and no radial decay of the drift should be expected.
pub fn mass_drift(history: &FlowHistory, profile: &CutoffProfile) -> Result<DriftReport> {
    if history.grid.n != profile.n {
        return Err(Error::Domain("flow and cutoff dimensions differ".into()));
    }
    let r = profile.r;
    let theta = profile.theta;
    let snaps: Vec<_> = history
        .states
        .iter()
        .filter(|s| s.t <= theta * (1.0 + 1e-12))
        .collect();
    if snaps.len() < 16 {
        return Err(Error::Sampling(format!(
            "mass drift needs >= 16 snapshots on [0, theta], have {}",
            snaps.len()
        )));
    }
    let mut ts = Vec::with_capacity(snaps.len());
    let mut bracket = Vec::with_capacity(snaps.len());
    let mut normalized = Vec::with_capacity(snaps.len());
    for st in &snaps {
        let phi_t = profile.varphi_theta_cutoff(st.t)?;
        let b = crate::massfun::mass_c0_volume(&st.e, &phi_t, r)?;
        ts.push(st.t);
        bracket.push(b.boundary_term + b.bulk_trace_term + b.bulk_radial_term);
        normalized.push(b.mass_c0);
    }
    let deriv_abs = |vals: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(vals.len().saturating_sub(2));
        for j in 1..vals.len() - 1 {
            let w = fd_weights(ts[j], &ts[j - 1..=j + 1], 1);
            // diagonal-subtracted form: exact on constants
            out.push((w[0] * (vals[j - 1] - vals[j]) + w[2] * (vals[j + 1] - vals[j])).abs());
        }
        out
    };
    let db = deriv_abs(&bracket);
    let dm = deriv_abs(&normalized);
    let tmid = &ts[1..ts.len() - 1];
    Ok(DriftReport {
        r,
        theta,
        drift_integral: trapezoid(tmid, &db),
        normalized_drift_integral: trapezoid(tmid, &dm),
        samples: ts
            .iter()
            .zip(bracket.iter().zip(&normalized))
            .map(|(&t, (&b, &m))| (t, b, m))
            .collect(),
    })
}

/// Two-radius comparison of the annulus mass at t = 0 data.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub r: f64,
    pub rprime: f64,
    pub theta_r: f64,
    pub theta_rprime: f64,
    pub mass_r: f64,
    pub mass_rprime: f64,
    pub gap: f64,
}

/// gap = M_{C0}(g, varphi_{(r')^-eta}(., 0), r') - M_{C0}(g, varphi_{r^-eta}(., 0), r).
/// Derivative-free: evaluated directly on the (possibly C0) initial data.
pub fn two_radius_gap(
    e0: &RadialPerturbation,
    varphi: &CutoffFunction,
    varphi_bar: &CutoffFunction,
    r: f64,
    rprime: f64,
    eta: f64,
    flow_horizon: f64,
    res: &CutoffSolve,
) -> Result<GapReport> {
    let nf = e0.n as f64;
    if !(rprime >= 1.1 / 0.9 * r - 1e-12 && rprime <= 10.0 * r + 1e-12) {
        return Err(Error::Range(format!(
            "r' = {rprime} outside [(1.1/0.9) r, 10 r] for r = {r}"
        )));
    }
    if e0.tau.is_finite() {
        let lo = (e0.tau - 1.0) / 2.0;
        let hi = 2.0 * e0.tau - nf;
        if !(eta >= lo - 1e-12 && eta < hi) {
            return Err(Error::Range(format!(
                "eta = {eta} outside [(tau-1)/2, 2 tau - n) = [{lo}, {hi})"
            )));
        }
    }
    let theta_r = r.powf(-eta);
    let theta_rp = rprime.powf(-eta);
    if theta_r >= flow_horizon {
        return Err(Error::Range(format!(
            "r^-eta = {theta_r} is not below the flow horizon {flow_horizon}"
        )));
    }
    let prof_r = solve_cutoff(varphi, r, theta_r, e0.n, res)?;
    let prof_rp = solve_cutoff(varphi_bar, rprime, theta_rp, e0.n, res)?;
    let m_r = mass_c0(e0, &prof_r.varphi_theta_cutoff(0.0)?, r)?.mass_c0;
    let m_rp = mass_c0(e0, &prof_rp.varphi_theta_cutoff(0.0)?, rprime)?.mass_c0;
    Ok(GapReport {
        r,
        rprime,
        theta_r,
        theta_rprime: theta_rp,
        mass_r: m_r,
        mass_rprime: m_rp,
        gap: m_rp - m_r,
    })
}

/// cutoff_profile.csv: s,t,phi1,phi,varphi_theta (strided to keep files sane).
pub fn write_cutoff_csv<W: Write>(
    w: &mut W,
    profile: &CutoffProfile,
    time_stride: usize,
    node_stride: usize,
) -> std::io::Result<()> {
    writeln!(w, "s,t,phi1,phi,varphi_theta")?;
    for (j, t) in profile.times.iter().enumerate().step_by(time_stride.max(1)) {
        for (i, &s) in profile.grid.nodes.iter().enumerate().step_by(node_stride.max(1)) {
            let p1 = profile.phi1[j][i];
            let root = (1.0 + s * s).sqrt();
            writeln!(w, "{s},{t},{p1},{},{}", root * p1, p1 / root)?;
        }
    }
    Ok(())
}

/// drift.csv: r,theta,drift,normalized_drift
pub fn write_drift_csv<W: Write>(w: &mut W, rows: &[DriftReport]) -> std::io::Result<()> {
    writeln!(w, "r,theta,drift,normalized_drift")?;
    for d in rows {
        writeln!(w, "{},{},{},{}", d.r, d.theta, d.drift_integral, d.normalized_drift_integral)?;
    }
    Ok(())
}
