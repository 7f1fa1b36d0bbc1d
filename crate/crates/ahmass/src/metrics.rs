//! Rotationally symmetric perturbations e = g - b of the hyperbolic metric.
//!
//! A radial symmetric (0,2)-tensor is stored as two scalar profiles in the
//! b-orthonormal frame: alpha(s) = e(N, N) along the unit radial vector and
//! beta(s), the common tangential eigenvalue. Every contraction the mass
//! functionals need reduces to these two profiles:
//!   tr_b e = alpha + (n-1) beta,      x^i x^j e_ij = s^2 alpha,
//!   |e|_b^2 = alpha^2 + (n-1) beta^2.

use crate::hypgeom::RadialGrid;
use crate::numerics::{interp_cubic, interp_linear, Derivator};
use crate::{Error, Result};
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Smoothness tag of a perturbation; derivative-taking operations gate on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regularity {
    C0,
    C1,
    C2,
    Analytic,
}

/// e = g - b in the radial frame split.
#[derive(Debug, Clone)]
pub struct RadialPerturbation {
    pub n: u32,
    pub grid: Arc<RadialGrid>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Declared decay exponent: |e|_b = O(s^-tau) at infinity.
    pub tau: f64,
    pub regularity: Regularity,
}

/// Pointwise evaluation record.
#[derive(Debug, Clone, Copy)]
pub struct EvalRecord {
    pub alpha: f64,
    pub beta: f64,
    pub trace: f64,
    pub radial_quadratic: f64,
    pub norm_b: f64,
}

impl RadialPerturbation {
    /// Build from closures sampled on the grid; checks metric positivity.
    pub fn from_profiles<F, G>(
        grid: Arc<RadialGrid>,
        f_alpha: F,
        f_beta: G,
        tau: f64,
        regularity: Regularity,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let alpha: Vec<f64> = grid.nodes.iter().map(|&s| f_alpha(s)).collect();
        let beta: Vec<f64> = grid.nodes.iter().map(|&s| f_beta(s)).collect();
        Self::from_samples(grid, alpha, beta, tau, regularity)
    }

    pub fn from_samples(
        grid: Arc<RadialGrid>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        tau: f64,
        regularity: Regularity,
    ) -> Result<Self> {
        if alpha.len() != grid.len() || beta.len() != grid.len() {
            return Err(Error::Grid("profile length does not match grid".into()));
        }
        let e = RadialPerturbation {
            n: grid.n,
            grid,
            alpha,
            beta,
            tau,
            regularity,
        };
        e.check_positivity()?;
        Ok(e)
    }

    /// Zero perturbation (hyperbolic space itself).
    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let len = grid.len();
        RadialPerturbation {
            n: grid.n,
            grid,
            alpha: vec![0.0; len],
            beta: vec![0.0; len],
            tau: f64::INFINITY,
            regularity: Regularity::Analytic,
        }
    }

    /// Constant conformal scaling g = (1+eps) b.
    pub fn conformal(grid: Arc<RadialGrid>, eps: f64) -> Result<Self> {
        Self::from_profiles(grid, |_| eps, |_| eps, 0.0, Regularity::Analytic)
    }

    fn check_positivity(&self) -> Result<()> {
        for (i, &s) in self.grid.nodes.iter().enumerate() {
            if 1.0 + self.alpha[i] <= 0.0 || 1.0 + self.beta[i] <= 0.0 {
                return Err(Error::Positivity(format!(
                    "metric degenerate at s = {s}: 1+alpha = {}, 1+beta = {}",
                    1.0 + self.alpha[i],
                    1.0 + self.beta[i]
                )));
            }
        }
        Ok(())
    }

    fn interp(&self, vals: &[f64], s: f64) -> f64 {
        match self.regularity {
            // linear keeps corners and never overshoots node values
            Regularity::C0 => interp_linear(&self.grid.nodes, vals, s),
            _ => interp_cubic(&self.grid.nodes, vals, s),
        }
    }

    pub fn alpha_at(&self, s: f64) -> Result<f64> {
        self.check_hull(s)?;
        Ok(self.interp(&self.alpha, s))
    }

    pub fn beta_at(&self, s: f64) -> Result<f64> {
        self.check_hull(s)?;
        Ok(self.interp(&self.beta, s))
    }

    fn check_hull(&self, s: f64) -> Result<()> {
        if !self.grid.contains(s) {
            return Err(Error::Range(format!(
                "s = {s} outside grid hull [{}, {}]",
                self.grid.s_min(),
                self.grid.s_max()
            )));
        }
        Ok(())
    }

    /// Pointwise frame data at s (interpolated).
    pub fn evaluate(&self, s: f64) -> Result<EvalRecord> {
        self.check_hull(s)?;
        let a = self.interp(&self.alpha, s);
        let b = self.interp(&self.beta, s);
        let nf = self.n as f64;
        Ok(EvalRecord {
            alpha: a,
            beta: b,
            trace: a + (nf - 1.0) * b,
            radial_quadratic: a,
            norm_b: (a * a + (nf - 1.0) * b * b).sqrt(),
        })
    }

    /// e -> lambda e (exact profile scaling, preserves tags).
    pub fn scale(&self, lambda: f64) -> Result<Self> {
        Self::from_samples(
            self.grid.clone(),
            self.alpha.iter().map(|v| lambda * v).collect(),
            self.beta.iter().map(|v| lambda * v).collect(),
            self.tau,
            self.regularity,
        )
    }

    /// |e|_b at every node.
    pub fn norm_profile(&self) -> Vec<f64> {
        let nf = self.n as f64;
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(&a, &b)| (a * a + (nf - 1.0) * b * b).sqrt())
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.norm_profile().iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Recorded C^0_tau constant: sup over sampled s >= 10 of s^tau (|alpha|+|beta|).
    pub fn decay_constant(&self) -> f64 {
        self.grid
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= 10.0)
            .map(|(i, &s)| s.powf(self.tau) * (self.alpha[i].abs() + self.beta[i].abs()))
            .fold(0.0f64, f64::max)
    }

    /// |De|_b at every node, from the frame reduction
    /// |De|^2 = u1^2 + (n-1) u2^2 + 2(n-1) u3^2 with u1 = dN alpha,
    /// u2 = dN beta, u3 = c (alpha - beta), dN = sqrt(1+s^2) d/ds,
    /// c = sqrt(1+s^2)/s.
    pub fn deriv_norm_profile(&self, d: &Derivator) -> Vec<f64> {
        let nf = self.n as f64;
        let da = d.d1(&self.alpha);
        let db = d.d1(&self.beta);
        self.grid
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let w = (1.0 + s * s).sqrt();
                let c = w / s;
                let u1 = w * da[i];
                let u2 = w * db[i];
                let u3 = c * (self.alpha[i] - self.beta[i]);
                (u1 * u1 + (nf - 1.0) * u2 * u2 + 2.0 * (nf - 1.0) * u3 * u3).sqrt()
            })
            .collect()
    }

    /// |D^2 e|_b at every node (frame reduction; checked against a
    /// coordinate-space covariant-derivative oracle in the test suite).
    pub fn second_deriv_norm_profile(&self, d: &Derivator) -> Vec<f64> {
        let nf = self.n as f64;
        let nodes = &self.grid.nodes;
        let da = d.d1(&self.alpha);
        let db = d.d1(&self.beta);
        let mut u1 = vec![0.0; nodes.len()];
        let mut u2 = vec![0.0; nodes.len()];
        let mut u3 = vec![0.0; nodes.len()];
        for (i, &s) in nodes.iter().enumerate() {
            let w = (1.0 + s * s).sqrt();
            u1[i] = w * da[i];
            u2[i] = w * db[i];
            u3[i] = w / s * (self.alpha[i] - self.beta[i]);
        }
        let du1 = d.d1(&u1);
        let du2 = d.d1(&u2);
        let du3 = d.d1(&u3);
        nodes
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let w = (1.0 + s * s).sqrt();
                let c = w / s;
                let (v1, v2, v3) = (u1[i], u2[i], u3[i]);
                let (w1, w2, w3) = (w * du1[i], w * du2[i], w * du3[i]);
                let sq = w1 * w1
                    + (nf - 1.0) * c * c * (v1 - 2.0 * v3) * (v1 - 2.0 * v3)
                    + 2.0 * (nf - 1.0) * c * c * (v1 - v2 - v3) * (v1 - v2 - v3)
                    + (nf - 1.0) * w2 * w2
                    + 2.0 * (nf - 1.0) * w3 * w3
                    + (nf - 1.0) * (nf - 1.0) * c * c * v2 * v2
                    + (2.0 * (nf - 1.0) * (nf - 1.0) + 2.0 * (nf - 1.0)) * c * c * v3 * v3
                    + 4.0 * (nf - 1.0) * c * c * v2 * v3;
                sq.max(0.0).sqrt()
            })
            .collect()
    }
}

/// AdS-Schwarzschild style exact Einstein example:
/// alpha(s) = (1+s^2)/(1+s^2-2m s^{2-n}) - 1, beta = 0, tau = n.
pub fn schwarzschild_ads(m: f64, n: u32, grid: Arc<RadialGrid>) -> Result<RadialPerturbation> {
    if m < 0.0 {
        return Err(Error::Domain(format!("mass parameter m = {m} must be >= 0")));
    }
    if n != grid.n {
        return Err(Error::Domain(format!("dimension {n} does not match grid dimension {}", grid.n)));
    }
    let nf = n as f64;
    // horizon check: need 2m s^{2-n} < 1+s^2 on the whole working domain
    for &s in &grid.nodes {
        if 2.0 * m * s.powf(2.0 - nf) >= 1.0 + s * s {
            // minimal admissible s: where 2m s^{2-n} = 1+s^2 (bisect upward)
            let mut lo = s;
            let mut hi = grid.s_max();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if 2.0 * m * mid.powf(2.0 - nf) >= 1.0 + mid * mid {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Err(Error::Domain(format!(
                "grid reaches inside the horizon; smallest admissible s is about {hi:.6}"
            )));
        }
    }
    RadialPerturbation::from_profiles(
        grid,
        |s| {
            // written as 2m s^{2-n}/f rather than (1+s^2)/f - 1: the latter
            // cancels catastrophically once alpha drops toward rounding size
            let w = 2.0 * m * s.powf(2.0 - nf);
            w / (1.0 + s * s - w)
        },
        |_| 0.0,
        nf,
        Regularity::Analytic,
    )
}

/// Triangle wave with period 1, range [-1, 1], corners at half-integers.
fn tri(x: f64) -> f64 {
    let f = x - (x + 0.5).floor();
    4.0 * f.abs() - 1.0
}

/// Continuous, piecewise-smooth C^0 example with corners at geometric
/// spacing `kink_scale` in s:
///   alpha(s) = amplitude s^-tau (1 + tri(ln s / ln kink_scale) / 2),
/// beta the same with the phase shifted by ~1/3 period.
pub fn c0_kink(
    amplitude: f64,
    tau: f64,
    kink_scale: f64,
    n: u32,
    grid: Arc<RadialGrid>,
) -> Result<RadialPerturbation> {
    if kink_scale <= 1.0 {
        return Err(Error::Domain("kink_scale must exceed 1".into()));
    }
    if n != grid.n {
        return Err(Error::Domain(format!("dimension {n} does not match grid dimension {}", grid.n)));
    }
    let lk = kink_scale.ln();
    let e = RadialPerturbation::from_profiles(
        grid,
        |s| amplitude * s.powf(-tau) * (1.0 + 0.5 * tri(s.ln() / lk)),
        |s| amplitude * s.powf(-tau) * (1.0 + 0.5 * tri(s.ln() / lk + 1.0 / 3.0)),
        tau,
        Regularity::C0,
    );
    match e {
        Err(Error::Positivity(msg)) => Err(Error::Positivity(format!(
            "kink amplitude {amplitude} too large: {msg}"
        ))),
        other => other,
    }
}

/// Continuous near-step staircase in log s: a clipped triangle wave whose
/// ramps have relative width `transition` of the half-period. The
/// triangle-wave kink is Lipschitz, so its first derivative stays bounded
/// under mollification; this bounded-variation-like family instead shows
/// the worst-case C0 smoothing rate sup|Dh| ~ t^{-1/2} on the time window
/// between the ramp width squared and the step period squared.
pub fn c0_steps(
    amplitude: f64,
    tau: f64,
    step_scale: f64,
    transition: f64,
    grid: Arc<RadialGrid>,
) -> Result<RadialPerturbation> {
    if step_scale <= 1.0 || !(0.0..1.0).contains(&transition) || transition == 0.0 {
        return Err(Error::Domain("need step_scale > 1 and transition in (0, 1)".into()));
    }
    let lk = step_scale.ln();
    let sq = move |x: f64| (tri(x) / transition).clamp(-1.0, 1.0);
    let e = RadialPerturbation::from_profiles(
        grid,
        |s| amplitude * s.powf(-tau) * (1.0 + 0.5 * sq(s.ln() / lk)),
        |s| amplitude * s.powf(-tau) * (1.0 + 0.5 * sq(s.ln() / lk + 1.0 / 3.0)),
        tau,
        Regularity::C0,
    );
    match e {
        Err(Error::Positivity(msg)) => Err(Error::Positivity(format!(
            "step amplitude {amplitude} too large: {msg}"
        ))),
        other => other,
    }
}

/// Corner locations of the kink profile inside (lo, hi).
pub fn kink_corners(kink_scale: f64, lo: f64, hi: f64) -> Vec<f64> {
    let lk = kink_scale.ln();
    let mut out = Vec::new();
    let mut j = (2.0 * lo.ln() / lk).floor() as i64 - 1;
    loop {
        let s = ((j as f64) * 0.5 * lk).exp();
        if s > hi {
            break;
        }
        if s > lo {
            out.push(s);
        }
        j += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// CSV interchange: one two-column file per component, header "s,alpha" etc.
// ---------------------------------------------------------------------------

pub fn write_profile_csv<W: Write>(w: &mut W, header: &str, s: &[f64], vals: &[f64]) -> std::io::Result<()> {
    writeln!(w, "s,{header}")?;
    for (a, b) in s.iter().zip(vals) {
        writeln!(w, "{a},{b}")?;
    }
    Ok(())
}

/// Rebuild a perturbation from the per-component CSVs ("s,alpha" and
/// "s,beta" files); the two node columns must agree exactly.
pub fn perturbation_from_csv<R1: BufRead, R2: BufRead>(
    n: u32,
    alpha_csv: R1,
    beta_csv: R2,
    tau: f64,
    regularity: Regularity,
    spacing: crate::hypgeom::Spacing,
) -> Result<RadialPerturbation> {
    let (s_a, alpha) = read_profile_csv(alpha_csv)?;
    let (s_b, beta) = read_profile_csv(beta_csv)?;
    if s_a != s_b {
        return Err(Error::Grid("alpha and beta CSVs carry different node columns".into()));
    }
    let grid = crate::hypgeom::RadialGrid::from_nodes(n, s_a, spacing)?;
    RadialPerturbation::from_samples(grid, alpha, beta, tau, regularity)
}

pub fn read_profile_csv<R: BufRead>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut s = Vec::new();
    let mut v = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Io(e.to_string()))?;
        if ln == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let a = parts
            .next()
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Io(format!("bad csv line {}", ln + 1)))?;
        let b = parts
            .next()
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Io(format!("bad csv line {}", ln + 1)))?;
        s.push(a);
        v.push(b);
    }
    Ok((s, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<RadialGrid> {
        RadialGrid::log_uniform(3, 0.5, 400.0, 1200).unwrap()
    }

    #[test]
    fn schwarzschild_zero_mass_is_hyperbolic() {
        let e = schwarzschild_ads(0.0, 3, grid()).unwrap();
        assert!(e.alpha.iter().all(|&v| v == 0.0));
        assert!(e.beta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn schwarzschild_value_and_decay() {
        let e = schwarzschild_ads(0.1, 3, grid()).unwrap();
        // alpha(10) = 101/100.98 - 1, computed with extended precision
        let a10 = e.alpha_at(10.0).unwrap();
        assert!((a10 - 1.980_590_216_874e-4).abs() / 1.98e-4 < 1e-6);
        // alpha s^3 -> 2m within 1% at s = 10
        assert!((a10 * 1000.0 - 0.2).abs() / 0.2 < 0.01);
        // decay constant: sup s^n |alpha| in [2m(1-5%), 2m(1+5%)] for s >= 20
        let sup = e
            .grid
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= 20.0)
            .map(|(i, &s)| s.powi(3) * e.alpha[i].abs())
            .fold(0.0f64, f64::max);
        assert!(sup > 0.2 * 0.95 && sup < 0.2 * 1.05, "sup = {sup}");
    }

    #[test]
    fn schwarzschild_symbolic_limit() {
        // alpha(s) s^n -> 2m: first-order expansion of the quotient
        let g4 = RadialGrid::log_uniform(4, 1.0, 400.0, 1200).unwrap();
        let e = schwarzschild_ads(0.25, 4, g4).unwrap();
        let v = e.alpha_at(300.0).unwrap() * 300f64.powi(4);
        assert!((v - 0.5).abs() / 0.5 < 1e-3);
    }

    #[test]
    fn schwarzschild_horizon_error_names_radius() {
        let g = RadialGrid::log_uniform(3, 0.05, 10.0, 64).unwrap();
        let err = schwarzschild_ads(2.0, 3, g).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("admissible"), "{msg}");
    }

    #[test]
    fn evaluate_algebra() {
        let g = grid();
        let e = RadialPerturbation::from_profiles(g, |_| 0.04, |_| -0.01, 1.0, Regularity::Analytic)
            .unwrap();
        let r = e.evaluate(3.0).unwrap();
        assert!((r.trace - (0.04 + 2.0 * -0.01)).abs() < 1e-15);
        assert!((r.radial_quadratic - 0.04).abs() < 1e-15);
        assert!((r.norm_b - (0.04f64 * 0.04 + 2.0 * 0.0001).sqrt()).abs() < 1e-15);
        // zero perturbation evaluates to zeros
        let z = RadialPerturbation::zero(grid());
        let rz = z.evaluate(5.0).unwrap();
        assert_eq!(rz.trace, 0.0);
        assert_eq!(rz.norm_b, 0.0);
        // extrapolation refused
        assert!(e.evaluate(1e6).is_err());
    }

    #[test]
    fn kink_is_continuous_with_corner_slope_jumps() {
        let g = RadialGrid::log_uniform(3, 1.0, 100.0, 4000).unwrap();
        let e = c0_kink(0.02, 1.5, 2.0, 3, g).unwrap();
        assert_eq!(e.regularity, Regularity::C0);
        // continuity: max jump across nodes shrinks under refinement
        let jump = |e: &RadialPerturbation| {
            e.alpha.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0f64, f64::max)
        };
        let g2 = RadialGrid::log_uniform(3, 1.0, 100.0, 8000).unwrap();
        let e2 = c0_kink(0.02, 1.5, 2.0, 3, g2).unwrap();
        assert!(jump(&e2) < jump(&e) * 0.7);
        // one-sided slopes at a corner differ by an amount bounded away from 0
        let corners = kink_corners(2.0, 2.0, 50.0);
        assert!(!corners.is_empty());
        let sc = corners[1];
        let slope = |h: f64, side: f64| {
            let a1 = e2.alpha_at(sc + side * h).unwrap();
            let a0 = e2.alpha_at(sc + side * 2.0 * h).unwrap();
            (a0 - a1) / (side * h)
        };
        for h in [0.02, 0.01] {
            let l = slope(h, -1.0);
            let r = slope(h, 1.0);
            // theoretical jump 8 a lam s^{-tau-1}/ln k with lam = 1/2
            let expect = 8.0 * 0.02 * 0.5 * sc.powf(-2.5) / 2.0f64.ln();
            assert!(
                (l - r).abs() > 0.5 * expect,
                "slope jump too small at h={h}: {l} vs {r}"
            );
        }
        // zero amplitude -> zero perturbation
        let z = c0_kink(0.0, 1.5, 2.0, 3, grid()).unwrap();
        assert!(z.sup_norm() == 0.0);
    }

    #[test]
    fn kink_decay_constant_finite() {
        let g = RadialGrid::log_uniform(3, 1.0, 500.0, 2000).unwrap();
        let e = c0_kink(0.03, 2.0, 1.5, 3, g).unwrap();
        let c = e.decay_constant();
        assert!(c.is_finite() && c > 0.0 && c <= 0.03 * 1.5 * 2.0 + 1e-12);
    }

    #[test]
    fn steps_family_is_continuous_and_gated() {
        let g = RadialGrid::log_uniform(3, 1.0, 100.0, 4000).unwrap();
        let e = c0_steps(0.02, 1.0, 2.2, 0.02, g.clone()).unwrap();
        assert_eq!(e.regularity, Regularity::C0);
        // continuous: node-to-node jumps bounded by the ramp slope times
        // the node spacing, and they shrink under refinement
        let jump = |e: &RadialPerturbation| {
            e.alpha.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0f64, f64::max)
        };
        let g2 = RadialGrid::log_uniform(3, 1.0, 100.0, 8000).unwrap();
        let e2 = c0_steps(0.02, 1.0, 2.2, 0.02, g2).unwrap();
        assert!(jump(&e2) < jump(&e) * 0.7);
        assert!(c0_steps(0.02, 1.0, 2.2, 0.0, g.clone()).is_err());
        assert!(c0_steps(0.02, 1.0, 0.9, 0.02, g).is_err());
    }

    #[test]
    fn positivity_gate() {
        let g = RadialGrid::log_uniform(3, 0.5, 10.0, 64).unwrap();
        let r = RadialPerturbation::from_profiles(g, |_| -1.5, |_| 0.0, 1.0, Regularity::C0);
        assert!(matches!(r, Err(Error::Positivity(_))));
    }

    #[test]
    fn scaling_is_exact() {
        let e = schwarzschild_ads(0.1, 3, grid()).unwrap();
        let h = e.scale(0.5).unwrap();
        for (a, b) in e.alpha.iter().zip(&h.alpha) {
            assert_eq!(*b, 0.5 * *a);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let g = RadialGrid::log_uniform(3, 0.5, 50.0, 64).unwrap();
        let e = schwarzschild_ads(0.1, 3, g).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, "alpha", &e.grid.nodes, &e.alpha).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("s,alpha\n"));
        let (s, v) = read_profile_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(s.len(), e.grid.len());
        // shortest round-trip float formatting reparses exactly
        for (a, b) in v.iter().zip(&e.alpha) {
            assert_eq!(a, b);
        }
        // full perturbation import from the component files
        let mut bbuf = Vec::new();
        write_profile_csv(&mut bbuf, "beta", &e.grid.nodes, &e.beta).unwrap();
        let back = perturbation_from_csv(
            3,
            std::io::BufReader::new(&buf[..]),
            std::io::BufReader::new(&bbuf[..]),
            e.tau,
            e.regularity,
            crate::hypgeom::Spacing::LogUniform,
        )
        .unwrap();
        assert_eq!(back.alpha, e.alpha);
        assert_eq!(back.beta, e.beta);
    }
}
