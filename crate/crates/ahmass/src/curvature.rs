//! Scalar curvature of radial metrics, its linearization at the hyperbolic
//! background, and the quadratic remainder.
//!
//! Any rotationally symmetric metric g = b + e can be brought to area-radius
//! form g = p(sigma) d sigma^2 + sigma^2 g_{S^{n-1}} by the change of radial
//! variable sigma = s sqrt(1 + beta). In that gauge the scalar curvature
//! closes in (p, p') alone:
//!   R = (n-1) p' / (sigma p^2) + (n-1)(n-2) (p - 1) / (p sigma^2).
//! The standard warped-product reduction behind this is R = -2(n-1) wddot/w
//! + (n-1)(n-2)(1 - wdot^2)/w^2 for g = dt^2 + w(t)^2 g_S, specialized to
//! w = sigma; it is cross-checked against a brute-force coordinate oracle in
//! the integration tests.

use crate::hypgeom::RadialGrid;
use crate::metrics::{RadialPerturbation, Regularity};
use crate::numerics::Derivator;
use crate::{Error, Result};
use std::sync::Arc;

/// A radial metric in area-radius gauge: g = p(sigma) d sigma^2 + sigma^2 g_S.
/// For a perturbation with beta = 0 this is p = (1 + alpha)/(1 + s^2).
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    pub n: u32,
    pub sigma: Vec<f64>,
    pub p: Vec<f64>,
}

impl WarpedMetric {
    pub fn new(n: u32, sigma: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if sigma.len() != p.len() || sigma.len() < 6 {
            return Err(Error::Grid("warped metric needs matching profiles, >= 6 nodes".into()));
        }
        if p.iter().any(|&v| v <= 0.0) {
            return Err(Error::Positivity("warped radial coefficient p must be positive".into()));
        }
        if sigma.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("area radius must be strictly increasing".into()));
        }
        Ok(WarpedMetric { n, sigma, p })
    }

    /// Gauge transform of a radial perturbation. Needs beta differentiable,
    /// so the tag must be C2 or better.
    pub fn from_perturbation(e: &RadialPerturbation) -> Result<Self> {
        require_c2(e)?;
        let d = crate::hypgeom::derivator_for(&e.grid);
        let dbeta = d.d1(&e.beta);
        let mut sigma = Vec::with_capacity(e.grid.len());
        let mut p = Vec::with_capacity(e.grid.len());
        for (i, &s) in e.grid.nodes.iter().enumerate() {
            let b = 1.0 + e.beta[i];
            let sp = b.sqrt() + s * dbeta[i] / (2.0 * b.sqrt());
            if sp <= 0.0 {
                return Err(Error::Positivity(format!(
                    "area radius not monotone at s = {s} (sigma' = {sp})"
                )));
            }
            sigma.push(s * b.sqrt());
            p.push((1.0 + e.alpha[i]) / (1.0 + s * s) / (sp * sp));
        }
        WarpedMetric::new(e.n, sigma, p)
    }
}

/// Scalar curvature profile of a warped metric on its sigma-nodes.
pub fn scalar_curvature(g: &WarpedMetric) -> Vec<f64> {
    let nf = g.n as f64;
    let d = Derivator::new_log(&g.sigma);
    let dp = d.d1(&g.p);
    g.sigma
        .iter()
        .enumerate()
        .map(|(i, &sg)| {
            (nf - 1.0) * dp[i] / (sg * g.p[i] * g.p[i])
                + (nf - 1.0) * (nf - 2.0) * (g.p[i] - 1.0) / (g.p[i] * sg * sg)
        })
        .collect()
}

/// R + n(n-1) on the perturbation's s-nodes, in a form whose every term
/// carries a factor of the perturbation: with pi the deviation of the
/// area-radius coefficient, pi = p (1+sigma^2) - 1,
///   R + n(n-1) = (n-1) [ pi_sigma (1+sigma^2) / (sigma (1+pi)^2)
///                        + (n-2) pi / ((1+pi) sigma^2) + n pi / (1+pi) ],
/// and pi itself is expanded so no near-equal quantities are subtracted.
/// At e = 0 the result is exactly zero in floating point, which keeps the
/// Einstein examples and the flow fixed point at rounding accuracy.
pub fn scalar_curvature_excess(e: &RadialPerturbation) -> Result<Vec<f64>> {
    require_c2(e)?;
    let nf = e.n as f64;
    let d = crate::hypgeom::derivator_for(&e.grid);
    let dbeta = d.d1(&e.beta);
    let m = e.grid.len();
    let mut sigma = Vec::with_capacity(m);
    let mut dsigma = Vec::with_capacity(m);
    let mut pi = Vec::with_capacity(m);
    for (i, &s) in e.grid.nodes.iter().enumerate() {
        let s2 = 1.0 + s * s;
        let al = e.alpha[i];
        let be = e.beta[i];
        let bp = dbeta[i];
        let b1 = 1.0 + be;
        let sp = b1.sqrt() + s * bp / (2.0 * b1.sqrt());
        if sp <= 0.0 {
            return Err(Error::Positivity(format!(
                "area radius not monotone at s = {s} (sigma' = {sp})"
            )));
        }
        sigma.push(s * b1.sqrt());
        dsigma.push(sp);
        // numerator of pi, expanded term by term in (alpha, beta, beta')
        let num = al * s2 * (1.0 + s * s * be / s2) - be - s2 * (s * bp + s * s * bp * bp / (4.0 * b1));
        pi.push(num / (s2 * sp * sp));
    }
    let dpi_ds = d.d1(&pi);
    Ok((0..m)
        .map(|i| {
            let sg = sigma[i];
            let p1 = 1.0 + pi[i];
            let pis = dpi_ds[i] / dsigma[i];
            (nf - 1.0)
                * (pis * (1.0 + sg * sg) / (sg * p1 * p1)
                    + (nf - 2.0) * pi[i] / (p1 * sg * sg)
                    + nf * pi[i] / p1)
        })
        .collect())
}

/// Scalar curvature of b + e on the perturbation's own s-nodes.
pub fn scalar_curvature_of(e: &RadialPerturbation) -> Result<Vec<f64>> {
    let nf = e.n as f64;
    Ok(scalar_curvature_excess(e)?
        .into_iter()
        .map(|v| v - nf * (nf - 1.0))
        .collect())
}

fn require_c2(e: &RadialPerturbation) -> Result<()> {
    if e.regularity < Regularity::C2 {
        return Err(Error::Regularity(
            "operation needs second derivatives; mollify C0/C1 data through the flow first".into(),
        ));
    }
    Ok(())
}

fn require_c1(e: &RadialPerturbation) -> Result<()> {
    if e.regularity < Regularity::C1 {
        return Err(Error::Regularity(
            "operation needs first derivatives; mollify C0 data through the flow first".into(),
        ));
    }
    Ok(())
}

/// First-order variation of the scalar curvature at b, in radial reduction:
///   l = (n-1) tr_b e + div div e - Delta tr_b e
/// with div div e = dN psi + (n-1) c psi, psi = dN alpha + (n-1) c (alpha - beta).
pub fn linearized_scalar(e: &RadialPerturbation) -> Result<Vec<f64>> {
    require_c1(e)?;
    let nf = e.n as f64;
    let grid = &e.grid;
    let d = crate::hypgeom::derivator_for(grid);
    let trace: Vec<f64> = e
        .alpha
        .iter()
        .zip(&e.beta)
        .map(|(&a, &b)| a + (nf - 1.0) * b)
        .collect();
    let da = d.d1(&e.alpha);
    let psi: Vec<f64> = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let w = (1.0 + s * s).sqrt();
            w * da[i] + (nf - 1.0) * w / s * (e.alpha[i] - e.beta[i])
        })
        .collect();
    let dpsi = d.d1(&psi);
    let lap_tr = crate::hypgeom::laplacian_with(grid, &d, &trace);
    Ok(grid
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let w = (1.0 + s * s).sqrt();
            (nf - 1.0) * trace[i] + w * dpsi[i] + (nf - 1.0) * w / s * psi[i] - lap_tr[i]
        })
        .collect())
}

/// Full curvature bookkeeping R + n(n-1) = l + q.
#[derive(Debug, Clone)]
pub struct ScalarCurvatureReport {
    pub r: Vec<f64>,
    pub linearized: Vec<f64>,
    pub remainder: Vec<f64>,
    /// sup |q| / (|e|^2 + |De|^2) over nodes where the denominator > 1e-14.
    pub c_q: f64,
}

/// Quadratic remainder q = (R + n(n-1)) - l and its recorded bound constant.
pub fn remainder(e: &RadialPerturbation) -> Result<ScalarCurvatureReport> {
    require_c2(e)?;
    let nf = e.n as f64;
    let excess = scalar_curvature_excess(e)?;
    let r: Vec<f64> = excess.iter().map(|&v| v - nf * (nf - 1.0)).collect();
    let lin = linearized_scalar(e)?;
    let q: Vec<f64> = excess.iter().zip(&lin).map(|(&ev, &lv)| ev - lv).collect();
    let d = crate::hypgeom::derivator_for(&e.grid);
    let en = e.norm_profile();
    let den = e.deriv_norm_profile(&d);
    let mut c_q = 0.0f64;
    for i in 0..q.len() {
        let denom = en[i] * en[i] + den[i] * den[i];
        if denom > 1e-14 {
            c_q = c_q.max(q[i].abs() / denom);
        }
    }
    Ok(ScalarCurvatureReport {
        r,
        linearized: lin,
        remainder: q,
        c_q,
    })
}

/// Helper for curvature on a metric given by closures (test constructors).
pub fn perturbation_from_closures<F, G>(
    grid: Arc<RadialGrid>,
    fa: F,
    fb: G,
    tau: f64,
) -> Result<RadialPerturbation>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    RadialPerturbation::from_profiles(grid, fa, fb, tau, Regularity::Analytic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::schwarzschild_ads;

    fn grid() -> Arc<RadialGrid> {
        // s_min clear of the m = 0.5 horizon radius (~0.68)
        RadialGrid::log_uniform(3, 0.8, 200.0, 2400).unwrap()
    }

    fn max_rel(xs: &[f64], expect: f64) -> f64 {
        xs.iter()
            .map(|&v| (v - expect).abs() / expect.abs())
            .fold(0.0, f64::max)
    }

    fn interior<'a>(grid: &RadialGrid, xs: &'a [f64]) -> &'a [f64] {
        // trim a few nodes at each end where one-sided stencils live
        &xs[4..grid.len() - 4]
    }

    #[test]
    fn hyperbolic_space_curvature() {
        let e = RadialPerturbation::zero(grid());
        let r = scalar_curvature_of(&e).unwrap();
        assert!(max_rel(interior(&e.grid, &r), -6.0) < 1e-9);
    }

    #[test]
    fn conformal_scaling_law() {
        // R((1+eps) b) = -n(n-1)/(1+eps); also R(c g) = R(g)/c for c in {2, 1/2}
        let g = grid();
        for eps in [1.0, -0.5, 0.07] {
            let e = RadialPerturbation::conformal(g.clone(), eps).unwrap();
            let r = scalar_curvature_of(&e).unwrap();
            assert!(
                max_rel(interior(&g, &r), -6.0 / (1.0 + eps)) < 1e-8,
                "eps = {eps}"
            );
        }
    }

    #[test]
    fn schwarzschild_is_einstein() {
        for m in [0.05, 0.1, 0.5] {
            let e = schwarzschild_ads(m, 3, grid()).unwrap();
            let r = scalar_curvature_of(&e).unwrap();
            assert!(max_rel(interior(&e.grid, &r), -6.0) < 1e-7, "m = {m}");
        }
        // n = 4 as well
        let g4 = RadialGrid::log_uniform(4, 0.8, 200.0, 2400).unwrap();
        let e = schwarzschild_ads(0.2, 4, g4).unwrap();
        let r = scalar_curvature_of(&e).unwrap();
        assert!(max_rel(interior(&e.grid, &r), -12.0) < 1e-7);
    }

    #[test]
    fn linearized_trivial_and_conformal() {
        let g = grid();
        let z = RadialPerturbation::zero(g.clone());
        let l = linearized_scalar(&z).unwrap();
        assert!(l.iter().all(|&v| v.abs() < 1e-12));
        // e = eps b: l = n(n-1) eps exactly (derivative terms vanish)
        let eps = 0.03;
        let e = RadialPerturbation::conformal(g.clone(), eps).unwrap();
        let l = linearized_scalar(&e).unwrap();
        assert!(max_rel(interior(&g, &l), 6.0 * eps) < 1e-9);
    }

    #[test]
    fn conformal_remainder_closed_form() {
        // exact: R + n(n-1) = n(n-1) eps/(1+eps), so q = -n(n-1) eps^2/(1+eps)
        let g = grid();
        let eps = 0.04;
        let e = RadialPerturbation::conformal(g.clone(), eps).unwrap();
        let rep = remainder(&e).unwrap();
        let expect_q = -6.0 * eps * eps / (1.0 + eps);
        assert!(max_rel(interior(&g, &rep.remainder), expect_q) < 1e-6);
        // bookkeeping identity holds by construction
        for i in 0..g.len() {
            let lhs = rep.r[i] + 6.0;
            assert!((lhs - (rep.linearized[i] + rep.remainder[i])).abs() < 1e-12);
        }
        // c_q -> (n-1)/(1+eps): |q|/|e|^2 with |e|^2 = n eps^2
        let expect_cq = 2.0 / (1.0 + eps);
        assert!((rep.c_q - expect_cq).abs() / expect_cq < 1e-6);
    }

    #[test]
    fn remainder_scales_quadratically() {
        // base metric small enough that the lambda = 1 point already sits in
        // the quadratic regime
        let g = RadialGrid::log_uniform(3, 2.0, 300.0, 2400).unwrap();
        let base = schwarzschild_ads(0.1, 3, g).unwrap();
        let sup_q = |lam: f64| {
            let rep = remainder(&base.scale(lam).unwrap()).unwrap();
            rep.remainder.iter().map(|v| v.abs()).fold(0.0f64, f64::max)
        };
        let q1 = sup_q(1.0);
        let q2 = sup_q(0.5);
        let q4 = sup_q(0.25);
        assert!((q1 / q2 - 4.0).abs() < 0.8, "ratio {}", q1 / q2);
        assert!((q2 / q4 - 4.0).abs() < 0.8, "ratio {}", q2 / q4);
    }

    #[test]
    fn quadratic_bound_single_constant_for_family() {
        // one global c works across m in {0.05, 0.1, 0.5}
        let g = grid();
        let cqs: Vec<f64> = [0.05, 0.1, 0.5]
            .iter()
            .map(|&m| remainder(&schwarzschild_ads(m, 3, g.clone()).unwrap()).unwrap().c_q)
            .collect();
        let cmax = cqs.iter().fold(0.0f64, |a, &b| a.max(b));
        for (i, &m) in [0.05, 0.1, 0.5].iter().enumerate() {
            assert!(cqs[i] <= cmax + 1e-12, "m = {m}");
        }
        assert!(cmax.is_finite() && cmax > 0.0);
    }

    #[test]
    fn regularity_gates() {
        let g = RadialGrid::log_uniform(3, 1.0, 50.0, 600).unwrap();
        let k = crate::metrics::c0_kink(0.01, 1.5, 2.0, 3, g).unwrap();
        assert!(matches!(scalar_curvature_of(&k), Err(Error::Regularity(_))));
        assert!(matches!(linearized_scalar(&k), Err(Error::Regularity(_))));
        assert!(matches!(remainder(&k), Err(Error::Regularity(_))));
    }

    #[test]
    fn zero_remainder_for_zero_perturbation() {
        let e = RadialPerturbation::zero(grid());
        let rep = remainder(&e).unwrap();
        assert!(rep.remainder.iter().all(|&v| v.abs() < 1e-9));
    }
}
