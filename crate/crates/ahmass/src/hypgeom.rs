//! Ball-model hyperbolic geometry in radial reduction.
//!
//! The model is the unit ball with b = rho^-2 delta, rho = (1 - |x|^2)/2.
//! The radial coordinate used throughout is s = |x|_b = 2|x|/(1 - |x|^2),
//! which equals sinh of the geodesic distance d from the origin. The static
//! potential is V0 = sqrt(1 + s^2) = 1/rho - 1.
//!
//! For radial functions the Laplace-Beltrami operator reduces to
//!   Delta u = (1 + s^2) u'' + [n s + (n-1)/s] u'
//! and the volume element to omega_{n-1} s^{n-1} (1+s^2)^{-1/2} ds.

use crate::numerics::{AdaptiveQuad, Derivator};
use crate::{Error, Result};
use std::sync::Arc;

/// Point data for the ball model chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    /// Euclidean radius |x| in [0, 1).
    pub euclidean_radius: f64,
    /// Conformal factor rho = (1 - |x|^2)/2.
    pub rho: f64,
    /// Hyperbolic radial coordinate s = |x|_b.
    pub s: f64,
    /// Static potential V0 = sqrt(1 + s^2).
    pub v0: f64,
}

/// Map a Euclidean radius in [0, 1) to its chart data.
pub fn chart_point(euclidean_radius: f64) -> Result<ChartPoint> {
    if !(0.0..1.0).contains(&euclidean_radius) {
        return Err(Error::Domain(format!(
            "euclidean radius {euclidean_radius} outside [0, 1)"
        )));
    }
    let r2 = euclidean_radius * euclidean_radius;
    let rho = (1.0 - r2) / 2.0;
    let s = 2.0 * euclidean_radius / (1.0 - r2);
    let v0 = (1.0 + s * s).sqrt();
    Ok(ChartPoint {
        euclidean_radius,
        rho,
        s,
        v0,
    })
}

/// Inverse of `chart_point`: the Euclidean radius with |x|_b = s.
/// Written as s / (sqrt(1+s^2) + 1) to stay accurate near the origin.
pub fn euclidean_radius_of(s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Domain(format!("negative radial coordinate {s}")));
    }
    Ok(s / ((1.0 + s * s).sqrt() + 1.0))
}

/// Geodesic distance from the origin: d = arcsinh(s) = ln((1+|x|)/(1-|x|)).
pub fn geodesic_radius(s: f64) -> f64 {
    s.asinh()
}

/// Volume of the unit (n-1)-sphere, omega_{n-1} = 2 pi^{n/2} / Gamma(n/2),
/// evaluated exactly for integer n via the half-integer Gamma recursion.
pub fn unit_sphere_volume(n: u32) -> f64 {
    let pi = std::f64::consts::PI;
    // Gamma(n/2); n/2 is integer or half-integer
    let g = if n % 2 == 0 {
        let mut acc = 1.0;
        for k in 1..(n / 2) {
            acc *= k as f64;
        }
        acc
    } else {
        let mut acc = pi.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 {
            acc *= x;
            x += 1.0;
        }
        acc
    };
    2.0 * pi.powf(n as f64 / 2.0) / g
}

/// Spacing policy of a radial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Uniform,
    LogUniform,
}

/// A strictly increasing set of s-nodes with the ambient dimension.
///
/// Nodes at s = 0 are refused: the (n-1)/s coefficient of the radial
/// Laplacian is singular there; origin treatments live with the callers
/// that need them.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub n: u32,
    pub nodes: Vec<f64>,
    pub spacing: Spacing,
    pub omega: f64,
}

impl RadialGrid {
    pub fn log_uniform(n: u32, s_min: f64, s_max: f64, count: usize) -> Result<Arc<RadialGrid>> {
        let y0 = s_min.ln();
        let y1 = s_max.ln();
        let nodes = (0..count)
            .map(|i| (y0 + (y1 - y0) * i as f64 / (count - 1) as f64).exp())
            .collect();
        Self::from_nodes(n, nodes, Spacing::LogUniform)
    }

    pub fn uniform(n: u32, s_min: f64, s_max: f64, count: usize) -> Result<Arc<RadialGrid>> {
        let nodes = (0..count)
            .map(|i| s_min + (s_max - s_min) * i as f64 / (count - 1) as f64)
            .collect();
        Self::from_nodes(n, nodes, Spacing::Uniform)
    }

    pub fn from_nodes(n: u32, nodes: Vec<f64>, spacing: Spacing) -> Result<Arc<RadialGrid>> {
        if n < 3 {
            return Err(Error::Domain(format!("dimension n = {n} must be >= 3")));
        }
        if nodes.len() < 16 {
            return Err(Error::Grid(format!(
                "radial grid needs at least 16 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] <= 0.0 {
            return Err(Error::Grid("radial grid refuses nodes at s <= 0".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("radial grid nodes must be strictly increasing".into()));
        }
        Ok(Arc::new(RadialGrid {
            n,
            nodes,
            spacing,
            omega: unit_sphere_volume(n),
        }))
    }

    /// Default laboratory grid: log-uniform, wide enough for mass
    /// experiments out to r ~ 2e3.
    pub fn standard(n: u32) -> Arc<RadialGrid> {
        Self::log_uniform(n, 0.05, 2.0e3, 4000).expect("standard grid parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn s_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.s_min() && s <= self.s_max()
    }
}

/// Derivative stencils suited to the grid's spacing policy.
pub fn derivator_for(grid: &RadialGrid) -> Derivator {
    match grid.spacing {
        Spacing::LogUniform => Derivator::new_log(&grid.nodes),
        Spacing::Uniform => Derivator::new(&grid.nodes),
    }
}

/// Same, with the even-reflection inner wall used by the flow.
pub fn derivator_for_even_inner(grid: &RadialGrid) -> Derivator {
    match grid.spacing {
        Spacing::LogUniform => Derivator::new_log_even_inner(&grid.nodes),
        Spacing::Uniform => Derivator::with_even_inner(&grid.nodes),
    }
}

/// Radial Laplacian (1+s^2) u'' + [n s + (n-1)/s] u' sampled on the grid.
/// Fourth-order interior stencils, one-sided of the same order at the ends.
pub fn radial_laplacian(grid: &RadialGrid, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != grid.len() {
        return Err(Error::Grid(format!(
            "profile length {} does not match grid length {}",
            u.len(),
            grid.len()
        )));
    }
    if grid.len() < 5 {
        return Err(Error::Grid("interior stencil needs at least 5 nodes".into()));
    }
    let d = derivator_for(grid);
    Ok(laplacian_with(grid, &d, u))
}

/// Same as `radial_laplacian` with a caller-provided derivator (reuse).
pub fn laplacian_with(grid: &RadialGrid, d: &Derivator, u: &[f64]) -> Vec<f64> {
    let n = grid.n as f64;
    let du = d.d1(u);
    let ddu = d.d2(u);
    grid.nodes
        .iter()
        .enumerate()
        .map(|(i, &s)| (1.0 + s * s) * ddu[i] + (n * s + (n - 1.0) / s) * du[i])
        .collect()
}

/// Hyperbolic volume of the annulus r1 < s < r2:
/// omega_{n-1} int_{r1}^{r2} s^{n-1} (1+s^2)^{-1/2} ds   (adaptive quadrature).
pub fn annulus_measure(r1: f64, r2: f64, n: u32) -> Result<f64> {
    if r1 <= 0.0 || r2 < r1 {
        return Err(Error::Ordering(format!("need 0 < r1 <= r2, got ({r1}, {r2})")));
    }
    let nf = n as f64;
    let q = AdaptiveQuad::new();
    let val = q.integrate(
        |s| s.powf(nf - 1.0) / (1.0 + s * s).sqrt(),
        r1,
        r2,
        1e-12,
        1e-300,
    );
    Ok(unit_sphere_volume(n) * val)
}

/// Area of the sphere s = const: omega_{n-1} s^{n-1}.
pub fn sphere_area(s: f64, n: u32) -> f64 {
    unit_sphere_volume(n) * s.powf(n as f64 - 1.0)
}

/// Fraction of the geodesic sphere of radius `ell` (around the origin) that
/// lies inside the geodesic ball B(x0, r) where x0 sits at geodesic radius
/// `d0`. Used to slice off-center balls into radial shells.
pub fn ball_cap_fraction(n: u32, d0: f64, r: f64, ell: f64) -> f64 {
    if ell + d0 <= r {
        return 1.0; // shell entirely inside
    }
    if (ell - d0).abs() >= r {
        return 0.0;
    }
    // hyperbolic law of cosines: cosh dist = cosh ell cosh d0 - sinh ell sinh d0 cos theta
    let ct = ((ell.cosh() * d0.cosh() - r.cosh()) / (ell.sinh() * d0.sinh())).clamp(-1.0, 1.0);
    let theta_max = ct.acos();
    if n == 3 {
        return 0.5 * (1.0 - ct);
    }
    // general n: cap area fraction of S^{n-1}
    let q = AdaptiveQuad::new();
    let p = n as f64 - 2.0;
    let num = q.integrate(|t| t.sin().powf(p), 0.0, theta_max, 1e-10, 1e-300);
    let den = q.integrate(|t| t.sin().powf(p), 0.0, std::f64::consts::PI, 1e-10, 1e-300);
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn chart_point_origin_and_half() {
        let p = chart_point(0.0).unwrap();
        assert_eq!(p.rho, 0.5);
        assert_eq!(p.s, 0.0);
        assert_eq!(p.v0, 1.0);

        let p = chart_point(0.5).unwrap();
        assert!(rel(p.rho, 0.375) < 1e-15);
        assert!(rel(p.s, 4.0 / 3.0) < 1e-15);
        assert!(rel(p.v0, 5.0 / 3.0) < 1e-14);
        // cross-check v0 = 1/rho - 1
        assert!(rel(1.0 / p.rho - 1.0, p.v0) < 1e-12);
    }

    #[test]
    fn chart_point_everything_consistent() {
        // derived identity s = sinh(d), d = ln((1+|x|)/(1-|x|))
        for &x in &[0.1, 0.3, 0.7, 0.9, 0.99] {
            let p = chart_point(x).unwrap();
            let d = ((1.0 + x) / (1.0 - x)).ln();
            assert!(rel(p.s, d.sinh()) < 1e-12);
            assert!(rel(p.v0, 1.0 / p.rho - 1.0) < 1e-12);
        }
        // oracle value from extended-precision evaluation of 2|x|/(1-|x|^2)
        let p = chart_point(0.9).unwrap();
        assert!(rel(p.s, 9.473_684_210_526_315) < 1e-14);
        // monotone
        assert!(chart_point(0.91).unwrap().s > p.s);
    }

    #[test]
    fn chart_point_rejects_bad_input() {
        assert!(chart_point(1.0).is_err());
        assert!(chart_point(-0.1).is_err());
    }

    #[test]
    fn inverse_roundtrip_to_1e12() {
        let mut s = 1e-6;
        while s < 1.0e4 {
            let x = euclidean_radius_of(s).unwrap();
            let p = chart_point(x).unwrap();
            assert!(rel(p.s, s) < 1e-12, "roundtrip at s={s}");
            s *= 3.7;
        }
        assert_eq!(euclidean_radius_of(0.0).unwrap(), 0.0);
    }

    #[test]
    fn omega_closed_form() {
        assert!(rel(unit_sphere_volume(3), 4.0 * std::f64::consts::PI) < 1e-14);
        assert!(
            rel(unit_sphere_volume(4), 2.0 * std::f64::consts::PI * std::f64::consts::PI) < 1e-14
        );
        // omega_4 = 8 pi^2 / 3
        assert!(rel(unit_sphere_volume(5), 8.0 * std::f64::consts::PI.powi(2) / 3.0) < 1e-14);
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::log_uniform(2, 0.1, 10.0, 64).is_err());
        assert!(RadialGrid::uniform(3, 0.0, 10.0, 64).is_err());
        assert!(RadialGrid::uniform(3, 0.1, 10.0, 8).is_err());
        let g = RadialGrid::log_uniform(3, 0.1, 10.0, 64).unwrap();
        assert_eq!(g.len(), 64);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn laplacian_trivial_profiles() {
        let g = RadialGrid::log_uniform(3, 0.1, 50.0, 600).unwrap();
        // constant -> 0
        let c = vec![2.5; g.len()];
        let lap = radial_laplacian(&g, &c).unwrap();
        // zero up to stencil roundoff, which scales like (1+s^2) eps / dy^2
        assert!(lap.iter().all(|v| v.abs() < 1e-7));
        // V0 -> n V0, value 5 at n=3, s=4/3
        let v0: Vec<f64> = g.nodes.iter().map(|&s| (1.0 + s * s).sqrt()).collect();
        let lap = radial_laplacian(&g, &v0).unwrap();
        for (i, &s) in g.nodes.iter().enumerate() {
            let expect = 3.0 * (1.0 + s * s).sqrt();
            assert!(rel(lap[i], expect) < 1e-7, "s={s}");
        }
        let at = |s: f64| 3.0 * (1.0 + s * s).sqrt();
        assert!(rel(at(4.0 / 3.0), 5.0) < 1e-14);
    }

    #[test]
    fn laplacian_inverse_s_identity() {
        // Delta(s^-1) = (2-n) s^-1 + (3-n) s^-3 for n in {3,4,5}
        for n in [3u32, 4, 5] {
            let g = RadialGrid::log_uniform(n, 0.2, 40.0, 800).unwrap();
            let u: Vec<f64> = g.nodes.iter().map(|&s| 1.0 / s).collect();
            let lap = radial_laplacian(&g, &u).unwrap();
            for (i, &s) in g.nodes.iter().enumerate() {
                let expect = (2.0 - n as f64) / s + (3.0 - n as f64) / (s * s * s);
                assert!((lap[i] - expect).abs() / expect.abs().max(1e-3) < 1e-6, "n={n} s={s}");
            }
        }
        // spot value from the closed form: n=3, s=1 -> -1
        assert!(rel((2.0 - 3.0) / 1.0 + 0.0, -1.0) < 1e-15);
    }

    #[test]
    fn corollary_derivative_commutation_on_random_polynomials() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [3u32, 4] {
            // rhs assembled from the closed-form polynomial derivatives, so
            // the residual isolates the FD truncation of the left side
            let run = |count: usize, coeffs: &[f64]| -> f64 {
                let g = RadialGrid::uniform(n, 0.5, 6.0, count).unwrap();
                let d = Derivator::new(&g.nodes);
                let poly = |s: f64, der: usize| -> f64 {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| {
                            if k < der {
                                0.0
                            } else {
                                let mut f = *c;
                                for j in 0..der {
                                    f *= (k - j) as f64;
                                }
                                f * s.powi((k - der) as i32)
                            }
                        })
                        .sum()
                };
                let u: Vec<f64> = g.nodes.iter().map(|&s| poly(s, 0)).collect();
                let du = d.d1(&u);
                let lap_du = laplacian_with(&g, &d, &du);
                // Delta u' = (Delta u)' - 2 s u'' - [n - (n-1) s^-2] u'
                let nf = n as f64;
                let mut worst = 0.0f64;
                let mut scale = 0.0f64;
                for (i, &s) in g.nodes.iter().enumerate().skip(5).take(count - 10) {
                    let (u1, u2, u3) = (poly(s, 1), poly(s, 2), poly(s, 3));
                    let dlap_u = 2.0 * s * u2 + (1.0 + s * s) * u3
                        + (nf - (nf - 1.0) / (s * s)) * u1
                        + (nf * s + (nf - 1.0) / s) * u2;
                    let rhs = dlap_u - 2.0 * s * u2 - (nf - (nf - 1.0) / (s * s)) * u1;
                    worst = worst.max((lap_du[i] - rhs).abs());
                    scale = scale.max(rhs.abs());
                }
                worst / scale
            };
            for _ in 0..3 {
                let coeffs: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                // the two sides agree to discretization error; composed
                // stencils on polynomials sit near the rounding floor
                let e1 = run(150, &coeffs);
                assert!(e1 < 1e-6, "relative residual too large: {e1}");
            }
        }
    }

    #[test]
    fn corollary_commutation_residual_decays_at_scheme_order() {
        // generic (transcendental) profile, where the composed truncation
        // does not cancel: residual decays at the scheme's order
        let n = 3u32;
        let run = |count: usize| -> f64 {
            let g = RadialGrid::uniform(n, 0.5, 6.0, count).unwrap();
            let d = Derivator::new(&g.nodes);
            let u: Vec<f64> = g.nodes.iter().map(|&s| (1.3 * s).sin().exp()).collect();
            let du = d.d1(&u);
            let lap_du = laplacian_with(&g, &d, &du);
            let nf = n as f64;
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for (i, &s) in g.nodes.iter().enumerate().skip(5).take(count - 10) {
                let c = (1.3 * s).cos();
                let sn = (1.3 * s).sin();
                let e = sn.exp();
                let u1 = 1.3 * c * e;
                let u2 = e * (1.69 * c * c - 1.69 * sn);
                let u3 = e * (1.3 * c * (1.69 * c * c - 1.69 * sn) + 1.69 * (-1.3 * c) - 2.0 * 1.69 * 1.3 * sn * c);
                let rhs = (1.0 + s * s) * u3 + (nf * s + (nf - 1.0) / s) * u2;
                let _ = u1;
                worst = worst.max((lap_du[i] - rhs).abs());
                scale = scale.max(rhs.abs());
            }
            worst / scale
        };
        let e1 = run(150);
        let e2 = run(300);
        assert!(e1 < 1e-4, "residual too large: {e1}");
        assert!(e1 / e2 > 6.0, "no decay at scheme order: {e1} vs {e2}");
    }

    #[test]
    fn annulus_measure_oracle() {
        // closed-form antiderivative (s sqrt(1+s^2) - asinh s)/2 at n=3
        let f = |s: f64| (s * (1.0 + s * s).sqrt() - s.asinh()) / 2.0;
        let oracle = 4.0 * std::f64::consts::PI * (f(1.1) - f(0.9));
        let v = annulus_measure(0.9, 1.1, 3).unwrap();
        assert!(rel(v, oracle) < 1e-10);
        // frozen oracle value
        assert!(rel(v, 1.777_898_934_86) < 1e-9);
        // empty annulus
        assert_eq!(annulus_measure(0.9, 0.9, 3).unwrap(), 0.0);
        assert!(annulus_measure(1.1, 0.9, 3).is_err());
        // sphere area at s=1, n=3 is 4 pi
        assert!(rel(sphere_area(1.0, 3), 4.0 * std::f64::consts::PI) < 1e-14);
    }

    #[test]
    fn laplacian_convergence_order() {
        // log-log slope of the V0 identity error under refinement
        let err = |count: usize| -> f64 {
            let g = RadialGrid::log_uniform(3, 0.1, 100.0, count).unwrap();
            let u: Vec<f64> = g.nodes.iter().map(|&s| (1.0 + s * s).sqrt()).collect();
            let lap = radial_laplacian(&g, &u).unwrap();
            g.nodes
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let expect = 3.0 * (1.0 + s * s).sqrt();
                    (lap[i] - expect).abs() / expect
                })
                .fold(0.0, f64::max)
        };
        let counts = [200usize, 400, 800];
        let xs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
        let ys: Vec<f64> = counts.iter().map(|&c| err(c).ln()).collect();
        let (slope, _) = crate::numerics::linfit(&xs, &ys);
        assert!(-slope > 3.5, "observed order {}", -slope);
    }

    #[test]
    fn cap_fraction_limits() {
        // full sphere when the shell is swallowed by the ball
        assert_eq!(ball_cap_fraction(3, 0.3, 1.0, 0.5), 1.0);
        // zero when the shell misses the ball on either side
        assert_eq!(ball_cap_fraction(3, 2.0, 1.0, 0.5), 0.0);
        assert_eq!(ball_cap_fraction(3, 2.0, 1.0, 3.5), 0.0);
        // half fraction when the shell passes through the center plane-ish:
        // at ell = d0 and small r, theta_max ~ r/sinh stuff -> small cap
        let f = ball_cap_fraction(3, 2.0, 0.2, 2.0);
        assert!(f > 0.0 && f < 0.2);
        // n=4 agrees with n=3 qualitatively
        let f4 = ball_cap_fraction(4, 2.0, 0.2, 2.0);
        assert!(f4 > 0.0 && f4 < 0.2);
    }
}
