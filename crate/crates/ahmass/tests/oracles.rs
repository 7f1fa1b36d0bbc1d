//! Cross-checks of the radial reductions against brute-force coordinate
//! oracles (n = 3). The oracles live in tests/common and share no code with
//! the implementation paths they verify.

#[allow(dead_code)] // each test binary uses a subset of the oracles
mod common;

use ahmass::curvature::scalar_curvature_of;
use ahmass::hypgeom::{derivator_for, RadialGrid};
use ahmass::massfun::mass_c2;
use ahmass::metrics::{schwarzschild_ads, RadialPerturbation, Regularity};
use rand::{Rng, SeedableRng};
use std::sync::Arc;

fn test_alpha(s: f64) -> f64 {
    0.03 * (-((s - 2.0) / 0.8f64).powi(2)).exp() + 0.01 / (1.0 + s * s)
}

fn test_beta(s: f64) -> f64 {
    -0.02 * (-((s - 2.5) / 1.1f64).powi(2)).exp() + 0.005 * s * s / (1.0 + s * s).powi(2)
}

fn grid() -> Arc<RadialGrid> {
    RadialGrid::log_uniform(3, 0.3, 60.0, 2000).unwrap()
}

#[test]
fn mass_c2_matches_sphere_quadrature() {
    // 200-point sphere rule (10 polar x 20 azimuthal) at two radii,
    // agreement within 0.5% for a metric exercising both frame components
    let e = RadialPerturbation::from_profiles(grid(), test_alpha, test_beta, 2.0, Regularity::Analytic)
        .unwrap();
    for r in [5.0, 20.0] {
        let reduced = mass_c2(&e, r).unwrap();
        let oracle = common::mass_c2_sphere_quadrature(r, &test_alpha, &test_beta, 10, 20);
        let rel = (reduced - oracle).abs() / oracle.abs();
        assert!(rel < 5e-3, "r = {r}: reduced {reduced} vs oracle {oracle} (rel {rel:.2e})");
    }
    // and for the exact Einstein family
    let m = 0.1;
    let es = schwarzschild_ads(m, 3, grid()).unwrap();
    let fa = move |s: f64| {
        let w = 2.0 * m / s;
        w / (1.0 + s * s - w)
    };
    let fb = |_: f64| 0.0;
    for r in [5.0, 20.0] {
        let reduced = mass_c2(&es, r).unwrap();
        let oracle = common::mass_c2_sphere_quadrature(r, &fa, &fb, 10, 20);
        let rel = (reduced - oracle).abs() / oracle.abs();
        assert!(rel < 5e-3, "schwarzschild r = {r}: {reduced} vs {oracle}");
    }
}

#[test]
fn scalar_curvature_matches_coordinate_fd() {
    // warped closed form vs nested finite differences of the full coordinate
    // metric at 20 random interior points, coarse-grid tolerance 2%
    let e = RadialPerturbation::from_profiles(grid(), test_alpha, test_beta, 2.0, Regularity::Analytic)
        .unwrap();
    let rprof = scalar_curvature_of(&e).unwrap();
    let gfun = |x: &[f64; 3]| -> [[f64; 3]; 3] {
        let rho = common::rho_of(x);
        let mut g = common::e_coord(x, &test_alpha, &test_beta);
        for (i, row) in g.iter_mut().enumerate() {
            row[i] += 1.0 / (rho * rho);
        }
        g
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        // random interior point with s in [0.8, 3.0]
        let s: f64 = rng.gen_range(0.8..3.0);
        let xr = s / ((1.0 + s * s).sqrt() + 1.0);
        let dir = {
            let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let x = [xr * dir[0], xr * dir[1], xr * dir[2]];
        let r_fd = common::scalar_curvature_fd(&gfun, &x, 2e-4);
        let r_reduced = ahmass::numerics::interp_cubic(&e.grid.nodes, &rprof, s);
        let rel = (r_fd - r_reduced).abs() / r_reduced.abs();
        assert!(
            rel < 0.02,
            "s = {s:.3}: coordinate {r_fd:.6} vs warped {r_reduced:.6} (rel {rel:.2e})"
        );
    }
}

#[test]
fn frame_derivative_norms_match_coordinate_oracle() {
    let e = RadialPerturbation::from_profiles(grid(), test_alpha, test_beta, 2.0, Regularity::Analytic)
        .unwrap();
    let d = derivator_for(&e.grid);
    let de_prof = e.deriv_norm_profile(&d);
    let d2e_prof = e.second_deriv_norm_profile(&d);
    for s in [1.2f64, 1.8, 2.5, 3.5] {
        let xr = s / ((1.0 + s * s).sqrt() + 1.0);
        let x = [xr * 0.6, -xr * 0.64, xr * 0.48];
        let (n1, n2) = common::frame_norms_coord(&x, &test_alpha, &test_beta, 1e-4);
        let f1 = ahmass::numerics::interp_cubic(&e.grid.nodes, &de_prof, s);
        let f2 = ahmass::numerics::interp_cubic(&e.grid.nodes, &d2e_prof, s);
        assert!((n1 - f1).abs() / f1 < 1e-3, "s={s}: |De| {n1} vs {f1}");
        assert!((n2 - f2).abs() / f2 < 2e-2, "s={s}: |D2e| {n2} vs {f2}");
    }
}

#[test]
fn linearized_scalar_is_derivative_of_curvature() {
    // d/dlam R(b + lam e) at 0 equals the linearized expression
    let g = grid();
    let base = RadialPerturbation::from_profiles(g.clone(), test_alpha, test_beta, 2.0, Regularity::Analytic)
        .unwrap();
    let lin = ahmass::curvature::linearized_scalar(&base).unwrap();
    let lam = 1e-5;
    let rp = scalar_curvature_of(&base.scale(lam).unwrap()).unwrap();
    let rm = scalar_curvature_of(&base.scale(-lam).unwrap()).unwrap();
    let lo = g.nodes.partition_point(|&s| s < 0.8);
    let hi = g.nodes.partition_point(|&s| s <= 10.0);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in lo..hi {
        let fd = (rp[i] - rm[i]) / (2.0 * lam);
        worst = worst.max((fd - lin[i]).abs());
        scale = scale.max(lin[i].abs());
    }
    assert!(worst / scale < 1e-4, "linearization mismatch {worst} at scale {scale}");
}
