//! Brute-force coordinate oracles for n = 3 on the ball model.
//!
//! Everything here works on raw coordinate components g_ij = rho^-2 delta_ij
//! + e_ij with finite differences for derivatives, deliberately sharing no
//! code with the library's radial reductions.

pub fn rho_of(x: &[f64; 3]) -> f64 {
    (1.0 - dot(x, x)) / 2.0
}

pub fn s_of(x: &[f64; 3]) -> f64 {
    dot(x, x).sqrt() / rho_of(x)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// e_ij = alpha rho^-2 xh_i xh_j + beta rho^-2 (delta - xh xh)_ij
pub fn e_coord(x: &[f64; 3], fa: &dyn Fn(f64) -> f64, fb: &dyn Fn(f64) -> f64) -> [[f64; 3]; 3] {
    let r = dot(x, x).sqrt();
    let s = s_of(x);
    let rho = rho_of(x);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let xh = x[i] * x[j] / (r * r);
            let p = ((i == j) as u8 as f64) - xh;
            out[i][j] = (fa(s) * xh + fb(s) * p) / (rho * rho);
        }
    }
    out
}

/// Christoffel symbols of b = rho^-2 delta:
/// Gamma^l_{kj} = (x_j d_{kl} + x_k d_{jl} - x_l d_{kj}) / rho
pub fn christoffel_b(x: &[f64; 3]) -> [[[f64; 3]; 3]; 3] {
    let rho = rho_of(x);
    let mut g = [[[0.0; 3]; 3]; 3];
    for l in 0..3 {
        for k in 0..3 {
            for j in 0..3 {
                let d = |a: usize, b: usize| ((a == b) as u8) as f64;
                g[l][k][j] = (x[j] * d(k, l) + x[k] * d(j, l) - x[l] * d(k, j)) / rho;
            }
        }
    }
    g
}

/// b-covariant derivative D_k e_ij by central differencing of the components.
pub fn cov_de(
    x: &[f64; 3],
    fa: &dyn Fn(f64) -> f64,
    fb: &dyn Fn(f64) -> f64,
    h: f64,
) -> [[[f64; 3]; 3]; 3] {
    let mut de = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += h;
        xm[k] -= h;
        let ep = e_coord(&xp, fa, fb);
        let em = e_coord(&xm, fa, fb);
        for i in 0..3 {
            for j in 0..3 {
                de[k][i][j] = (ep[i][j] - em[i][j]) / (2.0 * h);
            }
        }
    }
    let gam = christoffel_b(x);
    let e = e_coord(x, fa, fb);
    let mut out = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut v = de[k][i][j];
                for l in 0..3 {
                    v -= gam[l][k][i] * e[l][j] + gam[l][k][j] * e[i][l];
                }
                out[k][i][j] = v;
            }
        }
    }
    out
}

/// D_m D_k e_ij by differencing the covariant derivative.
pub fn cov_d2e(
    x: &[f64; 3],
    fa: &dyn Fn(f64) -> f64,
    fb: &dyn Fn(f64) -> f64,
    h: f64,
) -> [[[[f64; 3]; 3]; 3]; 3] {
    let mut dde = [[[[0.0; 3]; 3]; 3]; 3];
    for m in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[m] += h;
        xm[m] -= h;
        let dp = cov_de(&xp, fa, fb, h);
        let dm = cov_de(&xm, fa, fb, h);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    dde[m][k][i][j] = (dp[k][i][j] - dm[k][i][j]) / (2.0 * h);
                }
            }
        }
    }
    let gam = christoffel_b(x);
    let de = cov_de(x, fa, fb, h);
    let mut out = [[[[0.0; 3]; 3]; 3]; 3];
    for m in 0..3 {
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = dde[m][k][i][j];
                    for l in 0..3 {
                        v -= gam[l][m][k] * de[l][i][j]
                            + gam[l][m][i] * de[k][l][j]
                            + gam[l][m][j] * de[k][i][l];
                    }
                    out[m][k][i][j] = v;
                }
            }
        }
    }
    out
}

/// |De|_b and |D^2 e|_b at x (all-lower-index tensors; each contraction
/// carries rho^2).
pub fn frame_norms_coord(
    x: &[f64; 3],
    fa: &dyn Fn(f64) -> f64,
    fb: &dyn Fn(f64) -> f64,
    h: f64,
) -> (f64, f64) {
    let rho = rho_of(x);
    let de = cov_de(x, fa, fb, h);
    let d2e = cov_d2e(x, fa, fb, h);
    let mut n1 = 0.0;
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                n1 += de[k][i][j] * de[k][i][j];
            }
        }
    }
    let mut n2 = 0.0;
    for m in 0..3 {
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    n2 += d2e[m][k][i][j] * d2e[m][k][i][j];
                }
            }
        }
    }
    ((n1 * rho.powi(6)).sqrt(), (n2 * rho.powi(8)).sqrt())
}

/// Surface-integral mass at s-radius `srad` by product quadrature over the
/// coordinate sphere (Gauss-Legendre in cos(theta) x uniform in phi).
pub fn mass_c2_sphere_quadrature(
    srad: f64,
    fa: &dyn Fn(f64) -> f64,
    fb: &dyn Fn(f64) -> f64,
    n_polar: usize,
    n_azimuth: usize,
) -> f64 {
    let xr = srad / ((1.0 + srad * srad).sqrt() + 1.0);
    let (gx, gw) = ahmass::numerics::gauss_legendre(n_polar);
    let mut total = 0.0;
    for (ct, w) in gx.iter().zip(&gw) {
        let st = (1.0 - ct * ct).sqrt();
        for ip in 0..n_azimuth {
            let phi = 2.0 * std::f64::consts::PI * (ip as f64 + 0.5) / n_azimuth as f64;
            let u = [st * phi.cos(), st * phi.sin(), *ct];
            let x = [xr * u[0], xr * u[1], xr * u[2]];
            let rho = rho_of(&x);
            let s = s_of(&x);
            let v0 = (1.0 + s * s).sqrt();
            // D_k V0 = rho^-2 x_k ; unit normal vector nu^i = rho u^i
            let dv: Vec<f64> = x.iter().map(|&c| c / (rho * rho)).collect();
            let nu: Vec<f64> = u.iter().map(|&c| rho * c).collect();
            let e = e_coord(&x, fa, fb);
            let de = cov_de(&x, fa, fb, 1e-6 * (1.0 - xr));
            let binv = |i: usize, j: usize| if i == j { rho * rho } else { 0.0 };
            let mut val = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        val += v0 * (binv(j, k) * nu[i] - binv(i, j) * nu[k]) * de[k][i][j];
                        val += (binv(i, j) * nu[k] - binv(j, k) * nu[i]) * e[i][j] * dv[k];
                    }
                }
            }
            total += w * (2.0 * std::f64::consts::PI / n_azimuth as f64) * val;
        }
    }
    total * srad * srad // area density s^{n-1} per unit solid angle, n = 3
}

/// Scalar curvature of an arbitrary coordinate metric by nested differencing
/// of the Christoffel symbols.
pub fn scalar_curvature_fd(gfun: &dyn Fn(&[f64; 3]) -> [[f64; 3]; 3], x: &[f64; 3], h: f64) -> f64 {
    let inv3 = |m: &[[f64; 3]; 3]| -> [[f64; 3]; 3] {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                let (c, d) = ((j + 1) % 3, (j + 2) % 3);
                out[j][i] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
            }
        }
        out
    };
    let christ = |y: &[f64; 3]| -> [[[f64; 3]; 3]; 3] {
        let gi = inv3(&gfun(y));
        let mut dg = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            let mut yp = *y;
            let mut ym = *y;
            yp[k] += h;
            ym[k] -= h;
            let gp = gfun(&yp);
            let gm = gfun(&ym);
            for i in 0..3 {
                for j in 0..3 {
                    dg[k][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
                }
            }
        }
        let mut gam = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let mut v = 0.0;
                    for d in 0..3 {
                        v += 0.5 * gi[a][d] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                    }
                    gam[a][b][c] = v;
                }
            }
        }
        gam
    };
    let gam = christ(x);
    let mut dgam = [[[[0.0; 3]; 3]; 3]; 3];
    for k in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += h;
        xm[k] -= h;
        let gp = christ(&xp);
        let gm = christ(&xm);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    dgam[k][a][b][c] = (gp[a][b][c] - gm[a][b][c]) / (2.0 * h);
                }
            }
        }
    }
    let mut ric = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = 0.0;
            for a in 0..3 {
                v += dgam[a][a][i][j] - dgam[i][a][a][j];
                for b in 0..3 {
                    v += gam[a][a][b] * gam[b][i][j] - gam[a][i][b] * gam[b][a][j];
                }
            }
            ric[i][j] = v;
        }
    }
    let gi = inv3(&gfun(x));
    let mut r = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            r += gi[i][j] * ric[i][j];
        }
    }
    r
}
