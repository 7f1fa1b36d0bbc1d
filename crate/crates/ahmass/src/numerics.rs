//! Shared numerical kernels: finite-difference weights on arbitrary nodes,
//! adaptive quadrature, banded solvers and small fitting helpers.
//!
//! Everything here is deterministic and allocation-light; the geometry
//! modules build their operators on top of these primitives.

/// Fornberg's algorithm: weights of the `m`-th derivative at `z` from the
/// nodes `x` (any spacing). Returns one weight per node. Formal order of
/// accuracy is `x.len() - m` for smooth data.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n > m, "need more than m+0 nodes for the m-th derivative");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Precomputed first/second derivative stencils on a fixed node set.
///
/// Each row uses a 6-node window (centered in the interior, one-sided at the
/// ends), so d/ds is 5th order and d2/ds2 is 4th order on smooth data. For
/// geometrically graded radial grids the stencils are built in the log
/// coordinate y = ln s and mapped back through the chain rule
///   u_s = u_y / s,   u_ss = (u_yy - u_y) / s^2,
/// which keeps the truncation error relative even for profiles like powers
/// of s whose raw derivatives blow up at the inner edge. With `even_inner`
/// the profile is treated as even across the first node (zero-slope wall),
/// the reflection treatment used by the flow solver.
pub struct Derivator {
    n: usize,
    rows1: Vec<(usize, Vec<f64>)>,
    rows2: Vec<(usize, Vec<f64>)>,
    diag: Vec<usize>,
}

const STENCIL: usize = 6;

impl Derivator {
    /// Stencils in the raw coordinate (uniform or mildly graded nodes).
    pub fn new(nodes: &[f64]) -> Self {
        Self::build(nodes, false, false)
    }

    /// Stencils through the log map (strictly positive graded nodes).
    pub fn new_log(nodes: &[f64]) -> Self {
        Self::build(nodes, true, false)
    }

    pub fn with_even_inner(nodes: &[f64]) -> Self {
        Self::build(nodes, false, true)
    }

    pub fn new_log_even_inner(nodes: &[f64]) -> Self {
        Self::build(nodes, true, true)
    }

    fn build(nodes: &[f64], log_map: bool, even_inner: bool) -> Self {
        let n = nodes.len();
        assert!(n >= STENCIL, "derivative stencils need at least 6 nodes");
        let y: Vec<f64> = if log_map {
            nodes.iter().map(|&s| s.ln()).collect()
        } else {
            nodes.to_vec()
        };
        let mut rows1 = Vec::with_capacity(n);
        let mut rows2 = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let (start, mut w1, mut w2) = Self::window_weights(&y, i, even_inner);
            // derivative weights must annihilate constants; absorb the
            // rounding residue of the sum into the diagonal, and apply the
            // stencils in diagonal-subtracted form (see `apply`) so flat
            // profiles differentiate to exactly zero in floating point
            let d = i - start;
            diag.push(d);
            let s1: f64 = w1.iter().sum();
            w1[d] -= s1;
            let s2: f64 = w2.iter().sum();
            w2[d] -= s2;
            if log_map {
                let s = nodes[i];
                let r1: Vec<f64> = w1.iter().map(|&v| v / s).collect();
                let r2: Vec<f64> = w1
                    .iter()
                    .zip(&w2)
                    .map(|(&a, &b)| (b - a) / (s * s))
                    .collect();
                rows1.push((start, r1));
                rows2.push((start, r2));
            } else {
                rows1.push((start, w1));
                rows2.push((start, w2));
            }
        }
        Derivator { n, rows1, rows2, diag }
    }

    /// 6-node window weights for the 1st and 2nd derivative at node i.
    ///
    /// With `even_inner`, the first few rows switch to the classic 3-point
    /// reflected scheme (ghost value u[-1] = u[1]): wider one-sided or
    /// mirror-folded stencils at a zero-slope wall admit spurious
    /// amplifying modes under implicit diffusion stepping, while the
    /// compact reflected rows stay dissipative.
    fn window_weights(y: &[f64], i: usize, even_inner: bool) -> (usize, Vec<f64>, Vec<f64>) {
        let n = y.len();
        let half = STENCIL / 2;
        if even_inner && i < half {
            if i == 0 {
                let xs = [2.0 * y[0] - y[1], y[0], y[1]];
                let w1 = fd_weights(y[0], &xs, 1);
                let w2 = fd_weights(y[0], &xs, 2);
                let fold = |w: &[f64]| vec![w[1], w[0] + w[2]];
                return (0, fold(&w1), fold(&w2));
            }
            let xs = &y[i - 1..i + 2];
            return (i - 1, fd_weights(y[i], xs, 1), fd_weights(y[i], xs, 2));
        }
        let start = if i < half {
            0
        } else if i + (STENCIL - half) > n {
            n - STENCIL
        } else {
            i - half
        };
        let xs = &y[start..start + STENCIL];
        (start, fd_weights(y[i], xs, 1), fd_weights(y[i], xs, 2))
    }

    // Sum w_k (u_k - u_diag): identical to the plain dot product when the
    // weights sum to zero, but exact on constant profiles.
    fn apply(rows: &[(usize, Vec<f64>)], diag: &[usize], u: &[f64]) -> Vec<f64> {
        rows.iter()
            .zip(diag)
            .map(|((start, w), &d)| {
                let base = u[start + d];
                w.iter().enumerate().map(|(k, &c)| c * (u[start + k] - base)).sum()
            })
            .collect()
    }

    pub fn d1(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n);
        Self::apply(&self.rows1, &self.diag, u)
    }

    pub fn d2(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n);
        Self::apply(&self.rows2, &self.diag, u)
    }

    /// Row of the d2/ds2 operator, as (first column, weights).
    pub fn d2_row(&self, i: usize) -> (&usize, &[f64]) {
        (&self.rows2[i].0, &self.rows2[i].1)
    }

    /// Row of the d/ds operator.
    pub fn d1_row(&self, i: usize) -> (&usize, &[f64]) {
        (&self.rows1[i].0, &self.rows1[i].1)
    }
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature, nodes generated at runtime by Newton iteration.
// ---------------------------------------------------------------------------

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-flavored initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Adaptive panel quadrature with a GL15/GL7 error estimate.
///
/// The error target is `rel_tol * max(|I|, abs_floor)` for the whole
/// interval; panels split until their share of the budget is met.
pub struct AdaptiveQuad {
    x7: Vec<f64>,
    w7: Vec<f64>,
    x15: Vec<f64>,
    w15: Vec<f64>,
}

impl Default for AdaptiveQuad {
    fn default() -> Self {
        Self::new()
    }
}

impl AdaptiveQuad {
    pub fn new() -> Self {
        let (x7, w7) = gauss_legendre(7);
        let (x15, w15) = gauss_legendre(15);
        AdaptiveQuad { x7, w7, x15, w15 }
    }

    fn panel<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut i15 = 0.0;
        for (x, w) in self.x15.iter().zip(&self.w15) {
            i15 += w * f(c + h * x);
        }
        let mut i7 = 0.0;
        for (x, w) in self.x7.iter().zip(&self.w7) {
            i7 += w * f(c + h * x);
        }
        (h * i15, (h * (i15 - i7)).abs())
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let (i0, _) = self.panel(&f, a, b);
        let scale = i0.abs().max(abs_floor);
        let mut stack = vec![(a, b, 0u32)];
        let mut total = 0.0;
        let width = (b - a).abs();
        // hard panel budget: integrands built from gridded data bottom out
        // at their discretization noise floor and must not recurse forever
        let mut panels_left = 4000i64;
        while let Some((lo, hi, depth)) = stack.pop() {
            let (val, err) = self.panel(&f, lo, hi);
            panels_left -= 1;
            let budget = rel_tol * scale * (hi - lo).abs() / width;
            if err <= budget || depth >= 40 || panels_left <= 0 {
                total += val;
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((lo, mid, depth + 1));
                stack.push((mid, hi, depth + 1));
            }
        }
        total
    }
}

// ---------------------------------------------------------------------------
// Linear solvers
// ---------------------------------------------------------------------------

/// Solve a tridiagonal system in place (Thomas algorithm).
/// `lower[i]` multiplies x[i-1] in row i, `upper[i]` multiplies x[i+1].
pub fn solve_tridiag(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut d = diag.to_vec();
    for i in 1..n {
        let m = lower[i] / d[i - 1];
        d[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= d[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / d[i];
    }
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, stored row-wise.
/// Gaussian elimination with partial pivoting (fill widens the band to
/// `kl + ku`), enough for the pentadiagonal implicit operators used here.
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    // rows[i][j] holds A[i, i - kl + j] for j in 0..kl+ku+kl+1 (pivot fill)
    rows: Vec<Vec<f64>>,
}

impl Banded {
    pub fn zero(n: usize, kl: usize, ku: usize) -> Self {
        Banded {
            n,
            kl,
            ku,
            rows: vec![vec![0.0; 2 * kl + ku + 1]; n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let off = j as isize - i as isize + self.kl as isize;
        assert!(off >= 0 && (off as usize) < self.rows[i].len(), "entry outside band");
        self.rows[i][off as usize] += v;
    }

    /// LU factorization with partial pivoting; returns a solver closure state.
    pub fn factor(mut self) -> BandedLu {
        let n = self.n;
        let kl = self.kl;
        let width = self.rows[0].len();
        let mut perm = Vec::with_capacity(n);
        let mut mults: Vec<Vec<f64>> = Vec::with_capacity(n);
        for col in 0..n {
            // pivot among rows col..=col+kl
            let last = (col + kl).min(n - 1);
            let mut piv = col;
            let mut best = Self::entry(&self.rows, kl, piv, col).abs();
            for r in col + 1..=last {
                let v = Self::entry(&self.rows, kl, r, col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            assert!(best > 0.0, "singular banded matrix");
            if piv != col {
                self.rows.swap(piv, col);
                // swapping physical rows changes their diagonal offsets
                let shift = piv as isize - col as isize;
                Self::reindex(&mut self.rows[col], shift);
                Self::reindex(&mut self.rows[piv], -shift);
            }
            perm.push(piv);
            let pivot = Self::entry(&self.rows, kl, col, col);
            let mut col_mults = Vec::with_capacity(last - col);
            for r in col + 1..=last {
                let m = Self::entry(&self.rows, kl, r, col) / pivot;
                col_mults.push(m);
                if m != 0.0 {
                    for j in col..(col + width).min(n) {
                        let v = Self::entry(&self.rows, kl, col, j);
                        if v != 0.0 {
                            let cur = Self::entry(&self.rows, kl, r, j);
                            Self::set(&mut self.rows, kl, r, j, cur - m * v);
                        }
                    }
                }
            }
            mults.push(col_mults);
        }
        BandedLu {
            n,
            kl,
            rows: self.rows,
            perm,
            mults,
        }
    }

    fn entry(rows: &[Vec<f64>], kl: usize, i: usize, j: usize) -> f64 {
        let off = j as isize - i as isize + kl as isize;
        if off < 0 || off as usize >= rows[i].len() {
            0.0
        } else {
            rows[i][off as usize]
        }
    }

    fn set(rows: &mut [Vec<f64>], kl: usize, i: usize, j: usize, v: f64) {
        let off = (j as isize - i as isize + kl as isize) as usize;
        rows[i][off] = v;
    }

    fn reindex(row: &mut [f64], shift: isize) {
        let w = row.len();
        let mut out = vec![0.0; w];
        for (k, &v) in row.iter().enumerate() {
            if v != 0.0 {
                let nk = k as isize + shift;
                assert!(nk >= 0 && (nk as usize) < w, "band overflow during pivot");
                out[nk as usize] = v;
            }
        }
        row.copy_from_slice(&out);
    }
}

pub struct BandedLu {
    n: usize,
    kl: usize,
    rows: Vec<Vec<f64>>,
    perm: Vec<usize>,
    mults: Vec<Vec<f64>>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        for col in 0..n {
            let piv = self.perm[col];
            if piv != col {
                rhs.swap(piv, col);
            }
            for (k, &m) in self.mults[col].iter().enumerate() {
                rhs[col + 1 + k] -= m * rhs[col];
            }
        }
        let width = self.rows[0].len();
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            let jmax = (i + width - self.kl - 1).min(n - 1);
            for j in i + 1..=jmax {
                acc -= Banded::entry(&self.rows, self.kl, i, j) * rhs[j];
            }
            rhs[i] = acc / Banded::entry(&self.rows, self.kl, i, i);
        }
    }
}

// ---------------------------------------------------------------------------
// Interpolation and fitting
// ---------------------------------------------------------------------------

/// Locate the interval index i with nodes[i] <= x <= nodes[i+1].
pub fn bracket(nodes: &[f64], x: f64) -> usize {
    let n = nodes.len();
    match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.clamp(1, n - 1) - 1,
    }
}

/// Piecewise linear interpolation (monotone-safe, no overshoot).
pub fn interp_linear(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let i = bracket(nodes, x);
    let t = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
    vals[i] * (1.0 - t) + vals[i + 1] * t
}

/// Windowed cubic Lagrange interpolation (4-point window around x).
pub fn interp_cubic(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    let i = bracket(nodes, x);
    let start = i.saturating_sub(1).min(n - 4);
    let xs = &nodes[start..start + 4];
    let ys = &vals[start..start + 4];
    let mut acc = 0.0;
    for k in 0..4 {
        let mut l = ys[k];
        for j in 0..4 {
            if j != k {
                l *= (x - xs[j]) / (xs[k] - xs[j]);
            }
        }
        acc += l;
    }
    acc
}

/// Least-squares slope and intercept of y against x.
pub fn linfit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Trapezoid rule over sampled (x, y) pairs.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    acc
}
