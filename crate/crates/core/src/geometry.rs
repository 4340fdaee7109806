//! Concrete closed-surface backends: the flat torus T² = [0,2π)² and the unit
//! sphere S² ⊂ R³.
//!
//! Both expose the exponential map, its local inverse, geodesic distance,
//! parallel transport along minimal geodesics, volume quadrature, and numerical
//! symmetric covariant derivatives Sym∇^ℓ obtained from one-dimensional
//! derivatives d^ℓ/dt^ℓ f(exp_p(tv)) by polarization.
//!
//! Tangent and cotangent coefficients are always stored in a deterministic
//! orthonormal frame at the base point: the global coordinate frame on the
//! torus, and a Gram–Schmidt frame against a fixed reference axis on the
//! sphere (with a fallback axis near the poles of the reference axis).

use crate::error::{Error, Result};
use rand::Rng;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Fraction of the injectivity radius inside which log/transport are trusted.
pub const CUT_LOCUS_MARGIN: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Torus,
    Sphere,
}

/// A point on one of the two backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    /// Angles in [0, 2π).
    Torus { x: f64, y: f64 },
    /// Unit direction in R³.
    Sphere { v: [f64; 3] },
}

impl Point {
    pub fn torus(x: f64, y: f64) -> Point {
        Point::Torus {
            x: wrap_angle(x),
            y: wrap_angle(y),
        }
    }

    pub fn sphere(v: [f64; 3]) -> Point {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!(n > 1e-14, "sphere point must be a nonzero direction");
        Point::Sphere {
            v: [v[0] / n, v[1] / n, v[2] / n],
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match self {
            Point::Torus { x, y } => vec![*x, *y],
            Point::Sphere { v } => v.to_vec(),
        }
    }
}

/// Tangent vector stored as two coefficients in the orthonormal frame at `base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub c: [f64; 2],
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        (self.c[0] * self.c[0] + self.c[1] * self.c[1]).sqrt()
    }
}

/// Cotangent vector; same storage convention as [`TangentVector`] since the
/// frame is orthonormal.
pub type Cotangent = TangentVector;

/// Symmetric order-ℓ covariant tensor at `base`, stored as the ℓ+1 independent
/// components A_j = A(e₁^{⊗(ℓ-j)} ⊗ e₂^{⊗j}).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    pub base: Point,
    pub order: usize,
    pub comps: Vec<f64>,
}

impl SymTensor {
    pub fn zero(base: Point, order: usize) -> SymTensor {
        SymTensor {
            base,
            order,
            comps: vec![0.0; order + 1],
        }
    }

    /// Pairing ⟨A, v^⊗ℓ⟩ with v given by frame coefficients.
    pub fn pair_power(&self, v: [f64; 2]) -> f64 {
        let l = self.order;
        let mut acc = 0.0;
        for (j, a) in self.comps.iter().enumerate() {
            acc += binomial(l, j) * a * v[0].powi((l - j) as i32) * v[1].powi(j as i32);
        }
        acc
    }

    /// Frobenius norm of the full symmetric tensor.
    pub fn norm(&self) -> f64 {
        let l = self.order;
        self.comps
            .iter()
            .enumerate()
            .map(|(j, a)| binomial(l, j) * a * a)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

fn wrap_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r < 0.0 {
        r += TAU;
    }
    // `% TAU` can return TAU itself after the add when a is a tiny negative.
    if r >= TAU {
        r -= TAU;
    }
    r
}

/// Wrap a coordinate difference into (-π, π].
fn wrap_diff(d: f64) -> f64 {
    let mut r = d % TAU;
    if r > std::f64::consts::PI {
        r -= TAU;
    } else if r <= -std::f64::consts::PI {
        r += TAU;
    }
    r
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn axpy3(y: &mut [f64; 3], alpha: f64, x: &[f64; 3]) {
    y[0] += alpha * x[0];
    y[1] += alpha * x[1];
    y[2] += alpha * x[2];
}

/// A concrete surface together with its sample mesh (for suprema) and a
/// high-accuracy quadrature grid (for integrals).
#[derive(Debug, Clone)]
pub struct Surface {
    pub kind: SurfaceKind,
    mesh: Vec<Point>,
    mesh_weights: Vec<f64>,
    quad: Vec<Point>,
    quad_weights: Vec<f64>,
    mesh_spacing: f64,
    injectivity_radius: f64,
}

impl Surface {
    /// Flat torus with side lengths 2π, uniform n×n mesh (which is also the
    /// quadrature grid: the trapezoid rule is spectrally accurate here).
    pub fn torus(n: usize) -> Surface {
        assert!(n >= 4);
        let h = TAU / n as f64;
        let w = h * h;
        let mut mesh = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                mesh.push(Point::torus(i as f64 * h, j as f64 * h));
            }
        }
        let weights = vec![w; n * n];
        Surface {
            kind: SurfaceKind::Torus,
            quad: mesh.clone(),
            quad_weights: weights.clone(),
            mesh,
            mesh_weights: weights,
            mesh_spacing: h,
            injectivity_radius: std::f64::consts::PI,
        }
    }

    /// Unit sphere with a Fibonacci mesh of `n_mesh` nodes (equal weights) and
    /// a Gauss–Legendre × uniform longitude quadrature grid exact for
    /// spherical harmonics up to degree `band_limit` products.
    pub fn sphere(n_mesh: usize, band_limit: usize) -> Surface {
        assert!(n_mesh >= 16);
        let mut mesh = Vec::with_capacity(n_mesh);
        let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
        for i in 0..n_mesh {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n_mesh as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = TAU * (i as f64 / golden) % TAU;
            mesh.push(Point::Sphere {
                v: [r * phi.cos(), r * phi.sin(), z],
            });
        }
        let mesh_weights = vec![4.0 * std::f64::consts::PI / n_mesh as f64; n_mesh];

        // n_theta Gauss nodes integrate cos-θ polynomials of degree ≤ 2n_theta-1;
        // a product of two degree-L harmonics needs 2L+1.
        let n_theta = band_limit + 2;
        let n_phi = 2 * band_limit + 2;
        let (gl_nodes, gl_w) = gauss_legendre(n_theta);
        let mut quad = Vec::with_capacity(n_theta * n_phi);
        let mut quad_weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = TAU / n_phi as f64;
        for (z, wz) in gl_nodes.iter().zip(gl_w.iter()) {
            let r = (1.0 - z * z).max(0.0).sqrt();
            for j in 0..n_phi {
                let phi = j as f64 * dphi;
                quad.push(Point::Sphere {
                    v: [r * phi.cos(), r * phi.sin(), *z],
                });
                quad_weights.push(wz * dphi);
            }
        }
        Surface {
            kind: SurfaceKind::Sphere,
            mesh,
            mesh_weights,
            quad,
            quad_weights,
            mesh_spacing: (4.0 * std::f64::consts::PI / n_mesh as f64).sqrt(),
            injectivity_radius: std::f64::consts::PI,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.injectivity_radius
    }

    /// Largest distance at which log/transport are considered well-conditioned.
    pub fn safe_radius(&self) -> f64 {
        CUT_LOCUS_MARGIN * self.injectivity_radius
    }

    pub fn volume(&self) -> f64 {
        match self.kind {
            SurfaceKind::Torus => TAU * TAU,
            SurfaceKind::Sphere => 4.0 * std::f64::consts::PI,
        }
    }

    pub fn mesh(&self) -> &[Point] {
        &self.mesh
    }

    pub fn mesh_weights(&self) -> &[f64] {
        &self.mesh_weights
    }

    pub fn quad(&self) -> &[Point] {
        &self.quad
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn mesh_spacing(&self) -> f64 {
        self.mesh_spacing
    }

    /// ∫ f dvol over the quadrature grid.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.quad
            .iter()
            .zip(self.quad_weights.iter())
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Orthonormal frame at `p`, as ambient vectors on the sphere. On the torus
    /// the frame is the global coordinate frame and this returns unit axes.
    pub fn frame(&self, p: &Point) -> ([f64; 3], [f64; 3]) {
        match p {
            Point::Torus { .. } => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            Point::Sphere { v } => {
                // Gram–Schmidt of the reference axis ẑ against v; near the
                // poles of ẑ fall back to x̂ for conditioning.
                let zhat = [0.0, 0.0, 1.0];
                let xhat = [1.0, 0.0, 0.0];
                let axis = if v[2].abs() > 1.0 - 1e-6 { xhat } else { zhat };
                let mut e1 = axis;
                let a = dot3(&axis, v);
                axpy3(&mut e1, -a, v);
                let n = norm3(&e1);
                e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
                let e2 = cross3(v, &e1);
                (e1, e2)
            }
        }
    }

    /// Ambient representation of a tangent vector (trivial on the torus).
    pub fn tangent_ambient(&self, v: &TangentVector) -> [f64; 3] {
        let (e1, e2) = self.frame(&v.base);
        [
            v.c[0] * e1[0] + v.c[1] * e2[0],
            v.c[0] * e1[1] + v.c[1] * e2[1],
            v.c[0] * e1[2] + v.c[1] * e2[2],
        ]
    }

    /// Frame coefficients of an ambient vector already tangent at `p`.
    pub fn tangent_from_ambient(&self, p: &Point, w: [f64; 3]) -> TangentVector {
        let (e1, e2) = self.frame(p);
        TangentVector {
            base: *p,
            c: [dot3(&w, &e1), dot3(&w, &e2)],
        }
    }

    pub fn exp(&self, p: &Point, v: &TangentVector) -> Point {
        match p {
            Point::Torus { x, y } => Point::torus(x + v.c[0], y + v.c[1]),
            Point::Sphere { v: pv } => {
                let w = self.tangent_ambient(v);
                let theta = norm3(&w);
                if theta < 1e-300 {
                    return *p;
                }
                let u = [w[0] / theta, w[1] / theta, w[2] / theta];
                let (c, s) = (theta.cos(), theta.sin());
                Point::Sphere {
                    v: [
                        c * pv[0] + s * u[0],
                        c * pv[1] + s * u[1],
                        c * pv[2] + s * u[2],
                    ],
                }
            }
        }
    }

    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        match (p, q) {
            (Point::Torus { x: x1, y: y1 }, Point::Torus { x: x2, y: y2 }) => {
                let dx = wrap_diff(x2 - x1);
                let dy = wrap_diff(y2 - y1);
                (dx * dx + dy * dy).sqrt()
            }
            (Point::Sphere { v: a }, Point::Sphere { v: b }) => {
                // atan2 form stays accurate near coincidence and antipodes
                let c = cross3(a, b);
                norm3(&c).atan2(dot3(a, b))
            }
            _ => panic!("mixed surface kinds"),
        }
    }

    /// Riemannian logarithm: the tangent vector at `p` with exp(p, log) = q.
    pub fn log(&self, p: &Point, q: &Point) -> Result<TangentVector> {
        let d = self.dist(p, q);
        let limit = self.safe_radius();
        if d >= limit {
            return Err(Error::CutLocus { dist: d, limit });
        }
        match (p, q) {
            (Point::Torus { x: x1, y: y1 }, Point::Torus { x: x2, y: y2 }) => Ok(TangentVector {
                base: *p,
                c: [wrap_diff(x2 - x1), wrap_diff(y2 - y1)],
            }),
            (Point::Sphere { v: a }, Point::Sphere { v: b }) => {
                if d < 1e-14 {
                    return Ok(TangentVector { base: *p, c: [0.0, 0.0] });
                }
                let ab = dot3(a, b);
                let mut dir = *b;
                axpy3(&mut dir, -ab, a);
                let n = norm3(&dir);
                dir = [d * dir[0] / n, d * dir[1] / n, d * dir[2] / n];
                Ok(self.tangent_from_ambient(p, dir))
            }
            _ => panic!("mixed surface kinds"),
        }
    }

    /// Parallel transport of `v` (at p) along the minimal geodesic to `q`.
    pub fn parallel_transport(&self, p: &Point, q: &Point, v: &TangentVector) -> Result<TangentVector> {
        let d = self.dist(p, q);
        let limit = self.safe_radius();
        if d >= limit {
            return Err(Error::CutLocus { dist: d, limit });
        }
        match self.kind {
            // Flat connection in the global frame.
            SurfaceKind::Torus => Ok(TangentVector { base: *q, c: v.c }),
            SurfaceKind::Sphere => {
                if d < 1e-14 {
                    return Ok(TangentVector { base: *q, c: v.c });
                }
                let pv = match p {
                    Point::Sphere { v } => *v,
                    _ => unreachable!(),
                };
                let lg = self.log(p, q)?;
                let theta = lg.norm();
                let ua = self.tangent_ambient(&lg); // θ·u
                let u = [ua[0] / theta, ua[1] / theta, ua[2] / theta];
                let w = self.tangent_ambient(v);
                let a = dot3(&w, &u);
                // component along the geodesic rotates in the (p,u) plane,
                // the orthogonal component is unchanged
                let (c, s) = (theta.cos(), theta.sin());
                let mut out = w;
                axpy3(&mut out, a * (c - 1.0), &u);
                axpy3(&mut out, -a * s, &pv);
                Ok(self.tangent_from_ambient(q, out))
            }
        }
    }

    /// Transport a symmetric order-ℓ tensor by transporting each slot.
    pub fn transport_sym_tensor(&self, q: &Point, t: &SymTensor) -> Result<SymTensor> {
        if self.kind == SurfaceKind::Torus {
            return Ok(SymTensor { base: *q, order: t.order, comps: t.comps.clone() });
        }
        let p = t.base;
        // columns of m: frame coefficients at q of the transported frame of p
        let e1 = self.parallel_transport(&p, q, &TangentVector { base: p, c: [1.0, 0.0] })?;
        let e2 = self.parallel_transport(&p, q, &TangentVector { base: p, c: [0.0, 1.0] })?;
        let m = [[e1.c[0], e2.c[0]], [e1.c[1], e2.c[1]]];
        let l = t.order;
        if l == 0 {
            return Ok(SymTensor { base: *q, order: 0, comps: t.comps.clone() });
        }
        // (//A)(f_{i1},…) = A(m^T f ...) with m orthogonal; expand multilinearly.
        let mut comps = vec![0.0; l + 1];
        for (j_out, comp) in comps.iter_mut().enumerate() {
            // output slot pattern: (l - j_out) ones then j_out twos; symmetry
            // makes the order irrelevant.
            let mut acc = 0.0;
            // iterate over all assignments of input indices via counts
            // contribution: product over slots of m^T row
            // A(m^T e_{a1}, …) = Σ_{b∈{1,2}^l} Π m[b_k][a_k] A_b
            // group by count of 2's in b.
            let mut assign = vec![0usize; l];
            loop {
                let mut prod = 1.0;
                let mut twos = 0;
                for (k, &b) in assign.iter().enumerate() {
                    let a = if k < l - j_out { 0 } else { 1 };
                    prod *= m[b][a];
                    twos += b;
                }
                acc += prod * t.comps[twos];
                // increment binary counter
                let mut carry = true;
                for b in assign.iter_mut() {
                    if carry {
                        if *b == 0 {
                            *b = 1;
                            carry = false;
                        } else {
                            *b = 0;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
            *comp = acc;
        }
        Ok(SymTensor { base: *q, order: l, comps })
    }

    /// d^ℓ/dt^ℓ f(exp_p(t v))|_0 by order-2 central differences with one
    /// Richardson extrapolation.
    fn directional_derivative(
        &self,
        f: &dyn Fn(&Point) -> f64,
        p: &Point,
        v: [f64; 2],
        order: usize,
        h: f64,
    ) -> f64 {
        let eval = |t: f64| {
            let tv = TangentVector { base: *p, c: [t * v[0], t * v[1]] };
            f(&self.exp(p, &tv))
        };
        let stencil = |h: f64| match order {
            0 => eval(0.0),
            1 => (eval(h) - eval(-h)) / (2.0 * h),
            2 => (eval(h) - 2.0 * eval(0.0) + eval(-h)) / (h * h),
            3 => (eval(2.0 * h) - 2.0 * eval(h) + 2.0 * eval(-h) - eval(-2.0 * h))
                / (2.0 * h * h * h),
            _ => panic!("directional derivatives implemented for order ≤ 3"),
        };
        if order == 0 {
            return stencil(h);
        }
        let d_h = stencil(h);
        let d_h2 = stencil(h / 2.0);
        (4.0 * d_h2 - d_h) / 3.0
    }

    /// Symmetric covariant derivative Sym∇^ℓ|_p f assembled by polarization:
    /// the ℓ+1 components are recovered from d^ℓ/dt^ℓ f(exp_p(t v_m)) along
    /// ℓ+1 distinct frame directions.
    pub fn sym_nabla(
        &self,
        f: &dyn Fn(&Point) -> f64,
        p: &Point,
        order: usize,
        h: f64,
    ) -> Result<SymTensor> {
        let reach = h * if order >= 3 { 2.0 } else { 1.0 };
        let limit = self.safe_radius() / (order.max(1) as f64);
        if reach >= limit || h <= 0.0 {
            return Err(Error::StepTooLarge { step: h, order, limit });
        }
        if order == 0 {
            return Ok(SymTensor { base: *p, order: 0, comps: vec![f(p)] });
        }
        let l = order;
        let m = l + 1;
        let mut mat = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for (i, row) in mat.iter_mut().enumerate() {
            let th = i as f64 * std::f64::consts::PI / m as f64;
            let v = [th.cos(), th.sin()];
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = binomial(l, j) * v[0].powi((l - j) as i32) * v[1].powi(j as i32);
            }
            rhs[i] = self.directional_derivative(f, p, v, l, h);
        }
        let comps = solve_dense(&mut mat, &mut rhs);
        Ok(SymTensor { base: *p, order: l, comps })
    }

    /// Uniformly distributed random point.
    pub fn sample_point(&self, rng: &mut impl Rng) -> Point {
        match self.kind {
            SurfaceKind::Torus => Point::torus(rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU),
            SurfaceKind::Sphere => {
                use rand_distr::StandardNormal;
                loop {
                    let v = [
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    ];
                    if norm3(&v) > 1e-8 {
                        return Point::sphere(v);
                    }
                }
            }
        }
    }

    /// Point at distance `d` from `p` in the frame direction `angle`.
    pub fn point_at(&self, p: &Point, d: f64, angle: f64) -> Point {
        let v = TangentVector {
            base: *p,
            c: [d * angle.cos(), d * angle.sin()],
        };
        self.exp(p, &v)
    }

    /// Jacobian of the exponential chart at radius r (area element factor).
    pub fn exp_chart_jacobian(&self, r: f64) -> f64 {
        match self.kind {
            SurfaceKind::Torus => 1.0,
            SurfaceKind::Sphere => {
                if r < 1e-8 {
                    1.0 - r * r / 6.0
                } else {
                    r.sin() / r
                }
            }
        }
    }
}

/// Solve a small dense linear system in place (partial pivoting).
pub(crate) fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 1e-14, "singular polarization system");
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    x
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
