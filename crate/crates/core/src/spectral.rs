//! Laplace–Beltrami eigenbasis, the spectral heat kernel p_t, its parabolic
//! short-time expansion p^N, the heat semigroup on mode coefficients, and the
//! derived kernels k_t (of K_t = ∫₀ᵗ P_s ds) and k_{2,t} (of K_t²).
//!
//! Torus modes are the real trigonometric family |k|_∞ ≤ K; sphere modes the
//! real spherical harmonics l ≤ L. Mode order is canonical and nested: a basis
//! truncated at a smaller K is always a prefix of a larger one, so noise
//! realizations refine consistently when the truncation grows.

use crate::geometry::{Point, Surface, SurfaceKind};
use rayon::prelude::*;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeId {
    TorusConst,
    TorusCos { k1: i32, k2: i32 },
    TorusSin { k1: i32, k2: i32 },
    /// Real form: m = 0 zonal, m > 0 the cos(mφ) form, m < 0 the sin(|m|φ) form.
    Sphere { l: usize, m: i32 },
}

#[derive(Debug, Clone, Copy)]
pub struct Mode {
    pub eigenvalue: f64,
    pub id: ModeId,
}

#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub surface: Surface,
    pub truncation: usize,
    pub modes: Vec<Mode>,
}

impl EigenBasis {
    /// Torus basis |k|_∞ ≤ k_max on an n×n grid; n is chosen ≥ 4·k_max so that
    /// quadratic nonlinearities stay alias-free.
    pub fn torus(k_max: usize, min_grid: usize) -> EigenBasis {
        let n = min_grid.max(4 * k_max).max(16);
        let surface = Surface::torus(n);
        let k = k_max as i32;
        let mut modes = Vec::new();
        modes.push(Mode { eigenvalue: 0.0, id: ModeId::TorusConst });
        // half lattice: k1 > 0, or k1 = 0 and k2 > 0
        let mut half: Vec<(i32, i32)> = Vec::new();
        for k1 in 0..=k {
            for k2 in -k..=k {
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                half.push((k1, k2));
            }
        }
        // nested order: by sup-norm shell, then lexicographic
        half.sort_by_key(|&(a, b)| (a.abs().max(b.abs()), a, b));
        for (k1, k2) in half {
            let lam = (k1 * k1 + k2 * k2) as f64;
            modes.push(Mode { eigenvalue: lam, id: ModeId::TorusCos { k1, k2 } });
            modes.push(Mode { eigenvalue: lam, id: ModeId::TorusSin { k1, k2 } });
        }
        EigenBasis { surface, truncation: k_max, modes }
    }

    /// Sphere basis l ≤ l_max with a Fibonacci mesh of `n_mesh` nodes. The
    /// quadrature grid is sized for degree-2l products.
    pub fn sphere(l_max: usize, n_mesh: usize) -> EigenBasis {
        let surface = Surface::sphere(n_mesh.max(256), 2 * l_max + 2);
        let mut modes = Vec::new();
        for l in 0..=l_max {
            let lam = (l * (l + 1)) as f64;
            modes.push(Mode { eigenvalue: lam, id: ModeId::Sphere { l, m: 0 } });
            for m in 1..=l as i32 {
                modes.push(Mode { eigenvalue: lam, id: ModeId::Sphere { l, m } });
                modes.push(Mode { eigenvalue: lam, id: ModeId::Sphere { l, m: -m } });
            }
        }
        EigenBasis { surface, truncation: l_max, modes }
    }

    pub fn new(kind: SurfaceKind, truncation: usize, n_mesh: usize) -> EigenBasis {
        match kind {
            SurfaceKind::Torus => EigenBasis::torus(truncation, n_mesh),
            SurfaceKind::Sphere => EigenBasis::sphere(truncation, n_mesh),
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalue_max(&self) -> f64 {
        self.modes.iter().map(|m| m.eigenvalue).fold(0.0, f64::max)
    }

    /// Spectral truncation destroys scales below t_min = 5/λ_max.
    pub fn t_min(&self) -> f64 {
        5.0 / self.eigenvalue_max()
    }

    pub fn time_resolved(&self, t: f64) -> bool {
        t >= self.t_min()
    }

    /// Evaluate every mode at `p` into `out` (length = number of modes).
    pub fn eval_all(&self, p: &Point, out: &mut [f64]) {
        assert_eq!(out.len(), self.modes.len());
        match self.surface.kind {
            SurfaceKind::Torus => {
                let (x, y) = match p {
                    Point::Torus { x, y } => (*x, *y),
                    _ => panic!("point kind mismatch"),
                };
                let k = self.truncation;
                let (cx, sx) = trig_table(x, k);
                let (cy, sy) = trig_table(y, k);
                let norm_const = 1.0 / (crate::geometry::TAU);
                let norm = std::f64::consts::SQRT_2 / crate::geometry::TAU;
                for (mode, o) in self.modes.iter().zip(out.iter_mut()) {
                    *o = match mode.id {
                        ModeId::TorusConst => norm_const,
                        ModeId::TorusCos { k1, k2 } => {
                            let (c2, s2) = signed_trig(&cy, &sy, k2);
                            norm * (cx[k1 as usize] * c2 - sx[k1 as usize] * s2)
                        }
                        ModeId::TorusSin { k1, k2 } => {
                            let (c2, s2) = signed_trig(&cy, &sy, k2);
                            norm * (sx[k1 as usize] * c2 + cx[k1 as usize] * s2)
                        }
                        _ => unreachable!(),
                    };
                }
            }
            SurfaceKind::Sphere => {
                let v = match p {
                    Point::Sphere { v } => v,
                    _ => panic!("point kind mismatch"),
                };
                let l_max = self.truncation;
                let ct = v[2].clamp(-1.0, 1.0);
                let phi = v[1].atan2(v[0]);
                let alp = normalized_alp_table(l_max, ct);
                let (cphi, sphi) = trig_table(phi, l_max);
                let sqrt2 = std::f64::consts::SQRT_2;
                for (mode, o) in self.modes.iter().zip(out.iter_mut()) {
                    *o = match mode.id {
                        ModeId::Sphere { l, m } => {
                            let ma = m.unsigned_abs() as usize;
                            let p = alp[alp_index(l, ma)];
                            if m == 0 {
                                p
                            } else if m > 0 {
                                sqrt2 * p * cphi[ma]
                            } else {
                                sqrt2 * p * sphi[ma]
                            }
                        }
                        _ => unreachable!(),
                    };
                }
            }
        }
    }

    pub fn eval_vec(&self, p: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.modes.len()];
        self.eval_all(p, &mut out);
        out
    }

    /// Σ_k c_k e_k(p).
    pub fn synth(&self, coeffs: &[f64], p: &Point) -> f64 {
        let vals = self.eval_vec(p);
        coeffs.iter().zip(vals.iter()).map(|(c, e)| c * e).sum()
    }

    /// Synthesize a coefficient field on a set of points (parallel, but output
    /// order is fixed so results are deterministic).
    pub fn synth_nodal(&self, coeffs: &[f64], points: &[Point]) -> Vec<f64> {
        points
            .par_iter()
            .map(|p| self.synth(coeffs, p))
            .collect()
    }

    /// L² projection of nodal values given on the quadrature grid.
    pub fn project_quad(&self, nodal: &[f64]) -> Vec<f64> {
        let quad = self.surface.quad();
        let w = self.surface.quad_weights();
        assert_eq!(nodal.len(), quad.len());
        let chunks: Vec<Vec<f64>> = quad
            .par_iter()
            .zip(nodal.par_iter().zip(w.par_iter()))
            .fold(
                || vec![0.0; self.modes.len()],
                |mut acc, (p, (f, w))| {
                    let vals = self.eval_vec(p);
                    for (a, e) in acc.iter_mut().zip(vals.iter()) {
                        *a += w * f * e;
                    }
                    acc
                },
            )
            .collect();
        let mut out = vec![0.0; self.modes.len()];
        for c in chunks {
            for (o, v) in out.iter_mut().zip(c.iter()) {
                *o += v;
            }
        }
        out
    }

    /// Heat semigroup on mode coefficients: multiply by e^{-λ_k t}.
    pub fn apply_pt(&self, coeffs: &[f64], t: f64) -> Vec<f64> {
        assert!(t >= 0.0);
        self.modes
            .iter()
            .zip(coeffs.iter())
            .map(|(m, c)| c * (-m.eigenvalue * t).exp())
            .collect()
    }

    /// Per-mode integrals I_k(t) = ∫₀ᵗ e^{-λ_k s} ds.
    pub fn mode_integrals(&self, t: f64) -> Vec<f64> {
        assert!(t >= 0.0);
        self.modes.iter().map(|m| mode_integral(m.eigenvalue, t)).collect()
    }

    /// Truncated heat kernel p_t(p,q) via closed mode sums (separable product
    /// on the torus, Legendre addition theorem on the sphere).
    pub fn heat_kernel(&self, t: f64, p: &Point, q: &Point) -> f64 {
        assert!(t > 0.0);
        match self.surface.kind {
            SurfaceKind::Torus => {
                let (dx, dy) = torus_delta(p, q);
                let k = self.truncation;
                let s1 = theta_sum(dx, t, k);
                let s2 = theta_sum(dy, t, k);
                s1 * s2 / (crate::geometry::TAU * crate::geometry::TAU)
            }
            SurfaceKind::Sphere => {
                let ct = sphere_cos_angle(p, q);
                let mut acc = 0.0;
                let mut p0 = 1.0;
                let mut p1 = ct;
                for l in 0..=self.truncation {
                    let pl = match l {
                        0 => 1.0,
                        1 => ct,
                        _ => {
                            let lf = l as f64;
                            let p2 = ((2.0 * lf - 1.0) * ct * p1 - (lf - 1.0) * p0) / lf;
                            p0 = p1;
                            p1 = p2;
                            p2
                        }
                    };
                    let lam = (l * (l + 1)) as f64;
                    acc += (2.0 * l as f64 + 1.0) * (-lam * t).exp() * pl;
                }
                acc / FOUR_PI
            }
        }
    }

    /// Kernel of K_t = ∫₀ᵗ P_s ds at truncation.
    pub fn kt_kernel(&self, t: f64, p: &Point, q: &Point) -> f64 {
        self.radial_mode_sum(p, q, |lam| mode_integral(lam, t))
    }

    /// Increment k_{2,t}(p,p) + k_{2,t}(q,q) - 2 k_{2,t}(p,q) of the kernel of
    /// K_t² (per-mode weight I_k(t)²). Nonnegative: it is ‖K_t(δ_p - δ_q)‖².
    pub fn k2t_increment(&self, t: f64, p: &Point, q: &Point) -> f64 {
        assert!(t > 0.0);
        match self.surface.kind {
            SurfaceKind::Torus => {
                let (dx, dy) = torus_delta(p, q);
                let k = self.truncation as i32;
                let mut acc = 0.0;
                for k1 in -k..=k {
                    for k2 in -k..=k {
                        if k1 == 0 && k2 == 0 {
                            continue;
                        }
                        let lam = (k1 * k1 + k2 * k2) as f64;
                        let i = mode_integral(lam, t);
                        let c = (k1 as f64 * dx + k2 as f64 * dy).cos();
                        acc += i * i * (1.0 - c);
                    }
                }
                2.0 * acc / (crate::geometry::TAU * crate::geometry::TAU)
            }
            SurfaceKind::Sphere => {
                let ct = sphere_cos_angle(p, q);
                let mut acc = 0.0;
                let mut p0 = 1.0;
                let mut p1 = ct;
                for l in 1..=self.truncation {
                    let pl = if l == 1 {
                        ct
                    } else {
                        let lf = l as f64;
                        let p2 = ((2.0 * lf - 1.0) * ct * p1 - (lf - 1.0) * p0) / lf;
                        p0 = p1;
                        p1 = p2;
                        p2
                    };
                    let lam = (l * (l + 1)) as f64;
                    let i = mode_integral(lam, t);
                    acc += i * i * (2.0 * l as f64 + 1.0) * (1.0 - pl);
                }
                acc / (2.0 * std::f64::consts::PI)
            }
        }
    }

    fn radial_mode_sum(&self, p: &Point, q: &Point, weight: impl Fn(f64) -> f64) -> f64 {
        match self.surface.kind {
            SurfaceKind::Torus => {
                let (dx, dy) = torus_delta(p, q);
                let k = self.truncation as i32;
                let mut acc = 0.0;
                for k1 in -k..=k {
                    for k2 in -k..=k {
                        let lam = (k1 * k1 + k2 * k2) as f64;
                        acc += weight(lam) * (k1 as f64 * dx + k2 as f64 * dy).cos();
                    }
                }
                acc / (crate::geometry::TAU * crate::geometry::TAU)
            }
            SurfaceKind::Sphere => {
                let ct = sphere_cos_angle(p, q);
                let mut acc = 0.0;
                let mut p0 = 1.0;
                let mut p1 = ct;
                for l in 0..=self.truncation {
                    let pl = match l {
                        0 => 1.0,
                        1 => ct,
                        _ => {
                            let lf = l as f64;
                            let p2 = ((2.0 * lf - 1.0) * ct * p1 - (lf - 1.0) * p0) / lf;
                            p0 = p1;
                            p1 = p2;
                            p2
                        }
                    };
                    let lam = (l * (l + 1)) as f64;
                    acc += weight(lam) * (2.0 * l as f64 + 1.0) * pl;
                }
                acc / FOUR_PI
            }
        }
    }
}

/// ∫₀ᵗ e^{-λ s} ds, stable for small λt.
pub fn mode_integral(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        t
    } else {
        -(-lambda * t).exp_m1() / lambda
    }
}

fn torus_delta(p: &Point, q: &Point) -> (f64, f64) {
    match (p, q) {
        (Point::Torus { x: x1, y: y1 }, Point::Torus { x: x2, y: y2 }) => (x1 - x2, y1 - y2),
        _ => panic!("point kind mismatch"),
    }
}

fn sphere_cos_angle(p: &Point, q: &Point) -> f64 {
    match (p, q) {
        (Point::Sphere { v: a }, Point::Sphere { v: b }) => {
            (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
        }
        _ => panic!("point kind mismatch"),
    }
}

/// 1 + 2 Σ_{k=1}^K e^{-k²t} cos(kd)
fn theta_sum(d: f64, t: f64, k_max: usize) -> f64 {
    let mut acc = 1.0;
    let (c, s) = (d.cos(), d.sin());
    let mut ck = 1.0;
    let mut sk = 0.0;
    for k in 1..=k_max {
        let cn = ck * c - sk * s;
        let sn = sk * c + ck * s;
        ck = cn;
        sk = sn;
        acc += 2.0 * (-((k * k) as f64) * t).exp() * ck;
    }
    acc
}

/// cos(k a), sin(k a) for k = 0..=k_max by angle-addition recurrence.
fn trig_table(a: f64, k_max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut c = Vec::with_capacity(k_max + 1);
    let mut s = Vec::with_capacity(k_max + 1);
    c.push(1.0);
    s.push(0.0);
    let (c1, s1) = (a.cos(), a.sin());
    for k in 1..=k_max {
        c.push(c[k - 1] * c1 - s[k - 1] * s1);
        s.push(s[k - 1] * c1 + c[k - 1] * s1);
    }
    (c, s)
}

fn signed_trig(c: &[f64], s: &[f64], k: i32) -> (f64, f64) {
    let a = k.unsigned_abs() as usize;
    if k >= 0 {
        (c[a], s[a])
    } else {
        (c[a], -s[a])
    }
}

fn alp_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized associated Legendre values p_lm(x) for 0 ≤ m ≤ l ≤ l_max,
/// normalized so that the real spherical harmonics built from them are
/// orthonormal on the unit sphere.
fn normalized_alp_table(l_max: usize, x: f64) -> Vec<f64> {
    let n = (l_max + 1) * (l_max + 2) / 2;
    let mut p = vec![0.0; n];
    let sx = (1.0 - x * x).max(0.0).sqrt();
    p[alp_index(0, 0)] = (1.0 / FOUR_PI).sqrt();
    if l_max == 0 {
        return p;
    }
    // diagonal p_mm and first subdiagonal p_{m+1,m}
    for m in 1..=l_max {
        let prev = p[alp_index(m - 1, m - 1)];
        p[alp_index(m, m)] = -((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt() * sx * prev;
    }
    for m in 0..l_max {
        let pmm = p[alp_index(m, m)];
        p[alp_index(m + 1, m)] = x * (2.0 * m as f64 + 3.0).sqrt() * pmm;
    }
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[alp_index(l, m)] =
                a * (x * p[alp_index(l - 1, m)] - b * p[alp_index(l - 2, m)]);
        }
    }
    p
}

/// Short-time expansion p^N(t,p,q) = t^{-d/2} e^{-d(p,q)²/4t} Σ_{i≤N} tⁱ Φ_i(p,q)
/// with the Φ_i compactly supported in d(p,q) < δ/4.
///
/// On the torus the nearest-image Gaussian gives Φ₀ = 1/4π and Φ_i = 0 beyond;
/// on the sphere Φ₀ = (θ/sinθ)^{1/2}/4π and Φ₁ is calibrated against the
/// spectral kernel (the expansion functions exist abstractly; their closed
/// forms are not part of the construction).
#[derive(Debug, Clone)]
pub struct HeatKernelAsym {
    pub order: usize,
    pub kind: SurfaceKind,
    pub cutoff: f64,
    /// Coefficients of Φ₁/Φ₀ = c₀ + c₁θ² + c₂θ⁴ on the sphere.
    pub phi1_over_phi0: Option<[f64; 3]>,
}

impl HeatKernelAsym {
    pub fn new(kind: SurfaceKind, order: usize, injectivity_radius: f64) -> HeatKernelAsym {
        HeatKernelAsym {
            order,
            kind,
            cutoff: injectivity_radius / 4.0,
            phi1_over_phi0: None,
        }
    }

    /// Least-squares calibration of Φ₁ on the sphere against the spectral
    /// kernel over a (t,θ) grid inside the plateau of the cutoff.
    pub fn calibrate_sphere_phi1(basis: &EigenBasis, order: usize) -> HeatKernelAsym {
        assert_eq!(basis.surface.kind, SurfaceKind::Sphere);
        let delta = basis.surface.injectivity_radius();
        let mut asym = HeatKernelAsym::new(SurfaceKind::Sphere, order, delta);
        if order == 0 {
            return asym;
        }
        let p = Point::sphere([0.0, 0.0, 1.0]);
        let t_grid = [0.02, 0.03, 0.05, 0.08];
        let n_theta = 24;
        // model: (p_spec - p⁰) e^{θ²/4t} = Φ₀(θ)(c₀ + c₁θ² + c₂θ⁴) + t·c₃
        let mut ata = vec![vec![0.0; 4]; 4];
        let mut atb = vec![0.0; 4];
        for &t in &t_grid {
            for i in 0..n_theta {
                let theta = (i as f64 + 0.5) / n_theta as f64 * (delta / 8.0);
                let q = basis.surface.point_at(&p, theta, 0.0);
                let spec = basis.heat_kernel(t, &p, &q);
                let zeroth = (1.0 / t) * (-theta * theta / (4.0 * t)).exp() * phi0_sphere(theta);
                let y = (spec - zeroth) * (theta * theta / (4.0 * t)).exp();
                let phi0 = phi0_sphere(theta);
                let row = [phi0, phi0 * theta * theta, phi0 * theta.powi(4), t];
                for a in 0..4 {
                    for b in 0..4 {
                        ata[a][b] += row[a] * row[b];
                    }
                    atb[a] += row[a] * y;
                }
            }
        }
        let sol = crate::geometry::solve_dense(&mut ata, &mut atb);
        asym.phi1_over_phi0 = Some([sol[0], sol[1], sol[2]]);
        asym
    }

    pub fn eval(&self, t: f64, dist: f64) -> f64 {
        assert!(t > 0.0);
        if dist >= self.cutoff {
            return 0.0;
        }
        let chi = self.taper(dist);
        if chi == 0.0 {
            return 0.0;
        }
        let phi0 = match self.kind {
            SurfaceKind::Torus => 1.0 / FOUR_PI,
            SurfaceKind::Sphere => phi0_sphere(dist),
        };
        let mut series = phi0;
        if self.order >= 1 {
            if let Some(c) = self.phi1_over_phi0 {
                let r = c[0] + c[1] * dist * dist + c[2] * dist.powi(4);
                series += t * phi0 * r;
            }
            // torus Φ₁ ≡ 0: image corrections fall below every power of t
        }
        (1.0 / t) * (-dist * dist / (4.0 * t)).exp() * series * chi
    }

    /// Smooth cutoff: ≡1 below cutoff/2, ≡0 above cutoff.
    fn taper(&self, d: f64) -> f64 {
        let half = self.cutoff / 2.0;
        if d <= half {
            1.0
        } else if d >= self.cutoff {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (d - half) / half).cos())
        }
    }
}

fn phi0_sphere(theta: f64) -> f64 {
    let ratio = if theta < 1e-8 {
        1.0 + theta * theta / 6.0
    } else {
        theta / theta.sin()
    };
    ratio.sqrt() / FOUR_PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn torus_constant_mode_survives_large_time() {
        let basis = EigenBasis::torus(8, 32);
        let p = Point::torus(1.0, 2.0);
        let q = Point::torus(4.0, 0.3);
        let v = basis.heat_kernel(50.0, &p, &q);
        assert_abs_diff_eq!(v, 1.0 / (FOUR_PI * std::f64::consts::PI), epsilon = 1e-9);
    }

    #[test]
    fn heat_kernel_mass_one() {
        let basis = EigenBasis::torus(16, 64);
        let p = Point::torus(0.4, 5.0);
        let mass = basis.surface.integrate(|q| basis.heat_kernel(0.1, &p, q));
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);

        let sb = EigenBasis::sphere(16, 512);
        let sp = Point::sphere([0.3, -0.4, 0.87]);
        let mass = sb.surface.integrate(|q| sb.heat_kernel(0.1, &sp, q));
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn heat_kernel_symmetry() {
        let basis = EigenBasis::sphere(12, 256);
        let p = Point::sphere([1.0, 0.2, 0.1]);
        let q = Point::sphere([-0.2, 0.9, 0.4]);
        let a = basis.heat_kernel(0.3, &p, &q);
        let b = basis.heat_kernel(0.3, &q, &p);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn semigroup_property_on_modes() {
        let basis = EigenBasis::torus(6, 24);
        let mut coeffs = vec![0.0; basis.len()];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = (i as f64 * 0.7).sin();
        }
        let a = basis.apply_pt(&basis.apply_pt(&coeffs, 0.05), 0.2);
        let b = basis.apply_pt(&coeffs, 0.25);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        // t = 0 is the identity
        let id = basis.apply_pt(&coeffs, 0.0);
        assert_eq!(id, coeffs);
    }

    #[test]
    fn mode_integral_closed_form() {
        assert_abs_diff_eq!(mode_integral(1.0, 1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(mode_integral(0.0, 0.7), 0.7);
        let basis = EigenBasis::torus(4, 16);
        let zeros = basis.mode_integrals(0.0);
        assert!(zeros.iter().all(|&x| x == 0.0));
        // monotone in t
        let a = basis.mode_integrals(0.2);
        let b = basis.mode_integrals(0.4);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x <= y));
    }

    #[test]
    fn discrete_orthonormality_on_quadrature_grid() {
        let basis = EigenBasis::sphere(8, 256);
        let quad = basis.surface.quad();
        let w = basis.surface.quad_weights();
        let n = basis.len();
        // Gram matrix of a random subset of modes
        let idx = [0usize, 1, 5, 12, n - 1, n / 2];
        let evals: Vec<Vec<f64>> = quad.iter().map(|p| basis.eval_vec(p)).collect();
        for &i in &idx {
            for &j in &idx {
                let g: f64 = evals
                    .iter()
                    .zip(w.iter())
                    .map(|(e, w)| w * e[i] * e[j])
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g, expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn torus_orthonormality() {
        let basis = EigenBasis::torus(5, 24);
        let quad = basis.surface.quad();
        let w = basis.surface.quad_weights();
        let evals: Vec<Vec<f64>> = quad.iter().map(|p| basis.eval_vec(p)).collect();
        for i in [0usize, 1, 7, 20] {
            for j in [0usize, 1, 7, 20] {
                let g: f64 = evals
                    .iter()
                    .zip(w.iter())
                    .map(|(e, w)| w * e[i] * e[j])
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn lowest_mode_is_inverse_sqrt_volume() {
        let tb = EigenBasis::torus(4, 16);
        let e0 = tb.eval_vec(&Point::torus(1.0, 2.0))[0];
        assert_abs_diff_eq!(e0, 1.0 / tb.surface.volume().sqrt(), epsilon = 1e-14);
        let sb = EigenBasis::sphere(4, 256);
        let s0 = sb.eval_vec(&Point::sphere([0.1, 0.9, 0.4]))[0];
        assert_abs_diff_eq!(s0, 1.0 / sb.surface.volume().sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn nested_truncations_share_mode_order() {
        let small = EigenBasis::torus(4, 64);
        let large = EigenBasis::torus(8, 64);
        for (a, b) in small.modes.iter().zip(large.modes.iter()) {
            assert_eq!(a.id, b.id);
        }
        let ssmall = EigenBasis::sphere(4, 256);
        let slarge = EigenBasis::sphere(8, 256);
        for (a, b) in ssmall.modes.iter().zip(slarge.modes.iter()) {
            assert_eq!(a.id, b.id);
        }
    }

    #[test]
    fn asym_cutoff_support() {
        let asym = HeatKernelAsym::new(SurfaceKind::Sphere, 0, std::f64::consts::PI);
        assert_eq!(asym.eval(0.01, std::f64::consts::PI / 4.0), 0.0);
        assert!(asym.eval(0.01, 0.05) > 0.0);
    }

    #[test]
    fn k2t_increment_nonneg_and_zero_at_coincidence() {
        let basis = EigenBasis::torus(8, 32);
        let p = Point::torus(0.2, 1.0);
        assert_eq!(basis.k2t_increment(0.1, &p, &p), 0.0);
        let q = Point::torus(0.5, 1.3);
        assert!(basis.k2t_increment(0.1, &p, &q) > 0.0);
    }
}
