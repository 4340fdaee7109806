//! Independent oracles for the surface backends: a geodesic ODE integrator
//! for the sphere exponential, a lattice-shift search for torus distances,
//! composed transports for holonomy, and property tests for the exp/log/
//! transport contracts.

use pamlab::geometry::{Point, Surface, SurfaceKind, TangentVector, TAU};
use proptest::prelude::*;

/// RK4 on the ambient geodesic equation γ'' = -|γ'|² γ of the unit sphere.
fn sphere_geodesic_rk4(p: [f64; 3], v: [f64; 3], steps: usize) -> [f64; 3] {
    let mut x = p;
    let mut u = v;
    let h = 1.0 / steps as f64;
    let acc = |x: [f64; 3], u: [f64; 3]| {
        let s = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        [-s * x[0], -s * x[1], -s * x[2]]
    };
    for _ in 0..steps {
        let k1x = u;
        let k1u = acc(x, u);
        let mid = |a: [f64; 3], b: [f64; 3], c: f64| {
            [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]]
        };
        let k2x = mid(u, k1u, h / 2.0);
        let k2u = acc(mid(x, k1x, h / 2.0), mid(u, k1u, h / 2.0));
        let k3x = mid(u, k2u, h / 2.0);
        let k3u = acc(mid(x, k2x, h / 2.0), mid(u, k2u, h / 2.0));
        let k4x = mid(u, k3u, h);
        let k4u = acc(mid(x, k3x, h), mid(u, k3u, h));
        for i in 0..3 {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            u[i] += h / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
        }
    }
    x
}

#[test]
fn sphere_exp_matches_geodesic_integrator() {
    let s = Surface::sphere(64, 4);
    let cases = [
        ([1.0, 0.0, 0.0], [0.0, std::f64::consts::FRAC_PI_2, 0.0]),
        ([0.0, 0.6, 0.8], [0.3, -0.4, 0.3]),
        ([0.577, 0.577, 0.578], [-0.9, 0.4, 0.5]),
    ];
    for (pv, mut w) in cases {
        let p = Point::sphere(pv);
        // project w onto the tangent plane so the ODE initial condition is valid
        let pc = match p {
            Point::Sphere { v } => v,
            _ => unreachable!(),
        };
        let dot = w[0] * pc[0] + w[1] * pc[1] + w[2] * pc[2];
        for i in 0..3 {
            w[i] -= dot * pc[i];
        }
        let v = s.tangent_from_ambient(&p, w);
        let got = s.exp(&p, &v);
        let expect = sphere_geodesic_rk4(pc, w, 400);
        let gc = match got {
            Point::Sphere { v } => v,
            _ => unreachable!(),
        };
        for i in 0..3 {
            assert!((gc[i] - expect[i]).abs() < 1e-8, "component {i}: {} vs {}", gc[i], expect[i]);
        }
    }
}

#[test]
fn torus_log_and_dist_match_minimal_lift_search() {
    let s = Surface::torus(16);
    let cases = [
        ((0.0, 0.0), (0.3, 6.0)),
        ((1.0, 2.0), (5.9, 0.3)),
        ((3.1, 3.1), (1.9, 2.0)),
    ];
    for ((px, py), (qx, qy)) in cases {
        let p = Point::torus(px, py);
        let q = Point::torus(qx, qy);
        // search over lattice shifts
        let mut best = f64::INFINITY;
        let mut best_v = [0.0; 2];
        for mx in -2i32..=2 {
            for my in -2i32..=2 {
                let dx = qx - px + mx as f64 * TAU;
                let dy = qy - py + my as f64 * TAU;
                let d = (dx * dx + dy * dy).sqrt();
                if d < best {
                    best = d;
                    best_v = [dx, dy];
                }
            }
        }
        assert!((s.dist(&p, &q) - best).abs() < 1e-12);
        let v = s.log(&p, &q).unwrap();
        assert!((v.c[0] - best_v[0]).abs() < 1e-12);
        assert!((v.c[1] - best_v[1]).abs() < 1e-12);
    }
    // known value: log((0,0) → (0.3, 6.0)) = (0.3, -0.28319)
    let v = s
        .log(&Point::torus(0.0, 0.0), &Point::torus(0.3, 6.0))
        .unwrap();
    assert!((v.c[0] - 0.3).abs() < 1e-10);
    assert!((v.c[1] - (6.0 - TAU)).abs() < 1e-12);
    assert!((v.c[1] + 0.28319).abs() < 1e-4);
}

#[test]
fn sphere_holonomy_around_octant_triangle() {
    // transport around the right-angle triangle (100)→(010)→(001)→(100):
    // net rotation by the enclosed area π/2
    let s = Surface::sphere(64, 4);
    let a = Point::sphere([1.0, 0.0, 0.0]);
    let b = Point::sphere([0.0, 1.0, 0.0]);
    let c = Point::sphere([0.0, 0.0, 1.0]);
    let v0 = TangentVector { base: a, c: [0.37, 0.92] };
    let v1 = s.parallel_transport(&a, &b, &v0).unwrap();
    let v2 = s.parallel_transport(&b, &c, &v1).unwrap();
    let v3 = s.parallel_transport(&c, &a, &v2).unwrap();
    // compare against the π/2 rotation of v0 in the frame at a
    let angle0 = v0.c[1].atan2(v0.c[0]);
    let angle3 = v3.c[1].atan2(v3.c[0]);
    let mut rot = angle3 - angle0;
    while rot > std::f64::consts::PI {
        rot -= TAU;
    }
    while rot <= -std::f64::consts::PI {
        rot += TAU;
    }
    assert!(
        (rot.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-10,
        "holonomy angle {rot}"
    );
    assert!((v3.norm() - v0.norm()).abs() < 1e-12);
}

#[test]
fn sym_nabla_matches_analytic_derivatives_on_torus() {
    let s = Surface::torus(16);
    let f = |q: &Point| match q {
        Point::Torus { x, y } => (x + 0.5 * y).sin() + 0.25 * (2.0 * x).cos(),
        _ => unreachable!(),
    };
    let p = Point::torus(0.7, 1.9);
    let (x, y) = (0.7_f64, 1.9_f64);
    let h = 1e-3 * s.injectivity_radius();
    // first order
    let g1 = s.sym_nabla(&f, &p, 1, h).unwrap();
    let dx = (x + 0.5 * y).cos() - 0.5 * (2.0 * x).sin();
    let dy = 0.5 * (x + 0.5 * y).cos();
    assert!((g1.comps[0] - dx).abs() < 1e-9);
    assert!((g1.comps[1] - dy).abs() < 1e-9);
    // second order
    let g2 = s.sym_nabla(&f, &p, 2, h).unwrap();
    let dxx = -(x + 0.5 * y).sin() - (2.0 * x).cos();
    let dxy = -0.5 * (x + 0.5 * y).sin();
    let dyy = -0.25 * (x + 0.5 * y).sin();
    assert!((g2.comps[0] - dxx).abs() < 1e-7);
    assert!((g2.comps[1] - dxy).abs() < 1e-7);
    assert!((g2.comps[2] - dyy).abs() < 1e-7);
    // third order
    let g3 = s.sym_nabla(&f, &p, 3, h).unwrap();
    let dxxx = -(x + 0.5 * y).cos() + 2.0 * (2.0 * x).sin();
    assert!((g3.comps[0] - dxxx).abs() < 1e-5, "{} vs {dxxx}", g3.comps[0]);
}

fn surfaces() -> Vec<Surface> {
    vec![Surface::torus(16), Surface::sphere(128, 4)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_log_inversion(ax in 0.0f64..TAU, ay in 0.0f64..TAU, cx in -0.7f64..0.7, cy in -0.7f64..0.7) {
        for s in surfaces() {
            let p = match s.kind {
                SurfaceKind::Torus => Point::torus(ax, ay),
                SurfaceKind::Sphere => Point::sphere([ax.cos()*ay.sin(), ax.sin()*ay.sin(), ay.cos().abs().max(1e-3)]),
            };
            let v = TangentVector { base: p, c: [cx, cy] };
            prop_assume!(v.norm() < s.injectivity_radius() / 2.0 && v.norm() > 1e-6);
            let q = s.exp(&p, &v);
            let w = s.log(&p, &q).unwrap();
            prop_assert!((w.c[0]-v.c[0]).abs() < 1e-9 && (w.c[1]-v.c[1]).abs() < 1e-9);
            // Gauss lemma proxy: radial distance equals the tangent norm
            prop_assert!((s.dist(&p, &q) - v.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn triangle_inequality(seed in 0u64..5000) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for s in surfaces() {
            let a = s.sample_point(&mut rng);
            let b = s.sample_point(&mut rng);
            let c = s.sample_point(&mut rng);
            prop_assert!(s.dist(&a, &c) <= s.dist(&a, &b) + s.dist(&b, &c) + 1e-9);
            prop_assert!((s.dist(&a, &b) - s.dist(&b, &a)).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_preserves_inner_products(seed in 0u64..5000, cx in -2.0f64..2.0, cy in -2.0f64..2.0) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = Surface::sphere(64, 4);
        let p = s.sample_point(&mut rng);
        let q = s.sample_point(&mut rng);
        prop_assume!(s.dist(&p, &q) < s.safe_radius());
        let v = TangentVector { base: p, c: [cx, cy] };
        let w = TangentVector { base: p, c: [cy, -cx + 0.3] };
        let tv = s.parallel_transport(&p, &q, &v).unwrap();
        let tw = s.parallel_transport(&p, &q, &w).unwrap();
        let ip0 = v.c[0]*w.c[0] + v.c[1]*w.c[1];
        let ip1 = tv.c[0]*tw.c[0] + tv.c[1]*tw.c[1];
        prop_assert!((ip0 - ip1).abs() < 1e-10);
    }

    #[test]
    fn jet_pairing_is_reproduced(cx in -0.4f64..0.4, cy in -0.4f64..0.4) {
        // sym_nabla of φ(q) = ⟨A, log(p,q)^⊗ℓ⟩/ℓ! recovers A at level ℓ
        let s = Surface::torus(16);
        let p = Point::torus(2.0, 3.0);
        let a = [0.7 + cx, -0.3 + cy, 0.5];
        let field = move |q: &Point| {
            let v = s.log(&p, q).unwrap();
            (a[0]*v.c[0]*v.c[0] + 2.0*a[1]*v.c[0]*v.c[1] + a[2]*v.c[1]*v.c[1]) / 2.0
        };
        let s2 = Surface::torus(16);
        let t = s2.sym_nabla(&field, &p, 2, 0.05).unwrap();
        prop_assert!((t.comps[0]-a[0]).abs() < 1e-6);
        prop_assert!((t.comps[1]-a[1]).abs() < 1e-6);
        prop_assert!((t.comps[2]-a[2]).abs() < 1e-6);
    }
}
