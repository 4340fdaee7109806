//! Truncated white noise ξ = Σ_k g_k e_k, Wick products, and the renormalized
//! family
//!
//!     Z^t_p = ∫₀ᵗ (ξ ◇ P_s ξ - ξ·P_s ξ(p)) ds
//!           = ξ·(K_t ξ - K_t ξ(p)) - c_t,
//!
//! where K_t = ∫₀ᵗ P_s ds acts per mode through I_k(t) = (1-e^{-λ_k t})/λ_k
//! and c_t(z) = Σ_k I_k(t) e_k(z)² is the Wick counterterm ∫₀ᵗ q_s(z) ds.
//! All Z pairings go through exact per-mode time integrals; time quadrature
//! appears only in oracle cross-checks.

use crate::error::Result;
use crate::geometry::Point;
use crate::holder::{fit_exponent_series, ExponentReport, FitKind, TestProfile};
use crate::spectral::EigenBasis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// One realization of the truncated noise: i.i.d. standard normal coefficients
/// drawn in the canonical (nested) mode order, so a realization at truncation
/// K is a prefix of the realization at any larger truncation with the same
/// seed.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub seed: u64,
    pub coeffs: Vec<f64>,
    /// Number of leading (canonical-order) modes the realization retains; the
    /// Wick counterterm sums over exactly these. A sub-truncated realization
    /// is renormalized by the counterterm of its own truncation.
    pub active: usize,
}

impl NoiseRealization {
    pub fn sample(basis: &EigenBasis, seed: u64) -> NoiseRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..basis.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let active = coeffs.len();
        NoiseRealization { seed, coeffs, active }
    }

    /// Noise with only the constant mode retained (closed-form solver tests).
    pub fn constant_mode_only(basis: &EigenBasis, seed: u64) -> NoiseRealization {
        let mut n = NoiseRealization::sample(basis, seed);
        for c in n.coeffs.iter_mut().skip(1) {
            *c = 0.0;
        }
        n.active = 1;
        n
    }

    /// All-zero noise: the pair (ξ, Z) vanishes identically, counterterm
    /// included.
    pub fn zero(basis: &EigenBasis) -> NoiseRealization {
        NoiseRealization { seed: 0, coeffs: vec![0.0; basis.len()], active: 0 }
    }

    pub fn xi_at(&self, basis: &EigenBasis, p: &Point) -> f64 {
        basis.synth(&self.coeffs, p)
    }

    /// Mode coefficients of K_t ξ.
    pub fn kt_coeffs(&self, basis: &EigenBasis, t: f64) -> Vec<f64> {
        basis
            .modes
            .iter()
            .zip(self.coeffs.iter())
            .map(|(m, g)| g * crate::spectral::mode_integral(m.eigenvalue, t))
            .collect()
    }

    pub fn kt_xi_at(&self, basis: &EigenBasis, t: f64, p: &Point) -> f64 {
        basis.synth(&self.kt_coeffs(basis, t), p)
    }

    /// Transport scalar S^t(p←q) = K_tξ(p) - K_tξ(q).
    pub fn s_t(&self, basis: &EigenBasis, t: f64, p: &Point, q: &Point) -> f64 {
        let kt = self.kt_coeffs(basis, t);
        basis.synth(&kt, p) - basis.synth(&kt, q)
    }

    /// Wick counterterm of this realization: c_t(z) = Σ_{k active} I_k(t) e_k(z)².
    pub fn counterterm_at(&self, basis: &EigenBasis, t: f64, z: &Point) -> f64 {
        let e = basis.eval_vec(z);
        basis
            .modes
            .iter()
            .zip(e.iter())
            .take(self.active)
            .map(|(m, e)| crate::spectral::mode_integral(m.eigenvalue, t) * e * e)
            .sum()
    }

    /// Nodal value of Z^t_p at z.
    pub fn z_at(&self, basis: &EigenBasis, t: f64, p: &Point, z: &Point) -> f64 {
        let kt = self.kt_coeffs(basis, t);
        let xi_z = self.xi_at(basis, z);
        let kxi_z = basis.synth(&kt, z);
        let kxi_p = basis.synth(&kt, p);
        xi_z * (kxi_z - kxi_p) - self.counterterm_at(basis, t, z)
    }
}

/// Basis-wide counterterm Σ_k I_k(t) e_k(z)² (every retained mode).
pub fn counterterm_full(basis: &EigenBasis, t: f64, z: &Point) -> f64 {
    let e = basis.eval_vec(z);
    basis
        .modes
        .iter()
        .zip(e.iter())
        .map(|(m, e)| crate::spectral::mode_integral(m.eigenvalue, t) * e * e)
        .sum()
}

/// Precomputed pairing functional at (p, λ, profile): geodesic-ball quadrature
/// nodes with profile weights and the mode values at the nodes and at p.
/// Makes Monte-Carlo sweeps two mat-vecs per realization.
pub struct PairingPlan {
    pub n_nodes: usize,
    pub n_modes: usize,
    /// node-major [n_nodes × n_modes]
    mode_values: Vec<f64>,
    wphi: Vec<f64>,
    modes_at_base: Vec<f64>,
    /// exponential-chart coordinates of the nodes relative to the base point
    pub chart: Vec<[f64; 2]>,
    pub nodes: Vec<Point>,
    /// ∫ φ_p^λ dvol (for pairing spatially constant fields)
    pub profile_mass: f64,
    /// functional on mode coefficients: B_k = ⟨e_k, φ_p^λ⟩
    pub mode_functional: Vec<f64>,
}

impl PairingPlan {
    pub fn new(
        basis: &EigenBasis,
        p: &Point,
        lambda: f64,
        profile: TestProfile,
    ) -> Result<PairingPlan> {
        let surface = &basis.surface;
        let limit = surface.safe_radius();
        if lambda * profile.support_radius() >= limit {
            return Err(crate::error::Error::ScaleTooLarge { lambda, limit });
        }
        let (gl, glw) = crate::geometry::gauss_legendre(40);
        let n_a = 64;
        let da = crate::geometry::TAU / n_a as f64;
        let radius = profile.support_radius();
        let mut points = Vec::new();
        let mut wphi = Vec::new();
        let mut chart = Vec::new();
        for (x, wr) in gl.iter().zip(glw.iter()) {
            let rho = radius * 0.5 * (x + 1.0);
            let wrho = radius * 0.5 * wr;
            let jac = surface.exp_chart_jacobian(lambda * rho);
            for a in 0..n_a {
                let ang = a as f64 * da;
                let phi = profile.eval([rho * ang.cos(), rho * ang.sin()]);
                points.push(surface.point_at(p, lambda * rho, ang));
                chart.push([lambda * rho * ang.cos(), lambda * rho * ang.sin()]);
                wphi.push(wrho * da * rho * jac * phi);
            }
        }
        let n_nodes = points.len();
        let n_modes = basis.len();
        let rows: Vec<Vec<f64>> = points.par_iter().map(|z| basis.eval_vec(z)).collect();
        let mut mode_values = vec![0.0; n_nodes * n_modes];
        for (i, row) in rows.iter().enumerate() {
            mode_values[i * n_modes..(i + 1) * n_modes].copy_from_slice(row);
        }
        let mut mode_functional = vec![0.0; n_modes];
        for (i, w) in wphi.iter().enumerate() {
            for (k, b) in mode_functional.iter_mut().enumerate() {
                *b += w * mode_values[i * n_modes + k];
            }
        }
        let profile_mass = wphi.iter().sum();
        Ok(PairingPlan {
            n_nodes,
            n_modes,
            mode_values,
            wphi,
            modes_at_base: basis.eval_vec(p),
            chart,
            nodes: points,
            profile_mass,
            mode_functional,
        })
    }

    /// ⟨Σ_k c_k e_k, φ_p^λ⟩.
    pub fn pair_linear(&self, coeffs: &[f64]) -> f64 {
        self.mode_functional
            .iter()
            .zip(coeffs.iter())
            .map(|(b, c)| b * c)
            .sum()
    }

    /// ⟨F·Σ_k c_k e_k, φ_p^λ⟩ for a deterministic factor F given at the nodes.
    pub fn pair_linear_with_factor(&self, coeffs: &[f64], factor: &[f64]) -> f64 {
        let field = self.synth_nodes(coeffs);
        field
            .iter()
            .zip(factor.iter())
            .zip(self.wphi.iter())
            .map(|((f, fac), w)| w * f * fac)
            .sum()
    }

    /// ⟨G, φ_p^λ⟩ for a deterministic field given at the nodes.
    pub fn pair_values(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(self.wphi.iter())
            .map(|(v, w)| w * v)
            .sum()
    }

    /// Field values at the quadrature nodes.
    pub fn synth_nodes(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.n_nodes)
            .map(|i| {
                self.mode_values[i * self.n_modes..(i + 1) * self.n_modes]
                    .iter()
                    .zip(coeffs.iter())
                    .map(|(e, c)| e * c)
                    .sum()
            })
            .collect()
    }

    fn value_at_base(&self, coeffs: &[f64]) -> f64 {
        self.modes_at_base
            .iter()
            .zip(coeffs.iter())
            .map(|(e, c)| e * c)
            .sum()
    }

    /// Fix per-mode weights w_k (e.g. I_k(t), or I_k(t)-I_k(s)); precomputes
    /// the counterterm field Σ_k w_k e_k(z)² at the nodes.
    pub fn with_weights(&self, weights: Vec<f64>) -> WeightedZPlan<'_> {
        let c_nodes: Vec<f64> = (0..self.n_nodes)
            .map(|i| {
                self.mode_values[i * self.n_modes..(i + 1) * self.n_modes]
                    .iter()
                    .zip(weights.iter())
                    .map(|(e, w)| w * e * e)
                    .sum()
            })
            .collect();
        WeightedZPlan { plan: self, weights, c_nodes }
    }
}

/// Pairing of Z-type products ξ·(Wξ - Wξ(p)) - c_W against the plan's test
/// function, with W = diag(w_k).
pub struct WeightedZPlan<'a> {
    plan: &'a PairingPlan,
    weights: Vec<f64>,
    c_nodes: Vec<f64>,
}

impl WeightedZPlan<'_> {
    /// Full pairing ⟨Z, φ_p^λ⟩ (counterterm included).
    pub fn pair(&self, g: &[f64]) -> f64 {
        self.pair_parts(g).0
    }

    /// (full pairing, Wick part ⟨ξ·Wξ - c_W, φ⟩, base factor Wξ(p)·⟨ξ,φ⟩)
    pub fn pair_parts(&self, g: &[f64]) -> (f64, f64, f64) {
        let wg: Vec<f64> = self.weights.iter().zip(g.iter()).map(|(w, g)| w * g).collect();
        let xi = self.plan.synth_nodes(g);
        let wxi = self.plan.synth_nodes(&wg);
        let wxi_p = self.plan.value_at_base(&wg);
        let mut wick = 0.0;
        let mut base = 0.0;
        for i in 0..self.plan.n_nodes {
            let w = self.plan.wphi[i];
            wick += w * (xi[i] * wxi[i] - self.c_nodes[i]);
            base += w * xi[i];
        }
        let base_term = wxi_p * base;
        (wick - base_term, wick, base_term)
    }

    /// Analytic mean of the full pairing: -Σ_k w_k B_k e_k(p).
    pub fn analytic_mean(&self) -> f64 {
        -self
            .weights
            .iter()
            .zip(self.plan.mode_functional.iter())
            .zip(self.plan.modes_at_base.iter())
            .map(|((w, b), e)| w * b * e)
            .sum::<f64>()
    }
}

/// ⟨Z^t_p, φ_p^λ⟩ for a single realization (exact per-mode time integrals).
pub fn z_pair(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    t: f64,
    p: &Point,
    lambda: f64,
    profile: TestProfile,
) -> Result<f64> {
    let plan = PairingPlan::new(basis, p, lambda, profile)?;
    let weighted = plan.with_weights(basis.mode_integrals(t));
    Ok(weighted.pair(&noise.coeffs))
}

/// Monte-Carlo second-moment study of ⟨Z^t_p, φ^λ_p⟩ over a λ grid.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceStudy {
    pub report: ExponentReport,
    /// per (point, λ): empirical variance of the pairing
    pub variances: Vec<Vec<f64>>,
    /// per (point, λ): empirical mean and its analytic value
    pub means: Vec<Vec<(f64, f64)>>,
    /// per (point, λ): empirical mean of the Wick part and its standard error
    pub wick_means: Vec<Vec<(f64, f64)>>,
}

#[allow(clippy::too_many_arguments)]
pub fn z_variance_study(
    basis: &EigenBasis,
    t: f64,
    points: &[Point],
    lambda_grid: &[f64],
    n_seeds: u64,
    base_seed: u64,
    target: f64,
    tol: f64,
) -> Result<VarianceStudy> {
    let weights = basis.mode_integrals(t);
    let realizations: Vec<NoiseRealization> = (0..n_seeds)
        .into_par_iter()
        .map(|i| NoiseRealization::sample(basis, base_seed ^ (i + 1)))
        .collect();
    let mut variances = Vec::new();
    let mut means = Vec::new();
    let mut wick_means = Vec::new();
    for p in points {
        let mut var_row = Vec::new();
        let mut mean_row = Vec::new();
        let mut wick_row = Vec::new();
        for &lam in lambda_grid {
            let plan = PairingPlan::new(basis, p, lam, TestProfile::Bump)?;
            let weighted = plan.with_weights(weights.clone());
            let parts: Vec<(f64, f64, f64)> = realizations
                .par_iter()
                .map(|n| weighted.pair_parts(&n.coeffs))
                .collect();
            let n = parts.len() as f64;
            let mean = parts.iter().map(|x| x.0).sum::<f64>() / n;
            let var = parts.iter().map(|x| (x.0 - mean) * (x.0 - mean)).sum::<f64>() / (n - 1.0);
            let wick_mean = parts.iter().map(|x| x.1).sum::<f64>() / n;
            let wick_var =
                parts.iter().map(|x| (x.1 - wick_mean) * (x.1 - wick_mean)).sum::<f64>()
                    / (n - 1.0);
            var_row.push(var);
            mean_row.push((mean, weighted.analytic_mean()));
            wick_row.push((wick_mean, (wick_var / n).sqrt()));
        }
        variances.push(var_row);
        means.push(mean_row);
        wick_means.push(wick_row);
    }
    let report = fit_exponent_series(
        &variances,
        lambda_grid,
        crate::holder::resolution_floor(basis),
        0,
        target,
        tol,
        FitKind::AtLeast,
    )?;
    Ok(VarianceStudy { report, variances, means, wick_means })
}

/// Second moment of time increments ⟨Z^t_p - Z^s_p, φ^λ_p⟩ against |t-s|.
#[allow(clippy::too_many_arguments)]
pub fn time_increment_moment(
    basis: &EigenBasis,
    s: f64,
    dt_grid: &[f64],
    p: &Point,
    lambda: f64,
    n_seeds: u64,
    base_seed: u64,
    kappa_target: f64,
    tol: f64,
) -> Result<ExponentReport> {
    let plan = PairingPlan::new(basis, p, lambda, TestProfile::Bump)?;
    let realizations: Vec<NoiseRealization> = (0..n_seeds)
        .into_par_iter()
        .map(|i| NoiseRealization::sample(basis, base_seed ^ (i + 1)))
        .collect();
    let i_s = basis.mode_integrals(s);
    let mut moments = vec![Vec::with_capacity(dt_grid.len())];
    for &dt in dt_grid {
        let i_t = basis.mode_integrals(s + dt);
        let dw: Vec<f64> = i_t.iter().zip(i_s.iter()).map(|(a, b)| a - b).collect();
        let weighted = plan.with_weights(dw);
        let vals: Vec<f64> = realizations
            .par_iter()
            .map(|n| weighted.pair(&n.coeffs))
            .collect();
        let m2 = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
        moments[0].push(m2);
    }
    fit_exponent_series(&moments, dt_grid, 0.0, 0, kappa_target, tol, FitKind::AtLeast)
}

/// sup-norm of the pathwise consistency residual
/// Z^t_q - Z^t_p - S^t(p←q)·ξ over probe points (an algebraic identity at
/// truncation; the residual is pure roundoff).
pub fn consistency_residual(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    t: f64,
    p: &Point,
    q: &Point,
    probes: &[Point],
) -> f64 {
    let s = noise.s_t(basis, t, p, q);
    probes
        .iter()
        .map(|z| {
            let zq = noise.z_at(basis, t, q, z);
            let zp = noise.z_at(basis, t, p, z);
            let xi = noise.xi_at(basis, z);
            (zq - zp - s * xi).abs()
        })
        .fold(0.0, f64::max)
}

/// |c_t(z) - ∫₀ᵗ q_s(z) ds| with the time integral by two-panel quadrature of
/// the closed kernel diagonal (the boundary layer at s=0 gets its own panel).
pub fn counterterm_vs_quadrature(basis: &EigenBasis, t: f64, z: &Point) -> f64 {
    let direct = counterterm_full(basis, t, z);
    let lam_max = basis.eigenvalue_max();
    let split = (10.0 / lam_max).min(t / 2.0);
    let (nodes, w) = crate::geometry::gauss_legendre(64);
    let mut integral = 0.0;
    for (a, b) in [(0.0, split), (split, t)] {
        for (x, w) in nodes.iter().zip(w.iter()) {
            let s = a + (b - a) * 0.5 * (x + 1.0);
            integral += (b - a) * 0.5 * w * basis.heat_kernel(s, z, z);
        }
    }
    (direct - integral).abs()
}

/// E⟨ξ,φ⟩² equals ‖Π_K φ‖²_{L²}; returns (empirical, exact-at-truncation).
pub fn isometry_check(
    basis: &EigenBasis,
    p: &Point,
    lambda: f64,
    n_seeds: u64,
    base_seed: u64,
) -> Result<(f64, f64)> {
    let plan = PairingPlan::new(basis, p, lambda, TestProfile::Bump)?;
    let vals: Vec<f64> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let n = NoiseRealization::sample(basis, base_seed ^ (i + 1));
            plan.pair_linear(&n.coeffs)
        })
        .collect();
    let m2 = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
    let exact: f64 = plan.mode_functional.iter().map(|b| b * b).sum();
    Ok((m2, exact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sampling_is_deterministic() {
        let basis = EigenBasis::torus(6, 24);
        let a = NoiseRealization::sample(&basis, 42);
        let b = NoiseRealization::sample(&basis, 42);
        assert_eq!(a.coeffs, b.coeffs);
        let c = NoiseRealization::sample(&basis, 43);
        assert_ne!(a.coeffs, c.coeffs);
    }

    #[test]
    fn nested_truncations_share_coefficients() {
        let small = EigenBasis::torus(4, 64);
        let large = EigenBasis::torus(8, 64);
        let a = NoiseRealization::sample(&small, 7);
        let b = NoiseRealization::sample(&large, 7);
        assert_eq!(a.coeffs[..], b.coeffs[..small.len()]);
    }

    #[test]
    fn mode_variances_are_standard() {
        let basis = EigenBasis::torus(2, 16);
        let n = 1000;
        let mut acc = vec![0.0; basis.len()];
        for seed in 0..n {
            let r = NoiseRealization::sample(&basis, 1000 + seed);
            for (a, g) in acc.iter_mut().zip(r.coeffs.iter()) {
                *a += g * g;
            }
        }
        for a in acc {
            let var = a / n as f64;
            assert!((0.91..=1.09).contains(&var), "empirical variance {var}");
        }
    }

    #[test]
    fn counterterm_is_spatially_constant_and_monotone() {
        for basis in [EigenBasis::torus(8, 32), EigenBasis::sphere(8, 256)] {
            let mut rng = rand::rngs::StdRng::seed_from_u64(3);
            use rand::SeedableRng;
            let p = basis.surface.sample_point(&mut rng);
            let q = basis.surface.sample_point(&mut rng);
            let a = counterterm_full(&basis, 0.3, &p);
            let b = counterterm_full(&basis, 0.3, &q);
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            let c = counterterm_full(&basis, 0.5, &p);
            assert!(c >= a && a >= 0.0);
        }
    }

    #[test]
    fn counterterm_matches_time_quadrature_of_diagonal() {
        let basis = EigenBasis::torus(8, 32);
        let z = Point::torus(1.0, 0.5);
        assert!(counterterm_vs_quadrature(&basis, 0.4, &z) < 1e-8);
        let sb = EigenBasis::sphere(8, 256);
        let sz = Point::sphere([0.3, 0.1, 0.95]);
        assert!(counterterm_vs_quadrature(&sb, 0.4, &sz) < 1e-8);
    }

    #[test]
    fn z_pairing_vanishes_at_time_zero() {
        let basis = EigenBasis::torus(6, 24);
        let noise = NoiseRealization::sample(&basis, 11);
        let p = Point::torus(2.0, 2.0);
        let v = z_pair(&basis, &noise, 0.0, &p, 0.3, TestProfile::Bump).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn pathwise_consistency_identity() {
        let basis = EigenBasis::torus(8, 32);
        let noise = NoiseRealization::sample(&basis, 5);
        let p = Point::torus(1.0, 1.0);
        let q = Point::torus(1.4, 0.8);
        let probes: Vec<Point> = (0..20)
            .map(|i| Point::torus(0.3 * i as f64, 0.17 * i as f64))
            .collect();
        let r = consistency_residual(&basis, &noise, 0.5, &p, &q, &probes);
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn s_t_telescopes() {
        let basis = EigenBasis::sphere(6, 256);
        let noise = NoiseRealization::sample(&basis, 9);
        let p = Point::sphere([1.0, 0.0, 0.0]);
        let q = Point::sphere([0.9, 0.3, 0.32]);
        let r = Point::sphere([0.8, -0.2, 0.57]);
        let spq = noise.s_t(&basis, 0.3, &p, &q);
        let sqr = noise.s_t(&basis, 0.3, &q, &r);
        let spr = noise.s_t(&basis, 0.3, &p, &r);
        assert_abs_diff_eq!(spq + sqr, spr, epsilon = 1e-12);
    }

    #[test]
    fn wick_identity_at_truncation() {
        // ξ◇P_sξ + q_s = ξ·P_sξ nodally, with q_s from the closed kernel form
        let basis = EigenBasis::torus(8, 32);
        let noise = NoiseRealization::sample(&basis, 21);
        let s = 0.15;
        let ps = basis.apply_pt(&noise.coeffs, s);
        for z in [Point::torus(0.3, 1.1), Point::torus(4.4, 2.0)] {
            let xi = noise.xi_at(&basis, &z);
            let psxi = basis.synth(&ps, &z);
            let qs = basis.heat_kernel(s, &z, &z);
            let wick = xi * psxi - qs; // definition of ◇ at truncation
            assert_abs_diff_eq!(wick + qs, xi * psxi, epsilon = 1e-10);
            // the diagonal from the closed kernel matches the mode sum
            let qs_modes: f64 = {
                let e = basis.eval_vec(&z);
                basis
                    .modes
                    .iter()
                    .zip(e.iter())
                    .map(|(m, e)| (-m.eigenvalue * s).exp() * e * e)
                    .sum()
            };
            assert_abs_diff_eq!(qs, qs_modes, epsilon = 1e-10);
        }
    }

    #[test]
    fn isometry_on_retained_modes() {
        let basis = EigenBasis::torus(6, 24);
        let p = Point::torus(3.0, 3.0);
        let (emp, exact) = isometry_check(&basis, &p, 0.4, 400, 77).unwrap();
        // MC error ~ exact·√(2/400) ≈ 7%
        assert!((emp / exact - 1.0).abs() < 0.25, "emp {emp} exact {exact}");
    }

    #[test]
    fn pairing_plan_linear_matches_ball_quadrature() {
        let basis = EigenBasis::torus(6, 24);
        let mut coeffs = vec![0.0; basis.len()];
        coeffs[2] = 1.3;
        coeffs[9] = -0.4;
        let p = Point::torus(1.0, 5.0);
        let plan = PairingPlan::new(&basis, &p, 0.4, TestProfile::Bump).unwrap();
        let via_plan = plan.pair_linear(&coeffs);
        let via_fn = crate::holder::scaled_pair_fn(
            &basis.surface,
            &|z: &Point| basis.synth(&coeffs, z),
            &p,
            0.4,
            TestProfile::Bump,
        )
        .unwrap();
        assert_abs_diff_eq!(via_plan, via_fn, epsilon = 1e-12);
    }

    #[test]
    fn z_mean_matches_analytic() {
        let basis = EigenBasis::torus(8, 32);
        let p = Point::torus(2.2, 3.3);
        let t = 0.5;
        let plan = PairingPlan::new(&basis, &p, 0.25, TestProfile::Bump).unwrap();
        let weighted = plan.with_weights(basis.mode_integrals(t));
        let n = 600;
        let vals: Vec<(f64, f64, f64)> = (0..n)
            .map(|i| {
                let r = NoiseRealization::sample(&basis, 5000 + i);
                weighted.pair_parts(&r.coeffs)
            })
            .collect();
        let mean = vals.iter().map(|v| v.0).sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0))
            .sqrt()
            / (n as f64).sqrt();
        let analytic = weighted.analytic_mean();
        assert!(
            (mean - analytic).abs() < 4.0 * sd,
            "mean {mean} analytic {analytic} sd {sd}"
        );
        // the Wick part is centered
        let wick_mean = vals.iter().map(|v| v.1).sum::<f64>() / n as f64;
        let wick_sd = (vals.iter().map(|v| (v.1 - wick_mean).powi(2)).sum::<f64>()
            / (n as f64 - 1.0))
            .sqrt()
            / (n as f64).sqrt();
        assert!(wick_mean.abs() < 4.0 * wick_sd, "wick mean {wick_mean} sd {wick_sd}");
    }
}
