//! The heat-kernel integration operator 𝒦 on modelled distributions, the
//! classical Schauder check for K_tξ, the Picard fixpoint
//!
//!     u = 𝒦[m^Ξ u] + V,   V_t = lift of P_t u₀,
//!
//! and an independent spectral benchmark solving the renormalized equation
//! ∂_t U = ΔU + U(ξ - c_t) with an exponential integrator.
//!
//! Inside 𝒦 the reconstruction 𝓡_s f(s) is expanded in the eigenbasis once
//! per time node and the time integrals ∫ e^{-λ(t-s)} r_k(s) ds are taken
//! exactly against piecewise-linear coefficients, which handles the kernel
//! singularity at s → t analytically.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::holder::{fit_exponent_series, ExponentReport, FitKind};
use crate::noise::NoiseRealization;
use crate::pamstruct::{
    norm_dt, Fiber, KtCache, ModelledDistribution, NormParams, StructureKind,
};
use crate::spectral::EigenBasis;
use rayon::prelude::*;
use serde::Serialize;

/// Everything the fixpoint needs; `validate` pins the exponent chains that
/// the Schauder estimate rests on.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub alpha: f64,
    /// Solution-side exponent (the structure 𝒲 carries 𝒟^γ).
    pub gamma: f64,
    pub gamma0: f64,
    /// Norm scaling 𝔑; 0 requests auto-tuning by grid search.
    pub nscale: f64,
    pub horizon: f64,
    pub time_steps: usize,
    pub truncation: usize,
    pub seed: u64,
    pub picard_tol: f64,
    pub max_iterations: usize,
    /// Wick counterterm switch (off only for divergence studies).
    pub renormalized: bool,
}

impl SolverConfig {
    pub fn defaults(truncation: usize) -> SolverConfig {
        SolverConfig {
            alpha: -1.2,
            gamma: 1.5,
            gamma0: -1.2 / 2.0 + 1.0,
            nscale: 0.0,
            horizon: 0.05,
            time_steps: 64,
            truncation,
            seed: 1,
            picard_tol: 1e-8,
            max_iterations: 40,
            renormalized: true,
        }
    }

    /// ε = (2α + 8/3 - γ_𝒱)/4 with γ_𝒱 = γ - 4/3.
    pub fn epsilon(&self) -> f64 {
        (2.0 * self.alpha + 4.0 - self.gamma) / 4.0
    }

    pub fn gamma_v(&self) -> f64 {
        self.gamma - 4.0 / 3.0
    }

    /// Every exponent inequality used by the Schauder estimate, evaluated for
    /// (α, γ, γ₀, ε). Violations are configuration errors, not runtime
    /// surprises.
    pub fn validate(&self) -> Result<()> {
        let a = self.alpha;
        let g = self.gamma;
        let g0 = self.gamma0;
        let e = self.epsilon();
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(-4.0 / 3.0 < a && a < -1.0) {
            return fail("alpha must lie in (-4/3, -1)");
        }
        if !(4.0 / 3.0 < g && g < 2.0 * a + 4.0) {
            return fail("gamma must lie in (4/3, 2*alpha + 4)");
        }
        if (g0 - (a / 2.0 + 1.0)).abs() > 1e-9 {
            return fail("gamma0 must equal alpha/2 + 1");
        }
        if e <= 0.0 {
            return fail("epsilon must be positive");
        }
        let near = [a + 1.0, a / 2.0 + g0, a / 2.0, (a + 1.0) / 2.0, a / 2.0 - 0.5 + g0,
            a + 0.5];
        if near.iter().any(|&r| r <= -1.0 + e) {
            return fail("near-singularity exponent chain violated (rho1 > -1 + eps)");
        }
        let far = [a, a / 2.0 - 1.0 + g0, a / 2.0 - 0.5];
        if far.iter().any(|&r| r >= -1.0 + e) {
            return fail("far-field exponent chain violated (rho2 < -1 + eps)");
        }
        if a / 2.0 - e <= -1.0 {
            return fail("time-regularity exponent chain violated");
        }
        let gbar = g; // = gamma_v + 4/3
        let caps = [
            2.0 * a + 4.0 - 2.0 * e,
            a + 2.0 * g0 + 2.0 - 2.0 * e,
            self.gamma_v() + 2.0,
        ];
        if caps.iter().any(|&c| gbar > c + 1e-12) {
            return fail("gamma-bar exceeds a homogeneity-0 cap");
        }
        let caps1 = [2.0 * a + 3.0 - 2.0 * e, a + 1.0 + 2.0 * g0 - 2.0 * e];
        if caps1.iter().any(|&c| gbar - 1.0 > c + 1e-12) {
            return fail("gamma-bar - 1 exceeds a homogeneity-1 cap");
        }
        Ok(())
    }
}

/// Bounds of ∫ g with g ≤ C|t-s|^ρ near/far from the singularity:
/// near-panel bound T^ε A^{ρ₁+1-ε}, far-panel bound T^ε A^{ρ₂+1-ε}.
pub fn time_integral_helper(
    rho1: f64,
    rho2: f64,
    eps: f64,
    a: f64,
    t_max: f64,
) -> Result<(f64, f64)> {
    if rho1 - eps <= -1.0 {
        return Err(Error::Config(format!("rho1 - eps = {} must exceed -1", rho1 - eps)));
    }
    if rho2 - eps >= -1.0 {
        return Err(Error::Config(format!("rho2 - eps = {} must be below -1", rho2 - eps)));
    }
    let near = t_max.powf(eps) * a.powf(rho1 + 1.0 - eps) / (rho1 + 1.0 - eps);
    let far = t_max.powf(eps) * a.powf(rho2 + 1.0 - eps) / (-(rho2 + 1.0 - eps));
    Ok((near, far))
}

/// Classical Schauder for distributions: slope of |K_tξ(p) - K_tξ(q)| in
/// d(p,q), seed-averaged, target 2 + α.
#[allow(clippy::too_many_arguments)]
pub fn schauder_distribution_check(
    basis: &EigenBasis,
    t: f64,
    base_points: &[Point],
    d_grid: &[f64],
    n_seeds: u64,
    base_seed: u64,
    target: f64,
    tol: f64,
) -> Result<ExponentReport> {
    let realizations: Vec<NoiseRealization> = (0..n_seeds)
        .into_par_iter()
        .map(|i| NoiseRealization::sample(basis, base_seed ^ (i + 1)))
        .collect();
    let n_dirs = 6;
    let mut series = Vec::new();
    for p in base_points {
        let mut row = Vec::new();
        for &d in d_grid {
            let qs: Vec<Point> = (0..n_dirs)
                .map(|k| {
                    basis
                        .surface
                        .point_at(p, d, k as f64 * crate::geometry::TAU / n_dirs as f64)
                })
                .collect();
            let avg: f64 = realizations
                .par_iter()
                .map(|n| {
                    let kt = n.kt_coeffs(basis, t);
                    let at_p = basis.synth(&kt, p);
                    qs.iter()
                        .map(|q| (at_p - basis.synth(&kt, q)).abs())
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / n_seeds as f64;
            row.push(avg);
        }
        series.push(row);
    }
    // spatial resolution of the truncated field
    let floor = 2.0 / basis.truncation as f64;
    fit_exponent_series(&series, d_grid, floor, 0, target, tol, FitKind::AtLeast)
}

/// Lift of the initial heat flow at time t: fibers (P_t u₀(p), 0, d|_p P_t u₀).
pub fn lift_initial(
    basis: &EigenBasis,
    u0_coeffs: &[f64],
    t: f64,
    points: &[Point],
) -> Result<Vec<Fiber>> {
    let vt = basis.apply_pt(u0_coeffs, t);
    let h = 1e-3 * basis.surface.injectivity_radius();
    points
        .iter()
        .map(|p| {
            let v = basis.synth(&vt, p);
            let grad = basis
                .surface
                .sym_nabla(&|z: &Point| basis.synth(&vt, z), p, 1, h)?;
            Ok([v, 0.0, grad.comps[0], grad.comps[1]])
        })
        .collect()
}

/// Sparse initial datum; smooth by construction (finitely many modes).
pub fn default_initial(basis: &EigenBasis) -> Vec<f64> {
    let f = |p: &Point| match p {
        Point::Torus { x, y } => 1.0 + 0.5 * x.sin() + 0.3 * y.cos(),
        Point::Sphere { v } => 1.0 + 0.4 * v[0] + 0.3 * v[2],
    };
    let nodal: Vec<f64> = basis.surface.quad().iter().map(f).collect();
    basis.project_quad(&nodal)
}

/// ∫₀^Δ e^{-λ(Δ-u)}(a + b·u) du, exactly: the piecewise-linear building block
/// of the exponential integrator.
fn exp_segment(lambda: f64, delta: f64, a: f64, b: f64) -> f64 {
    if lambda == 0.0 {
        return a * delta + b * delta * delta / 2.0;
    }
    let x = lambda * delta;
    let i1 = -(-x).exp_m1() / lambda; // ∫ e^{-λ(Δ-u)} du
    let j = if x > 1e-4 {
        (1.0 - (1.0 + x) * (-x).exp()) / (lambda * lambda)
    } else {
        delta * delta * (0.5 - x / 3.0 + x * x / 8.0)
    };
    a * i1 + b * (delta * i1 - j)
}

/// Mode-exact time integration of h(t_i) = ∫₀^{t_i} e^{-λ(t_i - s)} r(s) ds
/// against piecewise-linear per-mode coefficients r[time][mode].
pub fn integrate_heat_history(basis: &EigenBasis, times: &[f64], r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_modes = basis.len();
    let n_t = times.len();
    let mut h = vec![vec![0.0; n_modes]; n_t];
    let lambdas: Vec<f64> = basis.modes.iter().map(|m| m.eigenvalue).collect();
    for i in 1..n_t {
        let delta = times[i] - times[i - 1];
        let (prev, cur) = {
            let (a, b) = h.split_at_mut(i);
            (&a[i - 1], &mut b[0])
        };
        let r0 = &r[i - 1];
        let r1 = &r[i];
        for k in 0..n_modes {
            let lam = lambdas[k];
            let decay = (-lam * delta).exp();
            let slope = (r1[k] - r0[k]) / delta;
            cur[k] = decay * prev[k] + exp_segment(lam, delta, r0[k], slope);
        }
    }
    h
}

/// Output of the integration operator 𝒦 applied to a 𝒱-valued input given
/// through its two scalar slots (the cotangent slot does not feed 𝓡).
pub struct KOutput {
    pub times: Vec<f64>,
    /// mode coefficients of h₀ per time
    pub h0_coeffs: Vec<Vec<f64>>,
    /// nodal h₀ on the quadrature grid
    pub h0_nodal: Vec<Vec<f64>>,
    /// h_{α+2} slot = the input's Ξ-slot (nodal, quadrature grid)
    pub he_nodal: Vec<Vec<f64>>,
    /// mode coefficients of the reconstruction per time
    pub r_coeffs: Vec<Vec<f64>>,
}

/// 𝒦 on the slot fields of m^Ξ(f) for f ∈ 𝒟(𝒲): reconstruction
/// 𝓡_s = f₀·ξ - f_e·c_s, then h₀ by the exponential integrator and
/// h_{α+2} = f₀.
pub fn k_op(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    times: &[f64],
    f0: &[Vec<f64>],
    fe: &[Vec<f64>],
    renormalized: bool,
) -> KOutput {
    let quad = basis.surface.quad();
    let xi_nodal = basis.synth_nodal(&noise.coeffs, quad);
    let r_nodal: Vec<Vec<f64>> = times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let c_t = if renormalized && i > 0 {
                noise.counterterm_at(basis, t, &quad[0])
            } else {
                0.0
            };
            f0[i]
                .iter()
                .zip(fe[i].iter())
                .zip(xi_nodal.iter())
                .map(|((f0, fe), xi)| f0 * xi - fe * c_t)
                .collect()
        })
        .collect();
    let r_coeffs: Vec<Vec<f64>> = r_nodal.par_iter().map(|r| basis.project_quad(r)).collect();
    let h0_coeffs = integrate_heat_history(basis, times, &r_coeffs);
    let h0_nodal: Vec<Vec<f64>> = h0_coeffs
        .par_iter()
        .map(|c| basis.synth_nodal(c, quad))
        .collect();
    KOutput {
        times: times.to_vec(),
        h0_coeffs,
        h0_nodal,
        he_nodal: f0.to_vec(),
        r_coeffs,
    }
}

/// Independent route for 𝓡_t 𝒦 f = ∫₀ᵗ ⟨p_{t-s}(p,·), 𝓡_s f(s)⟩ ds: composite
/// Simpson in s with sub-steps resolving e^{-λ_max(t-s)}, against the same
/// piecewise-linear mode history.
pub fn heat_history_quadrature_oracle(
    basis: &EigenBasis,
    times: &[f64],
    r_coeffs: &[Vec<f64>],
    t_idx: usize,
    p: &Point,
) -> f64 {
    let t = times[t_idx];
    let e_p = basis.eval_vec(p);
    let lambdas: Vec<f64> = basis.modes.iter().map(|m| m.eigenvalue).collect();
    let lam_max = basis.eigenvalue_max();
    let mut total = 0.0;
    for i in 1..=t_idx {
        let (s0, s1) = (times[i - 1], times[i]);
        let nsub = (((s1 - s0) * lam_max / 2.0).ceil() as usize).clamp(4, 600) * 2;
        let hstep = (s1 - s0) / nsub as f64;
        for j in 0..=nsub {
            let s = s0 + j as f64 * hstep;
            let w = simpson_weight(j, nsub) * hstep;
            let frac = (s - s0) / (s1 - s0);
            let mut val = 0.0;
            for k in 0..lambdas.len() {
                let r = r_coeffs[i - 1][k] * (1.0 - frac) + r_coeffs[i][k] * frac;
                val += e_p[k] * (-lambdas[k] * (t - s)).exp() * r;
            }
            total += w * val;
        }
    }
    total
}

fn simpson_weight(j: usize, n: usize) -> f64 {
    if j == 0 || j == n {
        1.0 / 3.0
    } else if j % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub contraction_factors: Vec<f64>,
    pub final_residual: f64,
    pub nscale_used: f64,
    pub times: Vec<f64>,
    /// reconstructed solution U(t,·) = 0-slot, nodal on the quadrature grid
    pub u_nodal: Vec<Vec<f64>>,
    /// mode coefficients of U(t,·)
    pub u_coeffs: Vec<Vec<f64>>,
}

/// Picard iteration Φ(f) = 𝒦[m^Ξ f] + V. The iteration lives on the two
/// scalar slots (the cotangent slot never feeds the reconstruction);
/// contraction is measured in the modified 𝒟^{γ,γ₀,𝔑} norm on a subsample,
/// with the full three-slot fibers (gradient slot via first-order covariant
/// differentiation of the corrected integral).
pub fn picard_solve(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    config: &SolverConfig,
    u0_coeffs: &[f64],
) -> Result<PicardOutcome> {
    config.validate()?;
    let quad = basis.surface.quad();
    let n_t = config.time_steps + 1;
    let times: Vec<f64> = (0..n_t)
        .map(|i| config.horizon * i as f64 / (n_t - 1) as f64)
        .collect();

    // lifted initial heat flow
    let v_nodal: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| basis.synth_nodal(&basis.apply_pt(u0_coeffs, t), quad))
        .collect();

    let mut f0 = v_nodal.clone();
    let mut fe: Vec<Vec<f64>> = times.iter().map(|_| vec![0.0; quad.len()]).collect();

    // norm subsample for contraction measurement
    let stride = (quad.len() / 96).max(1);
    let norm_points: Vec<Point> = quad.iter().step_by(stride).copied().collect();
    let norm_idx: Vec<usize> = (0..quad.len()).step_by(stride).collect();
    let time_stride = (n_t / 16).max(1);
    let norm_times: Vec<f64> = times.iter().step_by(time_stride).copied().collect();
    let kt_cache = KtCache::new(basis, noise, &norm_times, &norm_points);
    let mut pairs = Vec::new();
    for i in 0..norm_points.len() {
        for j in (i + 1)..norm_points.len() {
            let d = basis.surface.dist(&norm_points[i], &norm_points[j]);
            if d > 1e-9 && d < basis.surface.safe_radius() / 2.0 {
                pairs.push((i, j));
            }
        }
    }

    let mut contraction_factors = Vec::new();
    let mut prev_delta: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>, KOutput)> = None;
    let mut nscale_used = if config.nscale > 0.0 { config.nscale } else { 1.0 };
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    for it in 0..config.max_iterations {
        iterations = it + 1;
        let k = k_op(basis, noise, &times, &f0, &fe, config.renormalized);
        let f0_new: Vec<Vec<f64>> = v_nodal
            .iter()
            .zip(k.h0_nodal.iter())
            .map(|(v, h)| v.iter().zip(h.iter()).map(|(a, b)| a + b).collect())
            .collect();
        let fe_new = f0.clone();

        let d0: Vec<Vec<f64>> = f0_new
            .iter()
            .zip(f0.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x - y).collect())
            .collect();
        let de: Vec<Vec<f64>> = fe_new
            .iter()
            .zip(fe.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x - y).collect())
            .collect();
        residual = d0
            .iter()
            .chain(de.iter())
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |a, &b| a.max(b.abs()));

        // measure the contraction factor on iterate differences, in the
        // modified norm; tune 𝔑 on the first measurable pair
        if let Some((p0, pe, pk)) = prev_delta.take() {
            let cur = delta_norm_input(basis, noise, &times, &norm_times, &norm_idx, &d0, &de, &k);
            let prev = delta_norm_input(basis, noise, &times, &norm_times, &norm_idx, &p0, &pe, &pk);
            if config.nscale <= 0.0 && contraction_factors.is_empty() {
                let mut best = (f64::INFINITY, 1.0);
                for n in [1.0, 2.0, 4.0, 8.0, 16.0] {
                    let q = contraction_quotient(
                        basis, &kt_cache, &cur, &prev, config, n, &norm_points, &pairs,
                    )?;
                    if q < best.0 {
                        best = (q, n);
                    }
                }
                nscale_used = best.1;
            }
            let q = contraction_quotient(
                basis, &kt_cache, &cur, &prev, config, nscale_used, &norm_points, &pairs,
            )?;
            contraction_factors.push(q);
        }
        prev_delta = Some((d0, de, k));

        f0 = f0_new;
        fe = fe_new;
        if residual < config.picard_tol {
            break;
        }
    }

    let converged = residual < config.picard_tol;
    if !converged {
        let worst = contraction_factors.iter().copied().fold(0.0, f64::max);
        if worst >= 1.0 {
            return Err(Error::NonContraction {
                factor: worst,
                suggestion: "reduce the horizon T or raise the norm scaling".into(),
            });
        }
    }
    let u_coeffs: Vec<Vec<f64>> = f0.par_iter().map(|u| basis.project_quad(u)).collect();
    Ok(PicardOutcome {
        iterations,
        converged,
        contraction_factors,
        final_residual: residual,
        nscale_used,
        times,
        u_nodal: f0,
        u_coeffs,
    })
}

/// Data needed to evaluate the 𝒟-norm of an iterate difference on the norm
/// subsample: the three slots of 𝒦[m^Ξ Δf] + the slot shift.
struct DeltaFields {
    /// [norm_time][norm_point] fibers of the 𝒲-valued difference
    fibers: Vec<Vec<Fiber>>,
}

#[allow(clippy::too_many_arguments)]
fn delta_norm_input(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    times: &[f64],
    norm_times: &[f64],
    norm_idx: &[usize],
    d0: &[Vec<f64>],
    de: &[Vec<f64>],
    k: &KOutput,
    ) -> DeltaFields {
    // gradient slot: d|_p[ Σ_k h_k e_k - f0(t,p)·K_tξ ], first-order covariant
    // derivative of fixed mode fields
    let time_stride = if norm_times.len() > 1 {
        ((times.len() - 1) / (norm_times.len() - 1)).max(1)
    } else {
        1
    };
    let quad = basis.surface.quad();
    let h = 1e-3 * basis.surface.injectivity_radius();
    let fibers: Vec<Vec<Fiber>> = norm_times
        .par_iter()
        .enumerate()
        .map(|(nti, &t)| {
            let ti = (nti * time_stride).min(times.len() - 1);
            let h0c = &k.h0_coeffs[ti];
            let ktc = noise.kt_coeffs(basis, t);
            norm_idx
                .iter()
                .map(|&pi| {
                    let p = &quad[pi];
                    let f0_p = d0[ti][pi];
                    let grad_h = basis
                        .surface
                        .sym_nabla(&|z: &Point| basis.synth(h0c, z), p, 1, h)
                        .map(|t| [t.comps[0], t.comps[1]])
                        .unwrap_or([0.0, 0.0]);
                    let grad_k = basis
                        .surface
                        .sym_nabla(&|z: &Point| basis.synth(&ktc, z), p, 1, h)
                        .map(|t| [t.comps[0], t.comps[1]])
                        .unwrap_or([0.0, 0.0]);
                    // the Ξ-slot coefficient of m^Ξ Δf is Δf₀
                    [
                        d0[ti][pi],
                        de[ti][pi],
                        grad_h[0] - f0_p * grad_k[0],
                        grad_h[1] - f0_p * grad_k[1],
                    ]
                })
                .collect()
        })
        .collect();
    DeltaFields { fibers }
}

#[allow(clippy::too_many_arguments)]
fn contraction_quotient(
    basis: &EigenBasis,
    kt_cache: &KtCache,
    cur: &DeltaFields,
    prev: &DeltaFields,
    config: &SolverConfig,
    nscale: f64,
    norm_points: &[Point],
    pairs: &[(usize, usize)],
) -> Result<f64> {
    let norm_times: Vec<f64> = (0..cur.fibers.len()).map(|i| i as f64).collect();
    let make = |fields: &DeltaFields| ModelledDistribution {
        structure: StructureKind::W,
        times: norm_times.clone(),
        points: norm_points.to_vec(),
        values: fields.fibers.clone(),
    };
    let params = NormParams {
        alpha: config.alpha,
        gamma: config.gamma,
        gamma0: config.gamma0,
        nscale,
    };
    let num = norm_dt(&make(cur), basis, kt_cache, &params, pairs)?;
    let den = norm_dt(&make(prev), basis, kt_cache, &params, pairs)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Spectral benchmark: exponential integrator (second order) on the mode
/// coefficients of ∂_t U = ΔU + U(ξ - c_t).
pub fn direct_solve(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    u0_coeffs: &[f64],
    horizon: f64,
    steps: usize,
    renormalized: bool,
) -> Vec<f64> {
    let quad = basis.surface.quad();
    let xi_nodal = basis.synth_nodal(&noise.coeffs, quad);
    let dt = horizon / steps as f64;
    let lambdas: Vec<f64> = basis.modes.iter().map(|m| m.eigenvalue).collect();
    let decay: Vec<f64> = lambdas.iter().map(|l| (-l * dt).exp()).collect();
    let phi1: Vec<f64> = lambdas.iter().map(|l| phi1(-l * dt)).collect();
    let phi2: Vec<f64> = lambdas.iter().map(|l| phi2(-l * dt)).collect();

    let nonlin = |u: &[f64], t: f64| -> Vec<f64> {
        let u_nodal = basis.synth_nodal(u, quad);
        let c_t = if renormalized && t > 0.0 {
            noise.counterterm_at(basis, t, &quad[0])
        } else {
            0.0
        };
        let prod: Vec<f64> = u_nodal
            .iter()
            .zip(xi_nodal.iter())
            .map(|(u, xi)| u * (xi - c_t))
            .collect();
        basis.project_quad(&prod)
    };

    let mut u = u0_coeffs.to_vec();
    for n in 0..steps {
        let t = n as f64 * dt;
        let fu = nonlin(&u, t);
        // predictor
        let a: Vec<f64> = (0..u.len())
            .map(|k| decay[k] * u[k] + dt * phi1[k] * fu[k])
            .collect();
        let fa = nonlin(&a, t + dt);
        // corrector
        u = (0..u.len())
            .map(|k| a[k] + dt * phi2[k] * (fa[k] - fu[k]))
            .collect();
    }
    u
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-7 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        0.5 + z / 6.0 + z * z / 24.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Relative L² distance of two coefficient fields.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Measured Schauder norm factor ‖𝒦f‖ / ‖f‖ for a lifted probe input on a
/// horizon T (used for the shrinking-T trend check).
pub fn schauder_norm_factor(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    config: &SolverConfig,
    u0_coeffs: &[f64],
) -> Result<f64> {
    config.validate()?;
    let quad = basis.surface.quad();
    let n_t = config.time_steps + 1;
    let times: Vec<f64> = (0..n_t)
        .map(|i| config.horizon * i as f64 / (n_t - 1) as f64)
        .collect();
    let f0: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| basis.synth_nodal(&basis.apply_pt(u0_coeffs, t), quad))
        .collect();
    let fe: Vec<Vec<f64>> = times.iter().map(|_| vec![0.0; quad.len()]).collect();
    let k = k_op(basis, noise, &times, &f0, &fe, config.renormalized);

    let stride = (quad.len() / 80).max(1);
    let norm_points: Vec<Point> = quad.iter().step_by(stride).copied().collect();
    let norm_idx: Vec<usize> = (0..quad.len()).step_by(stride).collect();
    let time_stride = (n_t / 12).max(1);
    let norm_times: Vec<f64> = times.iter().step_by(time_stride).copied().collect();
    let kt_cache = KtCache::new(basis, noise, &norm_times, &norm_points);
    let mut pairs = Vec::new();
    for i in 0..norm_points.len() {
        for j in (i + 1)..norm_points.len() {
            let d = basis.surface.dist(&norm_points[i], &norm_points[j]);
            if d > 1e-9 && d < basis.surface.safe_radius() / 2.0 {
                pairs.push((i, j));
            }
        }
    }
    let out_fields = delta_norm_input(basis, noise, &times, &norm_times, &norm_idx, &f0, &fe, &k);
    let out_md = ModelledDistribution {
        structure: StructureKind::W,
        times: norm_times.clone(),
        points: norm_points.clone(),
        values: out_fields.fibers,
    };
    // replace the fiber slots with the 𝒦 output itself: (h0, he, grad slot)
    let mut out_md = out_md;
    for (nti, tvals) in out_md.values.iter_mut().enumerate() {
        let ti = (nti * time_stride).min(times.len() - 1);
        for (npi, f) in tvals.iter_mut().enumerate() {
            let pi = norm_idx[npi];
            f[0] = k.h0_nodal[ti][pi];
            f[1] = k.he_nodal[ti][pi];
        }
    }

    // input norm: the 𝒱-valued m^Ξ(lift) with fibers (v, 0, ∇v)
    let h = 1e-3 * basis.surface.injectivity_radius();
    let in_values: Vec<Vec<Fiber>> = norm_times
        .par_iter()
        .enumerate()
        .map(|(nti, &t)| {
            let ti = (nti * time_stride).min(times.len() - 1);
            let vt = basis.apply_pt(u0_coeffs, t);
            norm_idx
                .iter()
                .map(|&pi| {
                    let p = &quad[pi];
                    let grad = basis
                        .surface
                        .sym_nabla(&|z: &Point| basis.synth(&vt, z), p, 1, h)
                        .map(|t| [t.comps[0], t.comps[1]])
                        .unwrap_or([0.0, 0.0]);
                    [f0[ti][pi], 0.0, grad[0], grad[1]]
                })
                .collect()
        })
        .collect();
    let in_md = ModelledDistribution {
        structure: StructureKind::V,
        times: norm_times.clone(),
        points: norm_points,
        values: in_values,
    };
    let nscale = if config.nscale > 0.0 { config.nscale } else { 2.0 };
    let out_params = NormParams {
        alpha: config.alpha,
        gamma: config.gamma,
        gamma0: config.gamma0,
        nscale,
    };
    let in_params = NormParams {
        alpha: config.alpha,
        gamma: config.gamma_v(),
        gamma0: config.gamma0,
        nscale,
    };
    let num = norm_dt(&out_md, basis, &kt_cache, &out_params, &pairs)?;
    let den = norm_dt(&in_md, basis, &kt_cache, &in_params, &pairs)?;
    Ok(num / den)
}

/// Level-wise Hölder quotients of 𝒦f at the output exponents
/// {γ̄, γ̄-(α+2), γ̄-1} on sampled pairs (finite by the Schauder estimate).
pub fn schauder_level_quotients(
    basis: &EigenBasis,
    noise: &NoiseRealization,
    config: &SolverConfig,
    u0_coeffs: &[f64],
) -> Result<[f64; 3]> {
    let quad = basis.surface.quad();
    let n_t = config.time_steps + 1;
    let times: Vec<f64> = (0..n_t)
        .map(|i| config.horizon * i as f64 / (n_t - 1) as f64)
        .collect();
    let f0: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| basis.synth_nodal(&basis.apply_pt(u0_coeffs, t), quad))
        .collect();
    let fe: Vec<Vec<f64>> = times.iter().map(|_| vec![0.0; quad.len()]).collect();
    let k = k_op(basis, noise, &times, &f0, &fe, config.renormalized);
    let stride = (quad.len() / 64).max(1);
    let norm_idx: Vec<usize> = (0..quad.len()).step_by(stride).collect();
    let ti = n_t - 1;
    let t = times[ti];
    let ktc = noise.kt_coeffs(basis, t);
    let h = 1e-3 * basis.surface.injectivity_radius();
    let levels = crate::pamstruct::gradings(StructureKind::W, config.alpha);
    let mut sup = [0.0_f64; 3];
    for &i in &norm_idx {
        for &j in &norm_idx {
            if i == j {
                continue;
            }
            let (p, q) = (&quad[i], &quad[j]);
            let d = basis.surface.dist(p, q);
            if d < 1e-6 || d >= basis.surface.safe_radius() / 2.0 {
                continue;
            }
            let s_t = basis.synth(&ktc, p) - basis.synth(&ktc, q);
            let fiber_q: Fiber = {
                let grad_h = basis
                    .surface
                    .sym_nabla(&|z: &Point| basis.synth(&k.h0_coeffs[ti], z), q, 1, h)?;
                let grad_k =
                    basis.surface.sym_nabla(&|z: &Point| basis.synth(&ktc, z), q, 1, h)?;
                [
                    k.h0_nodal[ti][j],
                    k.he_nodal[ti][j],
                    grad_h.comps[0] - k.he_nodal[ti][j] * grad_k.comps[0],
                    grad_h.comps[1] - k.he_nodal[ti][j] * grad_k.comps[1],
                ]
            };
            let fiber_p: Fiber = {
                let grad_h = basis
                    .surface
                    .sym_nabla(&|z: &Point| basis.synth(&k.h0_coeffs[ti], z), p, 1, h)?;
                let grad_k =
                    basis.surface.sym_nabla(&|z: &Point| basis.synth(&ktc, z), p, 1, h)?;
                [
                    k.h0_nodal[ti][i],
                    k.he_nodal[ti][i],
                    grad_h.comps[0] - k.he_nodal[ti][i] * grad_k.comps[0],
                    grad_h.comps[1] - k.he_nodal[ti][i] * grad_k.comps[1],
                ]
            };
            let transported = crate::pamstruct::gamma_fiber(basis, s_t, q, p, &fiber_q)?;
            let defect = [
                fiber_p[0] - transported[0],
                fiber_p[1] - transported[1],
                fiber_p[2] - transported[2],
                fiber_p[3] - transported[3],
            ];
            for slot in 0..3 {
                let expo = config.gamma - levels[slot];
                sup[slot] =
                    sup[slot].max(crate::pamstruct::fiber_level_norm(&defect, slot) / d.powf(expo));
            }
        }
    }
    Ok(sup)
}
