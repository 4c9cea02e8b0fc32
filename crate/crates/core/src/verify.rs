//! Independent identity oracles: Pohozaev-type pairings of the linearized
//! operator, the scaling-pairing identity with its closed-form remainder,
//! and the energy expansion near the ground state.
//!
//! This module deliberately owns its numerics: composite Simpson quadrature
//! on uniform grids (fourth order) and fourth-order derivative stencils, so
//! an identity defect can only come from quadrature, never from the
//! second-order machinery the dynamics modules use. Test profiles carry
//! closed-form derivatives wherever possible.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::grid::{Grading, RadialGrid};
use crate::ground_state::{
    commutator_remainder_at, lambda_q_at, potential_at, potential_prime_at, q_at,
};
use crate::params::DimensionParams;
use crate::spectral::fit_slope;

/// One verified identity.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_defect: f64,
    pub rel_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let abs_defect = (lhs - rhs).abs();
        let denom = lhs.abs().max(rhs.abs());
        let (rel_defect, pass) = if denom <= 1e-14 {
            (abs_defect, abs_defect <= tolerance)
        } else {
            let rel = abs_defect / denom;
            (rel, rel <= tolerance)
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            abs_defect,
            rel_defect,
            tolerance,
            pass,
        }
    }
}

/// Radial profile with closed-form derivatives.
pub trait SmoothRadial {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
}

/// Even-symmetrized sum of Gaussians
/// `sum_k A_k [e^{-((r-c_k)/w_k)^2} + e^{-((r+c_k)/w_k)^2}]`:
/// smooth as a radial profile and compactly supported to machine precision.
#[derive(Debug, Clone)]
pub struct GaussianSum {
    pub terms: Vec<(f64, f64, f64)>,
}

impl GaussianSum {
    pub fn single(amp: f64, center: f64, width: f64) -> Self {
        Self {
            terms: vec![(amp, center, width)],
        }
    }

    /// Seeded random sum supported (to machine precision) inside `r_half`.
    pub fn random(rng: &mut impl Rng, r_half: f64) -> Self {
        let k = rng.gen_range(1..=3);
        let mut terms = Vec::with_capacity(k);
        for _ in 0..k {
            let center = rng.gen_range(0.5..0.25 * r_half);
            let wmax = ((r_half - center) / 14.0).min(2.0);
            let width = rng.gen_range(0.3..wmax.max(0.31));
            let amp = rng.gen_range(0.1..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            terms.push((amp, center, width));
        }
        Self { terms }
    }
}

impl SmoothRadial for GaussianSum {
    fn value(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, c, w)| {
                let xm = (r - c) / w;
                let xp = (r + c) / w;
                a * ((-xm * xm).exp() + (-xp * xp).exp())
            })
            .sum()
    }

    fn d1(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, c, w)| {
                let xm = (r - c) / w;
                let xp = (r + c) / w;
                a * (-2.0 * xm * (-xm * xm).exp() - 2.0 * xp * (-xp * xp).exp()) / w
            })
            .sum()
    }

    fn d2(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, c, w)| {
                let xm = (r - c) / w;
                let xp = (r + c) / w;
                a * ((4.0 * xm * xm - 2.0) * (-xm * xm).exp()
                    + (4.0 * xp * xp - 2.0) * (-xp * xp).exp())
                    / (w * w)
            })
            .sum()
    }
}

/// `Lambda Q` as a closed-form profile (the self-pairing case).
pub struct LambdaQProfile {
    pub params: DimensionParams,
}

impl SmoothRadial for LambdaQProfile {
    fn value(&self, r: f64) -> f64 {
        lambda_q_at(r, self.params)
    }
    fn d1(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        crate::ground_state::r_dr_lambda_q_at(r, self.params) / r
    }
    fn d2(&self, r: f64) -> f64 {
        // Only exercised through Lambda v = nu v + r v'; a symmetric
        // difference of the closed-form d1 is plenty.
        let h = 1e-6 * (1.0 + r);
        if r < h {
            (self.d1(r + h) - self.d1(r)) / h
        } else {
            (self.d1(r + h) - self.d1(r - h)) / (2.0 * h)
        }
    }
}

fn require_uniform_odd(grid: &RadialGrid) -> Result<f64> {
    if grid.grading != Grading::Uniform {
        return Err(Error::InvalidArgument(
            "verification quadrature needs a uniform grid".into(),
        ));
    }
    if grid.len() % 2 == 0 {
        return Err(Error::InvalidArgument(
            "Simpson quadrature needs an odd number of nodes".into(),
        ));
    }
    Ok(grid.nodes[1] - grid.nodes[0])
}

/// Composite Simpson integral of `g(i, r)` against `omega r^{n-1} dr`.
pub fn simpson_radial(grid: &RadialGrid, g: impl Fn(usize, f64) -> f64) -> Result<f64> {
    let h = require_uniform_odd(grid)?;
    let omega = grid.params.sphere_area();
    let pw = grid.params.n as i32 - 1;
    let n = grid.len();
    let mut acc = 0.0;
    for i in 0..n {
        let coeff = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let r = grid.nodes[i];
        acc += coeff * g(i, r) * r.powi(pw);
    }
    Ok(acc * h / 3.0 * omega)
}

/// Fourth-order first derivative of nodal values on a uniform grid with
/// even extension at the origin (ghosts `f[-k] = f[k]`) and zero extension
/// past `r_max`.
pub fn d1_uniform_o4(grid: &RadialGrid, f: &[f64]) -> Result<Vec<f64>> {
    let h = require_uniform_odd(grid)?;
    let n = f.len();
    let at = |i: i64| -> f64 {
        if i < 0 {
            f[(-i) as usize]
        } else if i as usize >= n {
            0.0
        } else {
            f[i as usize]
        }
    };
    let mut out = vec![0.0; n];
    for i in 0..n as i64 {
        out[i as usize] =
            (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h);
    }
    out[0] = 0.0;
    Ok(out)
}

/// Fourth-order second derivative, same extension conventions.
pub fn d2_uniform_o4(grid: &RadialGrid, f: &[f64]) -> Result<Vec<f64>> {
    let h = require_uniform_odd(grid)?;
    let n = f.len();
    let at = |i: i64| -> f64 {
        if i < 0 {
            f[(-i) as usize]
        } else if i as usize >= n {
            0.0
        } else {
            f[i as usize]
        }
    };
    let mut out = vec![0.0; n];
    for i in 0..n as i64 {
        out[i as usize] = (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i)
            + 16.0 * at(i + 1)
            - at(i + 2))
            / (12.0 * h * h);
    }
    Ok(out)
}

fn check_support_inside_half(grid: &RadialGrid, v: &dyn SmoothRadial) -> Result<()> {
    let r_half = 0.5 * grid.r_max();
    let mut vmax: f64 = 0.0;
    let mut outer: f64 = 0.0;
    for &r in &grid.nodes {
        let a = v.value(r).abs();
        vmax = vmax.max(a);
        if r > r_half {
            outer = outer.max(a);
        }
    }
    if vmax == 0.0 {
        return Ok(());
    }
    if outer > 1e-13 * vmax {
        return Err(Error::InvalidArgument(format!(
            "profile support touches the boundary (outer/max = {:.3e})",
            outer / vmax
        )));
    }
    Ok(())
}

/// Pohozaev-type pair for the linearized operator, evaluated from closed
/// forms so the defect is quadrature-only.
///
/// 1. `(Lambda v, H v)_2 = -(v^2, V + (r/2) V')_2`.
/// 2. The radial gradient pairing: `(v_r, H v)_2` equals
///    `(n-1)/2 [J(v_r^2) - J(v^2 V)] - (v^2, V'/2)_2`
///    with `J(g) = omega int g r^{n-2} dr` (the curvature terms the radial
///    reduction of the flat-space identity picks up).
pub fn pohozaev_check(
    v: &dyn SmoothRadial,
    grid: &Arc<RadialGrid>,
    tolerance: f64,
) -> Result<[IdentityReport; 2]> {
    check_support_inside_half(grid, v)?;
    let params = grid.params;
    let nf = params.nf();
    let nu = params.scaling_power();
    let hv = |r: f64| -> f64 {
        let lap = if r == 0.0 {
            nf * v.d2(0.0)
        } else {
            v.d2(r) + (nf - 1.0) / r * v.d1(r)
        };
        lap + potential_at(r, params) * v.value(r)
    };
    let lhs1 = simpson_radial(grid, |_, r| (nu * v.value(r) + r * v.d1(r)) * hv(r))?;
    let rhs1 = -simpson_radial(grid, |_, r| {
        let vv = v.value(r);
        vv * vv * (potential_at(r, params) + 0.5 * r * potential_prime_at(r, params))
    })?;
    let first = IdentityReport::new("pohozaev_scaling", lhs1, rhs1, tolerance);

    let lhs2 = simpson_radial(grid, |_, r| v.d1(r) * hv(r))?;
    // J(g) = omega int g r^{n-2} dr realized as int (g / r) dmu; integrands
    // vanish fast enough at 0 for n >= 4.
    let j_grad = simpson_radial(grid, |_, r| {
        if r == 0.0 {
            0.0
        } else {
            v.d1(r) * v.d1(r) / r
        }
    })?;
    let j_pot = simpson_radial(grid, |_, r| {
        if r == 0.0 {
            0.0
        } else {
            v.value(r) * v.value(r) * potential_at(r, params) / r
        }
    })?;
    let pair_v2 = simpson_radial(grid, |_, r| {
        v.value(r) * v.value(r) * 0.5 * potential_prime_at(r, params)
    })?;
    let rhs2 = 0.5 * (nf - 1.0) * (j_grad - j_pot) - pair_v2;
    let second = IdentityReport::new("pohozaev_gradient_radial", lhs2, rhs2, tolerance);
    Ok([first, second])
}

/// Scaling-pairing identity from a closed-form profile:
/// `(Lambda v, Lambda Q)_2 = (n-6)/2 (v, Lambda Q)_2 + (v, R)_2`.
pub fn lambda_commutator_check(
    v: &dyn SmoothRadial,
    grid: &Arc<RadialGrid>,
    tolerance: f64,
) -> Result<IdentityReport> {
    let params = grid.params;
    let nu = params.scaling_power();
    let lhs = simpson_radial(grid, |_, r| {
        (nu * v.value(r) + r * v.d1(r)) * lambda_q_at(r, params)
    })?;
    let pair_lq = simpson_radial(grid, |_, r| v.value(r) * lambda_q_at(r, params))?;
    let pair_r = simpson_radial(grid, |_, r| {
        v.value(r) * commutator_remainder_at(r, params)
    })?;
    let rhs = 0.5 * (params.nf() - 6.0) * pair_lq + pair_r;
    Ok(IdentityReport::new("lambda_commutator", lhs, rhs, tolerance))
}

/// Same identity for a grid field (the unstable mode), with the
/// fourth-order stencil supplying the derivative.
pub fn lambda_commutator_check_field(
    v: &RadialField,
    tolerance: f64,
) -> Result<IdentityReport> {
    let grid = &v.grid;
    let params = grid.params;
    let nu = params.scaling_power();
    let d1 = d1_uniform_o4(grid, &v.values)?;
    let lhs = simpson_radial(grid, |i, r| {
        (nu * v.values[i] + r * d1[i]) * lambda_q_at(r, params)
    })?;
    let pair_lq = simpson_radial(grid, |i, r| v.values[i] * lambda_q_at(r, params))?;
    let pair_r = simpson_radial(grid, |i, r| {
        v.values[i] * commutator_remainder_at(r, params)
    })?;
    let rhs = 0.5 * (params.nf() - 6.0) * pair_lq + pair_r;
    Ok(IdentityReport::new(
        "lambda_commutator_field",
        lhs,
        rhs,
        tolerance,
    ))
}

/// Log-log slope of `|R|` over `[r_lo, r_hi]`; the remainder decays like
/// `r^{-n}`, but the asymptotic exponent only emerges once `r^2 >> n(n-2)`.
pub fn remainder_decay_exponent(params: DimensionParams, r_lo: f64, r_hi: f64) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let m = 64;
    for k in 0..=m {
        let r = r_lo * (r_hi / r_lo).powf(k as f64 / m as f64);
        let val = commutator_remainder_at(r, params).abs();
        if val > 0.0 {
            xs.push(r.ln());
            ys.push(val.ln());
        }
    }
    fit_slope(&xs, &ys).unwrap_or(0.0)
}

/// Energy expansion near `Q`:
/// `E[Q + a y + eps] ~ E[Q] - (e0/2) a^2 ||y||^2 + 1/2 (-H eps, eps)`,
/// with the defect cubic in the perturbation size.
///
/// Everything is evaluated with the module's own fourth-order machinery;
/// `y` must be the unit-normalized unstable mode on the same uniform grid,
/// and the quadratic reference uses its Rayleigh quotient under the same
/// discrete operator so the comparison is internally consistent.
pub fn energy_expansion_check(
    y: &RadialField,
    a: f64,
    eps: Option<&RadialField>,
    tolerance: f64,
) -> Result<IdentityReport> {
    let grid = &y.grid;
    let params = grid.params;
    let energy_of = |values: &[f64]| -> Result<f64> {
        let d1 = d1_uniform_o4(grid, values)?;
        simpson_radial(grid, |i, _| {
            0.5 * d1[i] * d1[i] - params.abs_power_p1(values[i]) / (params.p + 1.0)
        })
    };
    let h_apply = |values: &[f64]| -> Result<Vec<f64>> {
        let d1 = d1_uniform_o4(grid, values)?;
        let d2 = d2_uniform_o4(grid, values)?;
        let mut out = vec![0.0; values.len()];
        for (i, &r) in grid.nodes.iter().enumerate() {
            let lap = if r == 0.0 {
                params.nf() * d2[i]
            } else {
                d2[i] + (params.nf() - 1.0) / r * d1[i]
            };
            out[i] = lap + potential_at(r, params) * values[i];
        }
        Ok(out)
    };

    let q: Vec<f64> = grid.nodes.iter().map(|&r| q_at(r, params)).collect();
    let y_norm_sq = simpson_radial(grid, |i, _| y.values[i] * y.values[i])?;
    let hy = h_apply(&y.values)?;
    let e0_consistent = -simpson_radial(grid, |i, _| -hy[i] * y.values[i])? / y_norm_sq;

    let mut u = q.clone();
    for i in 0..u.len() {
        u[i] += a * y.values[i];
        if let Some(e) = eps {
            u[i] += e.values[i];
        }
    }
    let lhs = energy_of(&u)?;
    let e_q = energy_of(&q)?;
    let mut rhs = e_q - 0.5 * e0_consistent * a * a * y_norm_sq;
    if let Some(e) = eps {
        let he = h_apply(&e.values)?;
        rhs += 0.5 * simpson_radial(grid, |i, _| -he[i] * e.values[i])?;
    }
    // Compare increments, not totals: the identity content is the expansion
    // around E[Q].
    Ok(IdentityReport::new(
        "energy_expansion",
        lhs - e_q,
        rhs - e_q,
        tolerance,
    ))
}

/// Absolute defect of the energy expansion (for scaling-exponent fits).
pub fn energy_expansion_defect(y: &RadialField, a: f64, eps: Option<&RadialField>) -> Result<f64> {
    let rep = energy_expansion_check(y, a, eps, 1.0)?;
    Ok(rep.abs_defect)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyBatch {
    pub reports: Vec<IdentityReport>,
    pub decay_exponent: f64,
    pub energy_scaling_exponent: f64,
    pub all_pass: bool,
}

/// The standard identity battery on a dedicated uniform grid:
/// the Pohozaev pair on seeded random profiles, the scaling-pairing
/// identity (unstable mode, `Lambda Q`, and a bump), the remainder decay
/// exponent, and the energy-expansion cubic-scaling fit.
pub fn default_suite(
    params: DimensionParams,
    r_max: f64,
    n_points: usize,
    n_random: usize,
    seed: u64,
) -> Result<VerifyBatch> {
    use rand::SeedableRng;
    let grid = crate::grid::make_grid(params, r_max, n_points | 1, Grading::Uniform)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();

    let fixed = GaussianSum::single(1.0, 2.0, 0.6);
    reports.extend(pohozaev_check(&fixed, &grid, 1e-6)?);
    for _ in 0..n_random {
        let bump = GaussianSum::random(&mut rng, 0.5 * r_max);
        reports.extend(pohozaev_check(&bump, &grid, 1e-6)?);
        reports.push(lambda_commutator_check(&bump, &grid, 1e-6)?);
    }

    // Unstable mode on the same uniform grid.
    let spec = crate::spectral::SpectralData::compute(
        grid.clone(),
        20.0,
        crate::spectral::EigenOptions::default(),
    )?;
    reports.push(lambda_commutator_check_field(&spec.y, 1e-8)?);
    let lam_profile = LambdaQProfile { params };
    reports.push(lambda_commutator_check(&lam_profile, &grid, 1e-8)?);

    let decay_exponent = remainder_decay_exponent(params, 0.2 * r_max, 0.5 * r_max);

    // Cubic scaling of the expansion defect over an amplitude ladder.
    let amplitudes = [1e-2, 5e-3, 2.5e-3];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &a in &amplitudes {
        let d = energy_expansion_defect(&spec.y, a, None)?;
        if d > 0.0 {
            xs.push(a.ln());
            ys.push(d.ln());
        }
    }
    let energy_scaling_exponent = fit_slope(&xs, &ys).unwrap_or(0.0);
    reports.push(energy_expansion_check(&spec.y, 1e-2, None, 1e-4)?);

    let all_pass = reports.iter().all(|r| r.pass)
        && decay_exponent <= -(params.nf() - 0.2)
        && (energy_scaling_exponent - (params.p + 1.0)).abs() <= 0.2;
    Ok(VerifyBatch {
        reports,
        decay_exponent,
        energy_scaling_exponent,
        all_pass,
    })
}
