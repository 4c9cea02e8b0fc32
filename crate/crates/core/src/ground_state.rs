use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{grad_sq, integrate, RadialField};
use crate::grid::RadialGrid;
use crate::params::DimensionParams;

/// `Q(r) = (1 + r^2 / (n(n-2)))^{-(n-2)/2}`, the explicit positive solution
/// of `-Delta Q = Q^p` at the critical exponent. `Q(0) = 1`.
pub fn q_at(r: f64, params: DimensionParams) -> f64 {
    let s = r * r / params.core_scale_sq();
    (1.0 + s).powf(-params.scaling_power())
}

/// `Q'(r) = -(r / n) (1 + s)^{-n/2}` with `s = r^2 / (n(n-2))`.
pub fn q_prime_at(r: f64, params: DimensionParams) -> f64 {
    let s = r * r / params.core_scale_sq();
    -(r / params.nf()) * (1.0 + s).powf(-params.nf() / 2.0)
}

/// Scaling generator `Lambda Q = (n-2)/2 Q + r Q' = nu (1-s)(1+s)^{-n/2}`.
/// Vanishes exactly at `r = sqrt(n(n-2))`.
pub fn lambda_q_at(r: f64, params: DimensionParams) -> f64 {
    let s = r * r / params.core_scale_sq();
    params.scaling_power() * (1.0 - s) * (1.0 + s).powf(-params.nf() / 2.0)
}

/// `r d/dr (Lambda Q)` in closed form.
pub fn r_dr_lambda_q_at(r: f64, params: DimensionParams) -> f64 {
    let n = params.nf();
    let s = r * r / params.core_scale_sq();
    -(n - 2.0) * s * (1.0 + s).powf(-n / 2.0 - 1.0) * ((1.0 + s) + 0.5 * n * (1.0 - s))
}

/// Remainder profile of the scaling-pairing identity
/// `(Lambda v, Lambda Q)_2 = (n-6)/2 (v, Lambda Q)_2 + (v, R)_2`:
/// `R = -(n-2) Lambda Q - r d_r Lambda Q`, computed symbolically so identity
/// tests see quadrature error only. Decays like `r^{-n}`.
pub fn commutator_remainder_at(r: f64, params: DimensionParams) -> f64 {
    -(params.nf() - 2.0) * lambda_q_at(r, params) - r_dr_lambda_q_at(r, params)
}

/// `V(r) = p Q^{p-1}`, the linearization potential.
pub fn potential_at(r: f64, params: DimensionParams) -> f64 {
    params.p * q_at(r, params).powf(params.p - 1.0)
}

/// `V'(r) = p (p-1) Q^{p-2} Q'`.
pub fn potential_prime_at(r: f64, params: DimensionParams) -> f64 {
    params.p * (params.p - 1.0) * q_at(r, params).powf(params.p - 2.0) * q_prime_at(r, params)
}

pub fn q_field(grid: Arc<RadialGrid>) -> RadialField {
    let params = grid.params;
    RadialField::from_fn(grid, move |r| q_at(r, params))
}

/// `Lambda Q` sampled from the closed form (never by stencil differentiation).
pub fn lambda_q(grid: Arc<RadialGrid>) -> RadialField {
    let params = grid.params;
    RadialField::from_fn(grid, move |r| lambda_q_at(r, params))
}

/// `lambda^{-(n-2)/2} Q(r / lambda)` sampled from the closed form.
pub fn rescaled_q(grid: Arc<RadialGrid>, lambda: f64) -> Result<RadialField> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rescale needs lambda > 0, got {lambda}"
        )));
    }
    let params = grid.params;
    let amp = lambda.powf(-params.scaling_power());
    Ok(RadialField::from_fn(grid, move |r| {
        amp * q_at(r / lambda, params)
    }))
}

/// One-parameter dilation family of ground states (radial sector, no shift).
#[derive(Debug, Clone, Copy)]
pub struct GroundStateFamily {
    pub params: DimensionParams,
    pub lambda: f64,
}

impl GroundStateFamily {
    pub fn new(params: DimensionParams, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ground-state scale must be positive, got {lambda}"
            )));
        }
        Ok(Self { params, lambda })
    }

    /// Member value at radius `r`; at `r = 0` equals `lambda^{-(n-2)/2}`.
    pub fn member_at(&self, r: f64) -> f64 {
        self.lambda.powf(-self.params.scaling_power()) * q_at(r / self.lambda, self.params)
    }

    pub fn member(&self, grid: Arc<RadialGrid>) -> RadialField {
        let me = *self;
        RadialField::from_fn(grid, move |r| me.member_at(r))
    }
}

/// `E[u] = 1/2 ||grad u||_2^2 - 1/(p+1) ||u||_{p+1}^{p+1}`.
pub fn energy(u: &RadialField, params: DimensionParams) -> f64 {
    let kinetic = 0.5 * grad_sq(u);
    let potential = integrate(&u.grid, |i| params.abs_power_p1(u.values[i]));
    kinetic - potential / (params.p + 1.0)
}

/// Nehari functional `I[u] = -||grad u||_2^2 + ||u||_{p+1}^{p+1}`. Its sign,
/// with an energy bound, separates decay from blowup.
pub fn nehari(u: &RadialField, params: DimensionParams) -> f64 {
    let potential = integrate(&u.grid, |i| params.abs_power_p1(u.values[i]));
    -grad_sq(u) + potential
}

/// Stationary state of the discretized flow: Newton-solve
/// `Delta_h u + |u|^{p-1} u = 0` starting from the sampled `Q`.
///
/// The sampled closed form leaves an `O(h^2)` residual that slowly forces
/// the unstable mode; experiments that measure small-amplitude dynamics
/// (instability rates, threshold bisection) start from this refined state
/// so the forcing sits at the solver floor instead.
pub fn discrete_ground_state(grid: Arc<RadialGrid>, tol: f64, max_iter: usize) -> Result<RadialField> {
    use crate::spectral::assemble_laplacian;
    use crate::tridiag::{solve_shifted, SymTridiag};
    let params = grid.params;
    let lap = assemble_laplacian(grid.clone());
    let lap_sym = lap.weighted_symmetric();
    let m = lap.active_len();
    let n = grid.len();
    let sqrt_w: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let mut u = q_field(grid.clone());
    if m < n {
        u.values[n - 1] = 0.0;
    }
    let mut residual = vec![0.0; n];
    for _ in 0..max_iter {
        lap.apply_into(&u.values, &mut residual);
        for i in 0..m {
            residual[i] += params.nonlinearity(u.values[i]);
        }
        let res_norm = {
            let mut acc = 0.0;
            for i in 0..m {
                acc += grid.weights[i] * residual[i] * residual[i];
            }
            acc.sqrt()
        };
        if res_norm <= tol {
            return Ok(u);
        }
        // Weighted-symmetric Jacobian H = L + diag(f'(u)).
        let jac = SymTridiag {
            diag: (0..m)
                .map(|i| lap_sym.diag[i] + params.nonlinearity_prime(u.values[i]))
                .collect(),
            off: lap_sym.off.clone(),
        };
        let rhs: Vec<f64> = (0..m).map(|i| sqrt_w[i] * residual[i]).collect();
        let delta = solve_shifted(&jac, 0.0, &rhs)?;
        for i in 0..m {
            u.values[i] -= delta[i] / sqrt_w[i];
        }
    }
    Err(Error::InvalidArgument(
        "discrete ground state did not converge".into(),
    ))
}

/// Measured vs first-order-predicted dilation distance on the ground-state
/// family: `measured = ||Q - k^{(n-2)/2} Q(k .)||_{H1dot}`,
/// `predicted = |k - 1| ||Lambda Q||_{H1dot}`. The remainder is O(|k-1|^{3/2}),
/// so the ratio tends to 1 as k -> 1.
pub fn manifold_metric_check(k: f64, grid: Arc<RadialGrid>) -> Result<(f64, f64)> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dilation factor must be positive, got {k}"
        )));
    }
    let params = grid.params;
    let nu = params.scaling_power();
    let diff = RadialField::from_fn(grid.clone(), move |r| {
        q_at(r, params) - k.powf(nu) * q_at(k * r, params)
    });
    let measured = grad_sq(&diff).sqrt();
    let lam_q = lambda_q(grid);
    let predicted = (k - 1.0).abs() * grad_sq(&lam_q).sqrt();
    Ok((measured, predicted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grading};

    fn reference_grid() -> Arc<RadialGrid> {
        let params = DimensionParams::reference();
        make_grid(params, 200.0, 4096, Grading::Geometric { stretch: 60.0 }).unwrap()
    }

    #[test]
    fn q_closed_form_values() {
        let params = DimensionParams::reference();
        assert_eq!(q_at(0.0, params), 1.0);
        let v = q_at(24.0f64.sqrt(), params);
        assert!((v - 0.25).abs() < 1e-14, "Q(sqrt(24)) = {v}");
        // r^4 Q(r) -> (n(n-2))^2 = 576 at n = 6.
        let r: f64 = 1e6;
        let tail = r.powi(4) * q_at(r, params);
        assert!((tail - 576.0).abs() < 1e-6, "tail limit {tail}");
    }

    #[test]
    fn lambda_q_origin_and_sign_change() {
        let params = DimensionParams::reference();
        assert_eq!(lambda_q_at(0.0, params), 2.0);
        let rc = 24.0f64.sqrt();
        assert!(lambda_q_at(rc - 1e-9, params) > 0.0);
        assert!(lambda_q_at(rc + 1e-9, params) < 0.0);
        assert!(lambda_q_at(rc, params).abs() < 1e-15);
    }

    #[test]
    fn member_value_at_origin() {
        let params = DimensionParams::reference();
        for lambda in [0.5, 1.0, 2.0] {
            let fam = GroundStateFamily::new(params, lambda).unwrap();
            let expect = lambda.powf(-2.0);
            assert!((fam.member_at(0.0) - expect).abs() <= 1e-15 * expect);
        }
    }

    #[test]
    fn q_is_square_integrable_with_positive_mass() {
        let grid = reference_grid();
        let q = q_field(grid);
        let qq = crate::field::inner_product(&q, &q).unwrap();
        assert!(qq.is_finite() && qq > 0.0);
        // High-resolution reference on the same domain.
        let params = DimensionParams::reference();
        let fine = make_grid(params, 200.0, 65536, Grading::Geometric { stretch: 60.0 }).unwrap();
        let qf = q_field(fine);
        let qq_fine = crate::field::inner_product(&qf, &qf).unwrap();
        assert!(
            (qq - qq_fine).abs() <= 2e-5 * qq_fine,
            "coarse {qq} vs fine {qq_fine}"
        );
    }

    #[test]
    fn energy_of_q_matches_pohozaev_relation() {
        // Stationarity pairs ||grad Q||^2 with int Q^3, so E[Q] = (1/6) int Q^3.
        let grid = reference_grid();
        let params = grid.params;
        let q = q_field(grid.clone());
        let e = energy(&q, params);
        let cubic = integrate(&grid, |i| q.values[i].powi(3));
        assert!(
            (e - cubic / 6.0).abs() <= 2e-4 * cubic / 6.0,
            "E[Q] = {e}, int Q^3 / 6 = {}",
            cubic / 6.0
        );
        assert_eq!(energy(&RadialField::zeros(grid), params), 0.0);
    }

    #[test]
    fn energy_scaling_invariance() {
        let grid = reference_grid();
        let params = grid.params;
        let e1 = energy(&q_field(grid.clone()), params);
        for lambda in [0.5, 2.0] {
            let e = energy(&rescaled_q(grid.clone(), lambda).unwrap(), params);
            assert!(
                (e - e1).abs() <= 5e-4 * e1.abs(),
                "E at lambda {lambda}: {e} vs {e1}"
            );
        }
    }

    #[test]
    fn gradient_norm_scaling_invariance() {
        let grid = reference_grid();
        let g1 = grad_sq(&q_field(grid.clone())).sqrt();
        for lambda in [0.5, 2.0] {
            let g = grad_sq(&rescaled_q(grid.clone(), lambda).unwrap()).sqrt();
            assert!(
                (g - g1).abs() <= 5e-4 * g1,
                "grad norm at {lambda}: {g} vs {g1}"
            );
        }
    }

    #[test]
    fn nehari_vanishes_on_q_and_zero() {
        let grid = reference_grid();
        let params = grid.params;
        let q = q_field(grid.clone());
        let i_q = nehari(&q, params);
        let scale = grad_sq(&q);
        assert!(i_q.abs() <= 2e-4 * scale, "I[Q] = {i_q} vs scale {scale}");
        assert_eq!(nehari(&RadialField::zeros(grid), params), 0.0);
    }

    #[test]
    fn nehari_energy_algebraic_identity() {
        // I[u] = -2 E[u] + (1 - 2/(p+1)) ||u||_{p+1}^{p+1} for any field.
        let grid = reference_grid();
        let params = grid.params;
        let u = RadialField::from_fn(grid.clone(), |r| (1.0 + r).powi(-3) * (1.0 - 0.3 * r));
        let lhs = nehari(&u, params);
        let pot = integrate(&grid, |i| params.abs_power_p1(u.values[i]));
        let rhs = -2.0 * energy(&u, params) + (1.0 - 2.0 / (params.p + 1.0)) * pot;
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()));
    }

    #[test]
    fn manifold_metric_first_order() {
        let grid = reference_grid();
        let (m0, p0) = manifold_metric_check(1.0, grid.clone()).unwrap();
        assert_eq!(p0, 0.0);
        assert!(m0 <= 1e-12);

        let (m1, p1) = manifold_metric_check(1.01, grid.clone()).unwrap();
        let (m2, p2) = manifold_metric_check(1.1, grid.clone()).unwrap();
        let d1 = (m1 / p1 - 1.0).abs();
        let d2 = (m2 / p2 - 1.0).abs();
        // Remainder is O(|k-1|^{3/2}), so deviation shrinks with |k-1| and
        // stays within a sqrt-scale band of 1.
        assert!(d1 < d2, "deviation at 1.01 = {d1}, at 1.1 = {d2}");
        assert!(d1 <= 1.0 * 0.01f64.sqrt(), "ratio deviation {d1}");
        assert!(manifold_metric_check(-0.5, grid).is_err());
    }

    #[test]
    fn commutator_remainder_closed_form_n6() {
        // At n = 6 the remainder reduces to 8(2s - 1)(1 + s)^{-4}.
        let params = DimensionParams::reference();
        for r in [0.0f64, 0.7, 3.0, 11.0, 60.0] {
            let s: f64 = r * r / 24.0;
            let expect = 8.0 * (2.0 * s - 1.0) * (1.0 + s).powi(-4);
            let got = commutator_remainder_at(r, params);
            assert!(
                (got - expect).abs() <= 1e-13 * (1.0 + expect.abs()),
                "R({r}) = {got} vs {expect}"
            );
        }
        // Decay exponent n: fit log|R| against log r once r^2/24 >> 1.
        // (On [10, 100] the exact profile still reads ~5.6; the asymptotic
        // exponent only emerges past r ~ 40.)
        let lo = commutator_remainder_at(40.0, params).abs();
        let hi = commutator_remainder_at(100.0, params).abs();
        let slope = (hi / lo).ln() / (100.0f64 / 40.0).ln();
        assert!(slope <= -(6.0 - 0.2), "decay slope {slope}");
    }
}
