use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{grad_sq, inner_product, norm, NormKind, RadialField};
use crate::grid::{BoundaryCondition, RadialGrid};
use crate::ground_state::{lambda_q, potential_at};
use crate::params::DimensionParams;
use crate::tridiag::{largest_eigenpair, SymTridiag};

/// Tridiagonal action of a radial operator `Delta + V` in node space with a
/// Dirichlet wall at `r_max` (last row is zero; fields in the domain vanish
/// there).
///
/// The Laplacian rows are in flux form on the quadrature cells, which makes
/// the operator exactly symmetric under the grid inner product.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    pub grid: Arc<RadialGrid>,
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl RadialOperator {
    pub fn apply(&self, f: &RadialField) -> Result<RadialField> {
        if !f.grid.same_grid(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![0.0; f.len()];
        self.apply_into(&f.values, &mut out);
        RadialField::new(self.grid.clone(), out)
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        for i in 0..n {
            let mut v = self.diag[i] * f[i];
            if i > 0 {
                v += self.sub[i] * f[i - 1];
            }
            if i + 1 < n {
                v += self.sup[i] * f[i + 1];
            }
            out[i] = v;
        }
    }

    /// `(A v, v)` under the grid inner product.
    pub fn quadratic_form(&self, v: &RadialField) -> Result<f64> {
        let av = self.apply(v)?;
        inner_product(&av, v)
    }

    /// Number of evolving unknowns: the wall node is eliminated under a
    /// Dirichlet boundary, kept under the decay-matched flux.
    pub fn active_len(&self) -> usize {
        match self.grid.boundary {
            BoundaryCondition::Dirichlet => self.grid.len() - 1,
            BoundaryCondition::DecayMatched => self.grid.len(),
        }
    }

    /// Similarity-transformed symmetric tridiagonal over the active nodes.
    pub fn weighted_symmetric(&self) -> SymTridiag {
        let m = self.active_len();
        let w = &self.grid.weights;
        let mut diag = Vec::with_capacity(m);
        let mut off = Vec::with_capacity(m - 1);
        for i in 0..m {
            diag.push(self.diag[i]);
            if i + 1 < m {
                off.push(self.sup[i] * (w[i] / w[i + 1]).sqrt());
            }
        }
        SymTridiag { diag, off }
    }
}

/// Flux-form radial Laplacian plus an arbitrary potential on the nodes.
///
/// The outer row depends on the grid's boundary condition: zero for a
/// Dirichlet wall (fields in the domain vanish there), or the harmonic
/// decay-matched flux `u'(R) = -(n-2) u(R) / R` folded into the last cell.
pub fn assemble_with_potential(
    grid: Arc<RadialGrid>,
    potential: impl Fn(f64) -> f64,
) -> RadialOperator {
    let n = grid.len();
    let omega = grid.params.sphere_area();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n - 1 {
        let vol = grid.weights[i] / omega;
        let up = grid.face_areas[i] / ((grid.nodes[i + 1] - grid.nodes[i]) * vol);
        let lo = if i > 0 {
            grid.face_areas[i - 1] / ((grid.nodes[i] - grid.nodes[i - 1]) * vol)
        } else {
            0.0
        };
        sub[i] = lo;
        sup[i] = up;
        diag[i] = -(lo + up) + potential(grid.nodes[i]);
    }
    if grid.boundary == BoundaryCondition::DecayMatched {
        let i = n - 1;
        let vol = grid.weights[i] / omega;
        let h = grid.nodes[i] - grid.nodes[i - 1];
        let lo = grid.face_areas[i - 1] / (h * vol);
        let r = grid.r_max();
        let outflux = (grid.params.nf() - 2.0) * r.powi(grid.params.n as i32 - 2) / vol;
        sub[i] = lo;
        diag[i] = -(lo + outflux) + potential(r);
    }
    RadialOperator {
        grid,
        sub,
        diag,
        sup,
    }
}

/// The bare radial Laplacian (used by the time stepper; identical bands to
/// the linearized operator minus its potential).
pub fn assemble_laplacian(grid: Arc<RadialGrid>) -> RadialOperator {
    assemble_with_potential(grid, |_| 0.0)
}

/// `H = Delta + p Q^{p-1}` on the grid.
pub fn assemble(grid: Arc<RadialGrid>) -> RadialOperator {
    let params = grid.params;
    assemble_with_potential(grid, move |r| potential_at(r, params))
}

/// Smooth cutoff profile: 1 below `m`, 0 above `2 m`, monotone between.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CutoffSpec {
    pub m: f64,
}

impl CutoffSpec {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff scale must exceed 1, got {m}"
            )));
        }
        Ok(Self { m })
    }

    pub fn chi(&self, r: f64) -> f64 {
        let xi = r.abs() / self.m;
        if xi <= 1.0 {
            1.0
        } else if xi >= 2.0 {
            0.0
        } else {
            let up = smooth_step(2.0 - xi);
            let dn = smooth_step(xi - 1.0);
            up / (up + dn)
        }
    }
}

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Unstable eigenpair together with the modified kernel direction and the
/// handful of paired quantities every downstream module needs.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub grid: Arc<RadialGrid>,
    /// Positive unstable eigenvalue: `H y = e0 y`.
    pub e0: f64,
    /// Unstable mode, positive, `||y||_2 = 1`.
    pub y: RadialField,
    /// `psi0 = chi_M Lambda Q - (chi_M Lambda Q, y) y`, orthogonal to `y`.
    pub psi0: RadialField,
    pub cutoff: CutoffSpec,
    /// `||H y - e0 y||_2` on the grid.
    pub eigen_residual: f64,
    /// `||grad y||_2`.
    pub y_grad_l2: f64,
    /// `(Lambda Q, psi0)_2`, the modulation pivot; must be positive.
    pub lambda_q_psi0: f64,
    /// `||psi0||_2`.
    pub psi0_l2: f64,
}

/// Eigensolver configuration.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 400,
        }
    }
}

/// Ground (unstable) eigenpair of `H`: the unique positive eigenvalue and
/// its positive, L2-normalized eigenfunction.
pub fn ground_eigenpair(op: &RadialOperator, opts: EigenOptions) -> Result<(f64, RadialField)> {
    let sym = op.weighted_symmetric();
    let (e0, vec) = largest_eigenpair(&sym, opts.tol, opts.max_iter)?;
    if !(e0 > 0.0) {
        return Err(Error::EigenFailure(format!(
            "largest eigenvalue {e0} is not positive; grid too coarse or wrong potential"
        )));
    }
    let n = op.grid.len();
    let m = op.active_len();
    let mut values = Vec::with_capacity(n);
    for i in 0..m {
        values.push(vec[i] / op.grid.weights[i].sqrt());
    }
    while values.len() < n {
        values.push(0.0);
    }
    let mut y = RadialField::new(op.grid.clone(), values)?;
    let l2 = norm(&y, NormKind::L2)?;
    for v in y.values.iter_mut() {
        *v /= l2;
    }
    if y.values[0] < 0.0 {
        for v in y.values.iter_mut() {
            *v = -*v;
        }
    }
    // The ground mode must be single-signed. Values in the far tail sit
    // below the eigensolver noise floor, so only components above it count;
    // a macroscopic negative part signals a discretization too coarse to
    // separate the mode from the rest of the spectrum.
    let peak = y.values.iter().fold(0.0f64, |mx, &v| mx.max(v.abs()));
    let floor = 1e-9 * peak;
    if y.values[..m].iter().any(|&v| v <= -floor) {
        return Err(Error::EigenFailure(
            "sign-indefinite ground candidate".into(),
        ));
    }
    Ok((e0, y))
}

/// Build `psi0` from a normalized unstable mode.
pub fn build_psi0(y: &RadialField, cutoff: CutoffSpec) -> Result<RadialField> {
    let l2 = norm(y, NormKind::L2)?;
    if (l2 - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "psi0 needs a normalized mode, got ||y|| = {l2}"
        )));
    }
    let mut chi_lam = lambda_q(y.grid.clone());
    for (v, &r) in chi_lam.values.iter_mut().zip(&y.grid.nodes) {
        *v *= cutoff.chi(r);
    }
    let proj = inner_product(&chi_lam, y)?;
    chi_lam.axpy(-proj, y)
}

impl SpectralData {
    pub fn compute(grid: Arc<RadialGrid>, cutoff_m: f64, opts: EigenOptions) -> Result<Self> {
        let cutoff = CutoffSpec::new(cutoff_m)?;
        let op = assemble(grid.clone());
        let (e0, y) = ground_eigenpair(&op, opts)?;
        let hy = op.apply(&y)?;
        let resid = hy.axpy(-e0, &y)?;
        let eigen_residual = norm(&resid, NormKind::L2)?;
        let psi0 = build_psi0(&y, cutoff)?;
        let lam_q = lambda_q(grid.clone());
        let lambda_q_psi0 = inner_product(&lam_q, &psi0)?;
        if !(lambda_q_psi0 > 0.0) {
            return Err(Error::EigenFailure(format!(
                "degenerate modulation pivot (Lambda Q, psi0) = {lambda_q_psi0}"
            )));
        }
        let y_grad_l2 = grad_sq(&y).sqrt();
        let psi0_l2 = norm(&psi0, NormKind::L2)?;
        Ok(Self {
            grid,
            e0,
            y,
            psi0,
            cutoff,
            eigen_residual,
            y_grad_l2,
            lambda_q_psi0,
            psi0_l2,
        })
    }

    pub fn operator(&self) -> RadialOperator {
        assemble(self.grid.clone())
    }

    /// Least-squares slope of `log y` over `r in [r_lo, r_hi]`; exponential
    /// decay shows up as a slope at least as steep as `-sqrt(e0)`.
    pub fn decay_fit(&self, r_lo: f64, r_hi: f64) -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, &r) in self.grid.nodes.iter().enumerate() {
            if r >= r_lo && r <= r_hi && self.y.values[i] > 0.0 {
                xs.push(r);
                ys.push(self.y.values[i].ln());
            }
        }
        fit_slope(&xs, &ys)
    }
}

pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// One row of a coercivity probe.
#[derive(Debug, Clone, Serialize)]
pub struct CoercivityEntry {
    /// `(-H v, v) / ||grad v||^2`.
    pub form_ratio: f64,
    /// `||H v||^2 / ||Delta v||^2`.
    pub h2_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub entries: Vec<CoercivityEntry>,
    pub form_min: f64,
    pub form_max: f64,
    pub h2_min: f64,
    pub h2_max: f64,
}

/// Measure the coercivity sandwich on samples from the orthogonal sector
/// `(v, y) = (v, psi0) = 0`. Samples failing the orthogonality precondition
/// (relative residual above `1e-8`) are rejected.
pub fn coercivity_probe(spec: &SpectralData, samples: &[RadialField]) -> Result<CoercivityReport> {
    let op = spec.operator();
    let lap = assemble_laplacian(spec.grid.clone());
    let mut entries = Vec::with_capacity(samples.len());
    for v in samples {
        let l2 = norm(v, NormKind::L2)?;
        if l2 == 0.0 {
            return Err(Error::InvalidArgument("zero probe sample".into()));
        }
        let py = inner_product(v, &spec.y)?;
        let pp = inner_product(v, &spec.psi0)?;
        if py.abs() > 1e-8 * l2 || pp.abs() > 1e-8 * l2 * spec.psi0_l2 {
            return Err(Error::InvalidArgument(format!(
                "probe sample outside the orthogonal sector: (v,Y)={py}, (v,Psi0)={pp}"
            )));
        }
        let gsq = grad_sq(v);
        let hv = op.apply(v)?;
        let minus_form = -inner_product(&hv, v)?;
        let lv = lap.apply(v)?;
        let h2 = inner_product(&hv, &hv)?;
        let d2 = inner_product(&lv, &lv)?;
        entries.push(CoercivityEntry {
            form_ratio: minus_form / gsq,
            h2_ratio: h2 / d2,
        });
    }
    let form_min = entries.iter().map(|e| e.form_ratio).fold(f64::INFINITY, f64::min);
    let form_max = entries
        .iter()
        .map(|e| e.form_ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let h2_min = entries.iter().map(|e| e.h2_ratio).fold(f64::INFINITY, f64::min);
    let h2_max = entries
        .iter()
        .map(|e| e.h2_ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CoercivityReport {
        entries,
        form_min,
        form_max,
        h2_min,
        h2_max,
    })
}

/// Project a field onto the orthogonal complement of `{y, psi0}` in the grid
/// inner product (two Gram-Schmidt sweeps for fp hygiene).
pub fn project_orthogonal(spec: &SpectralData, v: &RadialField) -> Result<RadialField> {
    let psi_norm_sq = inner_product(&spec.psi0, &spec.psi0)?;
    let mut out = v.clone();
    for _ in 0..2 {
        let cy = inner_product(&out, &spec.y)?;
        out = out.axpy(-cy, &spec.y)?;
        let cp = inner_product(&out, &spec.psi0)? / psi_norm_sq;
        out = out.axpy(-cp, &spec.psi0)?;
    }
    Ok(out)
}

/// Independent oracle: ground eigenvalue of `H` by shooting on the radial
/// ODE `phi'' + (n-1)/r phi' + (V - e) phi = 0` with RK4 and bisection on
/// the sign of `phi(r_end)`. Never used on the runtime path.
pub fn shooting_ground_eigenvalue(
    params: DimensionParams,
    r_end: f64,
    h: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let sign_at = |e: f64| -> f64 { shoot_sign(params, e, r_end, h) };
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "shooting bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let flo = sign_at(lo);
    let fhi = sign_at(hi);
    if flo == fhi {
        return Err(Error::EigenFailure(format!(
            "shooting bracket ({lo}, {hi}) does not straddle the eigenvalue"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sign_at(mid) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn shoot_sign(params: DimensionParams, e: f64, r_end: f64, h: f64) -> f64 {
    let n1 = params.nf() - 1.0;
    let rhs = |r: f64, phi: f64, psi: f64| -> (f64, f64) {
        (psi, -n1 / r * psi - (potential_at(r, params) - e) * phi)
    };
    // Series start: phi = 1 + alpha r^2 with 2 n alpha = e - V(0).
    let alpha = (e - potential_at(0.0, params)) / (2.0 * params.nf());
    let mut r = h;
    let mut phi = 1.0 + alpha * r * r;
    let mut psi = 2.0 * alpha * r;
    while r < r_end {
        let step = h.min(r_end - r);
        let (k1p, k1q) = rhs(r, phi, psi);
        let (k2p, k2q) = rhs(r + 0.5 * step, phi + 0.5 * step * k1p, psi + 0.5 * step * k1q);
        let (k3p, k3q) = rhs(r + 0.5 * step, phi + 0.5 * step * k2p, psi + 0.5 * step * k2q);
        let (k4p, k4q) = rhs(r + step, phi + step * k3p, psi + step * k3q);
        phi += step / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        psi += step / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        r += step;
        // Guard against overflow on the growing branch.
        let m = phi.abs().max(psi.abs());
        if m > 1e250 {
            return phi.signum();
        }
    }
    phi.signum()
}
