//! Time integration of `u_t = Delta u + |u|^{p-1} u` for radial data.
//!
//! The stepper is IMEX: Crank-Nicolson for the (stiff) radial diffusion,
//! variable-step Adams-Bashforth 2 for the reaction, second order on smooth
//! solutions. The step size tracks the reaction scale
//! `dt <= safety / (p ||u||_inf^{p-1})` and shrinks toward blowup.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{grad_sq, integrate, RadialField};
use crate::grid::RadialGrid;
use crate::params::DimensionParams;
use crate::spectral::{assemble_laplacian, fit_slope, RadialOperator};
use crate::tridiag::solve_dominant_in_place;

/// Integration controls. The decay floor is relative to the initial
/// sup-norm; the blowup threshold is absolute.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolveControls {
    pub t_max: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    /// Reaction-accuracy cap: `dt <= safety / (p ||u||_inf^{p-1})`.
    pub safety: f64,
    /// Maximum step-size growth ratio between consecutive steps.
    pub dt_growth: f64,
    pub blowup_threshold: f64,
    pub decay_floor: f64,
    /// Record a sample whenever this much time has elapsed...
    pub sample_dt: f64,
    /// ...or whenever `log ||u||_inf` has moved this much.
    pub sample_dlog_sup: f64,
    /// Keep full field snapshots (needed for modulation tracking).
    pub store_fields: bool,
    pub max_steps: usize,
    /// Disable to run the nodewise reaction ODE (oracle runs).
    pub diffusion: bool,
    /// Disable to run pure heat flow (oracle runs).
    pub reaction: bool,
}

impl Default for EvolveControls {
    fn default() -> Self {
        Self {
            t_max: 4000.0,
            dt_init: 1e-3,
            dt_max: 0.5,
            safety: 0.05,
            dt_growth: 1.1,
            blowup_threshold: 1e6,
            decay_floor: 1e-6,
            sample_dt: 0.1,
            sample_dlog_sup: 0.02,
            store_fields: true,
            max_steps: 20_000_000,
            diffusion: true,
            reaction: true,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    ReachedHorizon,
    BlowupDetected,
    DecayedBelowFloor,
    StepFailure(String),
}

/// One recorded sample of the evolution.
#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    pub dt: f64,
    pub sup: f64,
    pub grad_l2: f64,
    pub l2: f64,
    pub energy: f64,
    pub nehari: f64,
    /// Cumulative `int_0^t ||u_t||_2^2 dt`, accumulated every step.
    pub dissipation: f64,
    #[serde(skip)]
    pub field: Option<Vec<f64>>,
}

/// Recorded evolution with its summary series and termination event.
#[derive(Debug)]
pub struct Trajectory {
    pub grid: Arc<RadialGrid>,
    pub params: DimensionParams,
    pub controls: EvolveControls,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub steps: usize,
    /// Most negative value seen anywhere (positivity monitor).
    pub min_value: f64,
    /// Largest energy increase between consecutive samples.
    pub max_energy_increment: f64,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn initial_sup(&self) -> f64 {
        self.samples.first().expect("trajectory has samples").sup
    }

    pub fn field_at(&self, index: usize) -> Option<RadialField> {
        self.samples[index].field.as_ref().map(|v| RadialField {
            grid: self.grid.clone(),
            values: v.clone(),
        })
    }
}

struct Workspace {
    lap: RadialOperator,
    lu: Vec<f64>,
    f_cur: Vec<f64>,
    f_prev: Vec<f64>,
    rhs: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup_band: Vec<f64>,
    scratch: Vec<f64>,
    udot: Vec<f64>,
}

impl Workspace {
    fn new(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Workspace {
            lap: assemble_laplacian(grid),
            lu: vec![0.0; n],
            f_cur: vec![0.0; n],
            f_prev: vec![0.0; n],
            rhs: vec![0.0; n],
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup_band: vec![0.0; n],
            scratch: vec![0.0; n],
            udot: vec![0.0; n],
        }
    }
}

fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

fn weighted_norm_sq(grid: &RadialGrid, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..values.len() {
        acc += grid.weights[i] * (values[i] * values[i]);
    }
    acc
}

/// One IMEX step `u -> u_new` over `dt`, given the previous reaction values
/// for the AB2 extrapolation (`rho = dt / dt_prev`). Returns false when the
/// linear solve or the state goes bad.
#[allow(clippy::too_many_arguments)]
fn imex_step(
    ws: &mut Workspace,
    params: DimensionParams,
    controls: &EvolveControls,
    u: &mut [f64],
    dt: f64,
    rho: f64,
    first: bool,
) -> Result<()> {
    let n = u.len();
    let grid = ws.lap.grid.clone();
    if controls.reaction {
        for i in 0..n {
            ws.f_cur[i] = params.nonlinearity(u[i]);
        }
    } else {
        ws.f_cur.iter_mut().for_each(|v| *v = 0.0);
    }
    let (c_cur, c_prev) = if first {
        (1.0, 0.0)
    } else {
        (1.0 + 0.5 * rho, -0.5 * rho)
    };
    if controls.diffusion {
        ws.lap.apply_into(u, &mut ws.lu);
        for i in 0..n {
            ws.rhs[i] = u[i]
                + 0.5 * dt * ws.lu[i]
                + dt * (c_cur * ws.f_cur[i] + c_prev * ws.f_prev[i]);
        }
        // (I - dt/2 L) u_new = rhs over the active rows.
        let m = ws.lap.active_len();
        for i in 0..m {
            ws.sub[i] = -0.5 * dt * ws.lap.sub[i];
            ws.diag[i] = 1.0 - 0.5 * dt * ws.lap.diag[i];
            ws.sup_band[i] = -0.5 * dt * ws.lap.sup[i];
        }
        solve_dominant_in_place(
            &ws.sub[..m],
            &ws.diag[..m],
            &ws.sup_band[..m],
            &mut ws.rhs[..m],
            &mut ws.scratch[..m],
        )?;
        u[..m].copy_from_slice(&ws.rhs[..m]);
        if m < n {
            u[n - 1] = 0.0;
        }
    } else {
        for i in 0..n {
            u[i] += dt * (c_cur * ws.f_cur[i] + c_prev * ws.f_prev[i]);
        }
    }
    let _ = grid;
    std::mem::swap(&mut ws.f_cur, &mut ws.f_prev);
    Ok(())
}

/// `||u_t||_2^2` with `u_t = Delta u + f(u)` evaluated discretely.
fn udot_norm_sq(ws: &mut Workspace, params: DimensionParams, controls: &EvolveControls, u: &[f64]) -> f64 {
    let m = ws.lap.active_len();
    if controls.diffusion {
        ws.lap.apply_into(u, &mut ws.udot);
    } else {
        ws.udot.iter_mut().for_each(|v| *v = 0.0);
    }
    if controls.reaction {
        for i in 0..m {
            ws.udot[i] += params.nonlinearity(u[i]);
        }
    }
    if m < u.len() {
        ws.udot[u.len() - 1] = 0.0;
    }
    weighted_norm_sq(&ws.lap.grid, &ws.udot)
}

fn record_sample(
    grid: &Arc<RadialGrid>,
    params: DimensionParams,
    controls: &EvolveControls,
    t: f64,
    dt: f64,
    u: &[f64],
    dissipation: f64,
    samples: &mut Vec<Sample>,
) {
    let field = RadialField {
        grid: grid.clone(),
        values: u.to_vec(),
    };
    let pot = integrate(grid, |i| params.abs_power_p1(u[i]));
    let gsq = grad_sq(&field);
    let energy = 0.5 * gsq - pot / (params.p + 1.0);
    let nehari = -gsq + pot;
    samples.push(Sample {
        t,
        dt,
        sup: sup_norm(u),
        grad_l2: gsq.max(0.0).sqrt(),
        l2: weighted_norm_sq(grid, u).sqrt(),
        energy,
        nehari,
        dissipation,
        field: if controls.store_fields {
            Some(u.to_vec())
        } else {
            None
        },
    });
}

/// Integrate from `initial` until an event fires.
pub fn evolve(initial: &RadialField, controls: EvolveControls) -> Result<Trajectory> {
    if !initial.is_finite() {
        return Err(Error::InvalidArgument("nonfinite initial data".into()));
    }
    if !(controls.t_max > 0.0 && controls.dt_init > 0.0 && controls.safety > 0.0) {
        return Err(Error::InvalidArgument("nonpositive time controls".into()));
    }
    let grid = initial.grid.clone();
    let params = grid.params;
    let n = grid.len();
    let mut u = initial.values.clone();
    if grid.boundary == crate::grid::BoundaryCondition::Dirichlet {
        u[n - 1] = 0.0;
    }
    let mut ws = Workspace::new(grid.clone());
    // Seed the AB2 history with f(u0).
    if controls.reaction {
        for i in 0..n {
            ws.f_prev[i] = params.nonlinearity(u[i]);
        }
    }

    let sup0 = sup_norm(&u);
    let mut samples = Vec::new();
    let mut dissipation = 0.0;
    let mut prev_udot_sq = udot_norm_sq(&mut ws, params, &controls, &u);
    record_sample(
        &grid,
        params,
        &controls,
        0.0,
        controls.dt_init,
        &u,
        dissipation,
        &mut samples,
    );

    let mut t = 0.0;
    let mut dt_prev = controls.dt_init;
    let mut min_value = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut last_sample_t = 0.0;
    let mut last_sample_logsup = sup0.max(f64::MIN_POSITIVE).ln();
    let mut termination = Termination::ReachedHorizon;
    let mut steps = 0usize;
    let mut first = true;

    while t < controls.t_max {
        let sup = sup_norm(&u);
        let reaction_scale = params.p * sup.powf(params.p - 1.0);
        let mut dt = controls
            .dt_max
            .min(dt_prev * controls.dt_growth)
            .min(if reaction_scale > 0.0 && controls.reaction {
                controls.safety / reaction_scale
            } else {
                controls.dt_max
            });
        if t + dt > controls.t_max {
            dt = controls.t_max - t;
        }
        if dt <= 1e-15 * t.max(1.0) {
            termination = Termination::StepFailure("step size collapsed".into());
            break;
        }
        let rho = if first { 1.0 } else { dt / dt_prev };
        let backup = u.clone();
        match imex_step(&mut ws, params, &controls, &mut u, dt, rho, first) {
            Ok(()) => {}
            Err(e) => {
                u = backup;
                termination = Termination::StepFailure(e.to_string());
                break;
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            u = backup;
            termination = Termination::StepFailure("nonfinite state".into());
            break;
        }
        t += dt;
        dt_prev = dt;
        first = false;
        steps += 1;

        let cur_udot_sq = udot_norm_sq(&mut ws, params, &controls, &u);
        dissipation += 0.5 * dt * (prev_udot_sq + cur_udot_sq);
        prev_udot_sq = cur_udot_sq;

        let sup_new = sup_norm(&u);
        min_value = min_value.min(u.iter().cloned().fold(f64::INFINITY, f64::min));

        let log_sup = sup_new.max(f64::MIN_POSITIVE).ln();
        if t - last_sample_t >= controls.sample_dt
            || (log_sup - last_sample_logsup).abs() >= controls.sample_dlog_sup
        {
            record_sample(&grid, params, &controls, t, dt, &u, dissipation, &mut samples);
            last_sample_t = t;
            last_sample_logsup = log_sup;
        }

        if sup_new >= controls.blowup_threshold {
            termination = Termination::BlowupDetected;
            break;
        }
        if sup_new <= controls.decay_floor * sup0 {
            termination = Termination::DecayedBelowFloor;
            break;
        }
        if steps >= controls.max_steps {
            termination = Termination::StepFailure("step budget exhausted".into());
            break;
        }
    }

    // Always close the series with the final state.
    if samples.last().map(|s| s.t) != Some(t) {
        record_sample(&grid, params, &controls, t, dt_prev, &u, dissipation, &mut samples);
    }

    let mut max_inc: f64 = 0.0;
    for w in samples.windows(2) {
        max_inc = max_inc.max(w[1].energy - w[0].energy);
    }

    Ok(Trajectory {
        grid,
        params,
        controls,
        samples,
        termination,
        steps,
        min_value,
        max_energy_increment: max_inc,
    })
}

/// Blowup-rate verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RateVerdict {
    TypeI,
    Undetermined,
}

/// Configuration for the type-I rate test: the tail window (in sup-norm
/// units) over which the rescaled rate is evaluated, and the accepted band
/// around the self-similar constant `(p-1)^{-1/(p-1)}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateBand {
    pub lo: f64,
    pub hi: f64,
    pub tail_sup_lo: f64,
    pub tail_sup_hi: f64,
}

impl Default for RateBand {
    fn default() -> Self {
        Self {
            lo: 0.9,
            hi: 1.1,
            // Evaluate the rate where the collapsing core is still well
            // resolved by the reference mesh.
            tail_sup_lo: 1e3,
            tail_sup_hi: 1e5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupReport {
    pub t_est: f64,
    /// `(t, (T-t)^{1/(p-1)} ||u||_inf)` along the recorded samples.
    pub rate_series: Vec<(f64, f64)>,
    /// Rate statistics over the configured tail window.
    pub rate_tail_mean: f64,
    pub rate_tail_min: f64,
    pub rate_tail_max: f64,
    pub verdict: RateVerdict,
    pub band: RateBand,
}

/// Estimate the blowup time by extrapolating `1 / ||u||_inf^{p-1}` (linear
/// in `t` in the ODE regime) over the last decade, then test the type-I
/// rate over the tail window.
pub fn detect_blowup(traj: &Trajectory, band: RateBand) -> Result<BlowupReport> {
    if traj.termination != Termination::BlowupDetected {
        return Err(Error::BlowupDetection(format!(
            "trajectory terminated with {:?}, not blowup",
            traj.termination
        )));
    }
    let params = traj.params;
    let sup_max = traj
        .samples
        .iter()
        .map(|s| s.sup)
        .fold(0.0f64, f64::max);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &traj.samples {
        if s.sup >= 0.1 * sup_max {
            xs.push(s.t);
            ys.push(s.sup.powf(-(params.p - 1.0)));
        }
    }
    if xs.len() < 4 {
        return Err(Error::BlowupDetection(format!(
            "only {} samples in the final decade",
            xs.len()
        )));
    }
    let slope = fit_slope(&xs, &ys)
        .ok_or_else(|| Error::BlowupDetection("degenerate time series".into()))?;
    if !(slope < 0.0) {
        return Err(Error::BlowupDetection(format!(
            "1/||u||^{{p-1}} not decreasing (slope {slope})"
        )));
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let t_est = mx - my / slope;

    let inv_pm1 = 1.0 / (params.p - 1.0);
    let kappa = (params.p - 1.0).powf(-inv_pm1);
    let mut rate_series = Vec::new();
    let mut tail = Vec::new();
    for s in &traj.samples {
        if s.t < t_est && s.sup > 0.0 {
            let rate = (t_est - s.t).powf(inv_pm1) * s.sup;
            rate_series.push((s.t, rate));
            if s.sup >= band.tail_sup_lo && s.sup <= band.tail_sup_hi {
                tail.push(rate);
            }
        }
    }
    if tail.is_empty() {
        return Err(Error::BlowupDetection(
            "no samples in the rate tail window".into(),
        ));
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let verdict = if min >= band.lo * kappa && max <= band.hi * kappa {
        RateVerdict::TypeI
    } else {
        RateVerdict::Undetermined
    };
    Ok(BlowupReport {
        t_est,
        rate_series,
        rate_tail_mean: mean,
        rate_tail_min: min,
        rate_tail_max: max,
        verdict,
        band,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationWindow {
    pub t1: f64,
    pub t2: f64,
    pub energy_drop: f64,
    pub dissipated: f64,
    pub rel_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationReport {
    pub windows: Vec<DissipationWindow>,
    pub max_rel_defect: f64,
}

/// Energy-identity bookkeeping: over sample windows compare the energy drop
/// `E(t1) - E(t2)` with the accumulated `int int u_t^2`. Samples with
/// sup-norm above `sup_cut` are excluded (blowup runs: stay away from the
/// collapse region where the mesh no longer resolves `u_t`).
pub fn energy_dissipation_check(traj: &Trajectory, sup_cut: f64) -> DissipationReport {
    let usable: Vec<&Sample> = traj.samples.iter().filter(|s| s.sup <= sup_cut).collect();
    let mut windows = Vec::new();
    let mut max_rel: f64 = 0.0;
    if usable.len() >= 2 {
        let n_win = 8.min(usable.len() - 1);
        for k in 0..n_win {
            let i1 = k * (usable.len() - 1) / n_win;
            let i2 = (k + 1) * (usable.len() - 1) / n_win;
            if i2 <= i1 {
                continue;
            }
            let (s1, s2) = (usable[i1], usable[i2]);
            let drop = s1.energy - s2.energy;
            let diss = s2.dissipation - s1.dissipation;
            let rel = (drop - diss).abs() / (s1.energy.abs() + diss + 1e-300);
            max_rel = max_rel.max(rel);
            windows.push(DissipationWindow {
                t1: s1.t,
                t2: s2.t,
                energy_drop: drop,
                dissipated: diss,
                rel_defect: rel,
            });
        }
    }
    DissipationReport {
        windows,
        max_rel_defect: max_rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grading};
    use crate::ground_state::q_field;

    fn small_grid() -> Arc<RadialGrid> {
        let params = DimensionParams::reference();
        make_grid(params, 100.0, 1024, Grading::Geometric { stretch: 30.0 }).unwrap()
    }

    #[test]
    fn pure_reaction_plateau_matches_ode() {
        // Diffusion off, u = 1 everywhere: nodewise du/dt = u^2, u(t) = 1/(1-t).
        let grid = small_grid();
        let mut init = RadialField::from_fn(grid.clone(), |_| 1.0);
        let n = init.len();
        init.values[n - 1] = 1.0; // gets zeroed by the Dirichlet wall; harmless
        let controls = EvolveControls {
            diffusion: false,
            t_max: 2.0,
            dt_init: 1e-5,
            safety: 0.005,
            ..Default::default()
        };
        let traj = evolve(&init, controls).unwrap();
        assert_eq!(traj.termination, Termination::BlowupDetected);
        for s in &traj.samples {
            if s.t > 0.0 && s.sup < 1e3 {
                // Deviation vs the exact ODE is a tiny blowup-time shift
                // amplified by the singularity; second order in the step.
                let exact = 1.0 / (1.0 - s.t);
                assert!(
                    (s.sup - exact).abs() <= 3e-2 * exact,
                    "t={} sup={} exact={}",
                    s.t,
                    s.sup,
                    exact
                );
            }
        }
        let report = detect_blowup(&traj, RateBand::default()).unwrap();
        assert!(
            (report.t_est - 1.0).abs() <= 1e-3,
            "T_est = {}",
            report.t_est
        );
        assert_eq!(report.verdict, RateVerdict::TypeI);
        assert!((report.rate_tail_mean - 1.0).abs() <= 0.01);
    }

    #[test]
    fn pure_diffusion_gaussian_decay() {
        // Reaction off: sup-norm of a heat-evolved Gaussian is (sigma/(sigma+t))^{n/2}.
        let grid = small_grid();
        let sigma = 1.0;
        let init = RadialField::from_fn(grid.clone(), move |r| (-r * r / (4.0 * sigma)).exp());
        let controls = EvolveControls {
            reaction: false,
            t_max: 3.0,
            dt_init: 1e-5,
            dt_max: 2e-3,
            ..Default::default()
        };
        let traj = evolve(&init, controls).unwrap();
        assert_eq!(traj.termination, Termination::ReachedHorizon);
        let s_end = traj.final_sample();
        let exact = (sigma / (sigma + s_end.t)).powf(3.0);
        assert!(
            (s_end.sup - exact).abs() <= 2e-3 * exact,
            "sup {} exact {exact}",
            s_end.sup
        );
        // Positivity is preserved up to solver noise.
        assert!(traj.min_value >= -1e-10);
    }

    #[test]
    fn ground_state_is_near_stationary_for_one_step() {
        let grid = small_grid();
        let q = q_field(grid.clone());
        let controls = EvolveControls {
            t_max: 1e-3,
            dt_init: 1e-3,
            ..Default::default()
        };
        let traj = evolve(&q, controls).unwrap();
        let drift = {
            let last = traj.field_at(traj.samples.len() - 1).unwrap();
            let diff = last.axpy(-1.0, &q).unwrap();
            grad_sq(&diff).sqrt() / grad_sq(&q).sqrt()
        };
        assert!(drift <= 1e-6, "one-step drift {drift}");
    }

    #[test]
    fn no_blowup_event_is_an_error_for_detection() {
        let grid = small_grid();
        let init = RadialField::from_fn(grid, |r| 0.01 * (-r * r).exp());
        let controls = EvolveControls {
            t_max: 0.1,
            ..Default::default()
        };
        let traj = evolve(&init, controls).unwrap();
        assert!(detect_blowup(&traj, RateBand::default()).is_err());
    }

    #[test]
    fn stationary_run_dissipation_bookkeeping_is_tiny() {
        let grid = small_grid();
        let q = q_field(grid.clone());
        let controls = EvolveControls {
            t_max: 0.5,
            ..Default::default()
        };
        let traj = evolve(&q, controls).unwrap();
        let report = energy_dissipation_check(&traj, f64::INFINITY);
        assert!(
            report.max_rel_defect <= 1e-6,
            "stationary defect {}",
            report.max_rel_defect
        );
    }
}
