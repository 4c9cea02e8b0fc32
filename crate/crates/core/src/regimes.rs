//! Regime classification (soliton / dissipation / type-I blowup, with an
//! honest undetermined bucket), stability-threshold bisection along a
//! one-parameter family, and the forward ancient-orbit surrogate.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{
    detect_blowup, evolve, BlowupReport, EvolveControls, RateBand, RateVerdict, Termination,
    Trajectory,
};
use crate::field::RadialField;
use crate::ground_state::q_field;
use crate::modulation::{track, ModulationTrack, TrackOptions};
use crate::spectral::SpectralData;

/// Classification verdict. `Undetermined` is a first-class outcome: a
/// finite-resolution run that stalls is reported, never silently promoted.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Soliton { lambda_inf: f64 },
    Dissipation,
    TypeIBlowup { t_est: f64, rate_tail: f64 },
    Undetermined,
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Soliton { .. } => "soliton",
            Verdict::Dissipation => "dissipation",
            Verdict::TypeIBlowup { .. } => "type_i_blowup",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub verdict: Verdict,
    pub termination: Termination,
    /// Sample index where modulation tracking exited, if it did.
    pub exit_sample: Option<usize>,
    /// Renormalized time of the last tracked point.
    pub last_tracked_s: Option<f64>,
    /// `sqrt(a^2 ||grad Y||^2 + ||grad eps||^2)` at the last tracked point.
    pub final_dist_proxy: Option<f64>,
    /// Initial over final sup-norm.
    pub sup_drop: f64,
    pub track_len: usize,
    pub blowup: Option<BlowupReport>,
}

/// Thresholds for the verdict tests.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifyPolicy {
    /// Soliton band: `||grad eps||` bound sustained over the final quarter.
    pub soliton_grad_eps: f64,
    /// Soliton band: `|a|` bound sustained over the final quarter.
    pub soliton_a: f64,
    /// Relative Cauchy tolerance on lambda over the final decade.
    pub lambda_cauchy_tol: f64,
    /// Required sup-norm drop factor for a dissipation verdict.
    pub dissipation_drop: f64,
    pub rate_band: RateBand,
}

impl Default for ClassifyPolicy {
    fn default() -> Self {
        Self {
            soliton_grad_eps: 1e-4,
            soliton_a: 1e-5,
            lambda_cauchy_tol: 1e-4,
            dissipation_drop: 10.0,
            rate_band: RateBand::default(),
        }
    }
}

/// Classify a completed trajectory. The track is needed only for the
/// soliton test; blowup and dissipation verdicts come from the trajectory
/// itself.
pub fn classify(
    traj: &Trajectory,
    modulation: Option<&ModulationTrack>,
    policy: &ClassifyPolicy,
) -> RegimeReport {
    let sup0 = traj.initial_sup();
    let sup_end = traj.final_sample().sup;
    let sup_drop = if sup_end > 0.0 { sup0 / sup_end } else { f64::INFINITY };
    let (exit_sample, last_s, final_dist, track_len) = match modulation {
        Some(tr) => {
            let last = tr.points.last();
            (
                tr.exit_sample,
                last.map(|p| p.s),
                last.map(|p| {
                    (p.a * p.a * tr.grad_y_l2 * tr.grad_y_l2
                        + p.grad_eps_l2 * p.grad_eps_l2)
                        .sqrt()
                }),
                tr.points.len(),
            )
        }
        None => (None, None, None, 0),
    };

    let mut blowup_report = None;
    let verdict = match traj.termination {
        Termination::BlowupDetected => match detect_blowup(traj, policy.rate_band) {
            Ok(report) => {
                let v = if report.verdict == RateVerdict::TypeI {
                    Verdict::TypeIBlowup {
                        t_est: report.t_est,
                        rate_tail: report.rate_tail_mean,
                    }
                } else {
                    Verdict::Undetermined
                };
                blowup_report = Some(report);
                v
            }
            Err(_) => Verdict::Undetermined,
        },
        Termination::DecayedBelowFloor => {
            if sup_drop >= policy.dissipation_drop {
                Verdict::Dissipation
            } else {
                Verdict::Undetermined
            }
        }
        Termination::ReachedHorizon => soliton_verdict(modulation, policy),
        Termination::StepFailure(_) => Verdict::Undetermined,
    };

    RegimeReport {
        verdict,
        termination: traj.termination.clone(),
        exit_sample,
        last_tracked_s: last_s,
        final_dist_proxy: final_dist,
        sup_drop,
        track_len,
        blowup: blowup_report,
    }
}

fn soliton_verdict(modulation: Option<&ModulationTrack>, policy: &ClassifyPolicy) -> Verdict {
    let Some(tr) = modulation else {
        return Verdict::Undetermined;
    };
    if tr.exit_sample.is_some() || tr.points.len() < 8 {
        return Verdict::Undetermined;
    }
    let n = tr.points.len();
    // Band sustained over the final quarter.
    let from = n - (n / 4).max(2);
    let in_band = tr.points[from..]
        .iter()
        .all(|p| p.grad_eps_l2 <= policy.soliton_grad_eps && p.a.abs() <= policy.soliton_a);
    if !in_band {
        return Verdict::Undetermined;
    }
    // lambda_inf from the final decade, with a Cauchy tail test.
    let from10 = n - (n / 10).max(2);
    let tail = &tr.points[from10..];
    let lambda_inf = tail.iter().map(|p| p.lambda).sum::<f64>() / tail.len() as f64;
    let cauchy = tail
        .iter()
        .map(|p| (p.lambda - lambda_inf).abs())
        .fold(0.0f64, f64::max);
    if cauchy > policy.lambda_cauchy_tol * lambda_inf {
        return Verdict::Undetermined;
    }
    Verdict::Soliton { lambda_inf }
}

/// One probe of a bisection run.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub amplitude: f64,
    pub level: usize,
    pub verdict: String,
    pub exit_s: Option<f64>,
    pub t_est: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    pub a_low: f64,
    pub a_high: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub probes: Vec<ProbeRecord>,
}

/// Everything needed to evaluate one amplitude at one resolution level.
pub struct BisectDriver<'a> {
    /// Spectral data per resolution level (level 0 first; higher levels are
    /// refinements used to retry inconclusive probes).
    pub specs: Vec<Arc<SpectralData>>,
    pub controls: EvolveControls,
    pub policy: ClassifyPolicy,
    pub track_opts: TrackOptions,
    /// Initial data at a given amplitude on a given level's grid.
    #[allow(clippy::type_complexity)]
    pub family: Box<dyn Fn(&SpectralData, f64) -> Result<RadialField> + Sync + 'a>,
}

impl BisectDriver<'_> {
    /// Evolve and classify one amplitude at one level.
    pub fn probe(&self, amplitude: f64, level: usize) -> Result<ProbeRecord> {
        let spec = &self.specs[level];
        let initial = (self.family)(spec, amplitude)?;
        let mut controls = self.controls;
        // Tighten stepping with each escalation level.
        let shrink = 0.5f64.powi(level as i32);
        controls.safety *= shrink;
        controls.dt_max *= shrink;
        let traj = evolve(&initial, controls)?;
        let tr = if controls.store_fields {
            track(&traj, spec, self.track_opts).ok()
        } else {
            None
        };
        let report = classify(&traj, tr.as_ref(), &self.policy);
        Ok(ProbeRecord {
            amplitude,
            level,
            verdict: report.verdict.kind().to_string(),
            exit_s: report.last_tracked_s,
            t_est: match &report.verdict {
                Verdict::TypeIBlowup { t_est, .. } => Some(*t_est),
                _ => None,
            },
        })
    }

    fn conclusive_probe(&self, amplitude: f64, max_level: usize) -> Result<ProbeRecord> {
        let mut last = None;
        for level in 0..self.specs.len().min(max_level + 1) {
            let rec = self.probe(amplitude, level)?;
            let conclusive = rec.verdict == "dissipation" || rec.verdict == "type_i_blowup";
            if conclusive {
                return Ok(rec);
            }
            last = Some(rec);
        }
        last.ok_or_else(|| Error::BisectionFailure("no resolution levels".into()))
    }
}

/// Bisect the boundary between dissipation (below) and type-I blowup
/// (above) along the family. Inconclusive probes are retried at higher
/// resolution; a probe that stays inconclusive at every level exhausts the
/// budget and errors out.
pub fn threshold_bisect(
    driver: &BisectDriver,
    range: (f64, f64),
    tol: f64,
    max_probes: usize,
) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = range;
    if !(hi > lo) || !(tol > 0.0) {
        return Err(Error::BisectionFailure(format!(
            "bad bracket or tolerance: ({lo}, {hi}), tol {tol}"
        )));
    }
    let max_level = driver.specs.len() - 1;
    let mut probes = Vec::new();
    let rec_lo = driver.conclusive_probe(lo, max_level)?;
    let rec_hi = driver.conclusive_probe(hi, max_level)?;
    let lo_kind = rec_lo.verdict.clone();
    let hi_kind = rec_hi.verdict.clone();
    probes.push(rec_lo);
    probes.push(rec_hi);
    if lo_kind == hi_kind {
        return Err(Error::BisectionFailure(format!(
            "endpoint verdicts equal ({lo_kind}); bracket does not straddle the threshold"
        )));
    }
    if lo_kind != "dissipation" || hi_kind != "type_i_blowup" {
        return Err(Error::BisectionFailure(format!(
            "expected dissipation below and blowup above, got {lo_kind} / {hi_kind}"
        )));
    }
    let mut iterations = 0;
    while hi - lo > tol {
        if probes.len() >= max_probes {
            return Err(Error::BisectionFailure(format!(
                "probe budget {max_probes} exhausted at width {}",
                hi - lo
            )));
        }
        let mid = 0.5 * (lo + hi);
        let rec = driver.conclusive_probe(mid, max_level)?;
        let kind = rec.verdict.clone();
        probes.push(rec);
        iterations += 1;
        match kind.as_str() {
            "dissipation" => lo = mid,
            "type_i_blowup" => hi = mid,
            other => {
                return Err(Error::BisectionFailure(format!(
                    "inconclusive probe ({other}) at {mid} after escalation"
                )))
            }
        }
    }
    Ok(ThresholdResult {
        a_low: lo,
        a_high: hi,
        iterations,
        tolerance: tol,
        probes,
    })
}

/// Diagnostics of the forward ancient-orbit surrogate started at
/// `Q + delta1 Y`.
#[derive(Debug, Clone, Serialize)]
pub struct AncientReport {
    pub delta1: f64,
    /// Fraction of tracked points satisfying the exponential sandwich
    /// `1/2 delta1 e^{e0 s} < a < 2 delta1 e^{e0 s}`.
    pub sandwich_fraction: f64,
    /// Number of e-foldings of `a` covered by the tracked window.
    pub efoldings: f64,
    /// `max |lambda/lambda(0) - 1|` before `|a| = 0.1`.
    pub lambda_drift: Option<f64>,
    /// Drift divided by `delta1^2` (the scaling the drift bound predicts).
    pub drift_over_delta_sq: Option<f64>,
    /// Renormalized time at which `|a|` reached the exit amplitude.
    pub exit_s: Option<f64>,
    pub blowup: Option<BlowupReport>,
    pub terminated: Termination,
}

/// Run the surrogate: forward orbit from `Q + delta1 Y`, sandwich and
/// drift checks while near the family, then the blowup rate test.
pub fn ancient_surrogate(
    delta1: f64,
    spec: &SpectralData,
    controls: EvolveControls,
    track_opts: TrackOptions,
    rate_band: RateBand,
) -> Result<(Trajectory, ModulationTrack, AncientReport)> {
    if !(delta1 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta1 must be nonnegative, got {delta1}"
        )));
    }
    let q = q_field(spec.grid.clone());
    let initial = q.axpy(delta1, &spec.y)?;
    let traj = evolve(&initial, controls)?;
    let tr = track(&traj, spec, track_opts)?;

    let mut inside = 0usize;
    let mut total = 0usize;
    for p in &tr.points {
        if p.s <= 0.0 && total > 0 {
            continue;
        }
        let env = delta1 * (spec.e0 * p.s).exp();
        total += 1;
        if p.a > 0.5 * env && p.a < 2.0 * env {
            inside += 1;
        }
    }
    let sandwich_fraction = if total > 0 {
        inside as f64 / total as f64
    } else {
        0.0
    };
    let efoldings = match (tr.points.first(), tr.points.last()) {
        (Some(p0), Some(p1)) if p0.a > 0.0 && p1.a > 0.0 => (p1.a / p0.a).ln(),
        _ => 0.0,
    };
    let lambda_drift = tr.lambda_drift_before(0.1);
    let exit_s = tr.s_reaching_amplitude(tr.alpha_exit / tr.grad_y_l2);
    let blowup = if traj.termination == Termination::BlowupDetected {
        detect_blowup(&traj, rate_band).ok()
    } else {
        None
    };
    let report = AncientReport {
        delta1,
        sandwich_fraction,
        efoldings,
        lambda_drift,
        drift_over_delta_sq: lambda_drift.map(|d| {
            if delta1 > 0.0 {
                d / (delta1 * delta1)
            } else {
                0.0
            }
        }),
        exit_s,
        blowup,
        terminated: traj.termination.clone(),
    };
    Ok((traj, tr, report))
}
