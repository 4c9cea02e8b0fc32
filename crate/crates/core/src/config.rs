//! Run configuration: one human-readable TOML file, fully defaulted, with
//! the resolved form embedded in every output artifact.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolution::{EvolveControls, RateBand};
use crate::field::RadialField;
use crate::grid::{make_grid_bc, BoundaryCondition, Grading, RadialGrid};
use crate::ground_state::{q_field, rescaled_q};
use crate::modulation::{DecomposeOptions, TrackOptions};
use crate::params::DimensionParams;
use crate::regimes::ClassifyPolicy;
use crate::spectral::{EigenOptions, SpectralData};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionBlock {
    pub n: u32,
}

impl Default for DimensionBlock {
    fn default() -> Self {
        Self { n: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub r_max: f64,
    pub n_points: usize,
    pub grading: Grading,
    pub boundary: BoundaryCondition,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            r_max: 200.0,
            n_points: 4096,
            grading: Grading::Geometric { stretch: 60.0 },
            boundary: BoundaryCondition::DecayMatched,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralBlock {
    /// Cutoff scale M of `chi(r/M)`; the theory needs only M large enough,
    /// so M is configuration and ships with an insensitivity report.
    pub cutoff_m: f64,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    /// Dedicated fine grid for the `spectrum` command.
    pub reference_n_points: usize,
    pub shooting_r_max: f64,
    pub shooting_step: f64,
}

impl Default for SpectralBlock {
    fn default() -> Self {
        Self {
            cutoff_m: 20.0,
            eig_tol: 1e-13,
            eig_max_iter: 400,
            reference_n_points: 65536,
            shooting_r_max: 60.0,
            shooting_step: 2e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileKind {
    GroundState,
    Gaussian { width: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    GroundState,
    GroundStatePlusY { amplitude: f64 },
    RescaledGroundState { k: f64 },
    AlphaProfile { alpha: f64, profile: ProfileKind },
    File { path: String },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::GroundState
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionBlock {
    pub t_max: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub safety: f64,
    pub dt_growth: f64,
    pub blowup_threshold: f64,
    pub decay_floor: f64,
    pub sample_dt: f64,
    pub sample_dlog_sup: f64,
    pub store_fields: bool,
}

impl Default for EvolutionBlock {
    fn default() -> Self {
        let c = EvolveControls::default();
        Self {
            t_max: c.t_max,
            dt_init: c.dt_init,
            dt_max: c.dt_max,
            safety: c.safety,
            dt_growth: c.dt_growth,
            blowup_threshold: c.blowup_threshold,
            decay_floor: c.decay_floor,
            sample_dt: c.sample_dt,
            sample_dlog_sup: c.sample_dlog_sup,
            store_fields: c.store_fields,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationBlock {
    pub alpha_exit: f64,
    pub decompose_tol: f64,
    pub decompose_max_iter: usize,
}

impl Default for ModulationBlock {
    fn default() -> Self {
        let t = TrackOptions::default();
        Self {
            alpha_exit: t.alpha_exit,
            decompose_tol: t.decompose.tol,
            decompose_max_iter: t.decompose.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyBlock {
    pub soliton_grad_eps: f64,
    pub soliton_a: f64,
    pub lambda_cauchy_tol: f64,
    pub dissipation_drop: f64,
    pub rate_band_lo: f64,
    pub rate_band_hi: f64,
    pub rate_tail_sup_lo: f64,
    pub rate_tail_sup_hi: f64,
}

impl Default for ClassifyBlock {
    fn default() -> Self {
        let p = ClassifyPolicy::default();
        Self {
            soliton_grad_eps: p.soliton_grad_eps,
            soliton_a: p.soliton_a,
            lambda_cauchy_tol: p.lambda_cauchy_tol,
            dissipation_drop: p.dissipation_drop,
            rate_band_lo: p.rate_band.lo,
            rate_band_hi: p.rate_band.hi,
            rate_tail_sup_lo: p.rate_band.tail_sup_lo,
            rate_tail_sup_hi: p.rate_band.tail_sup_hi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisectBlock {
    pub a_min: f64,
    pub a_max: f64,
    pub tol: f64,
    pub max_probes: usize,
    /// Number of escalation levels for inconclusive probes (0 = none).
    pub max_escalations: usize,
}

impl Default for BisectBlock {
    fn default() -> Self {
        Self {
            a_min: -1e-2,
            a_max: 1e-2,
            tol: 1e-5,
            max_probes: 20,
            max_escalations: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    pub r_max: f64,
    pub n_points: usize,
    pub n_random: usize,
    pub seed: u64,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            r_max: 60.0,
            n_points: 32769,
            n_random: 20,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    pub cadence: f64,
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            cadence: 0.1,
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: Option<u32>,
    pub dimension: DimensionBlock,
    pub grid: GridBlock,
    pub spectral: SpectralBlock,
    pub initial: InitialData,
    pub evolution: EvolutionBlock,
    pub modulation: ModulationBlock,
    pub classify: ClassifyBlock,
    pub bisect: BisectBlock,
    pub verify: VerifyBlock,
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        if let Some(v) = cfg.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::Config(format!(
                    "schema_version {v} unsupported (expected {SCHEMA_VERSION})"
                )));
            }
        }
        cfg.schema_version = Some(SCHEMA_VERSION);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        DimensionParams::new(self.dimension.n)?;
        if !(self.grid.r_max > 0.0) || self.grid.n_points < 16 {
            return Err(Error::Config("invalid grid block".into()));
        }
        if !(self.evolution.t_max > 0.0 && self.evolution.dt_init > 0.0) {
            return Err(Error::Config("invalid evolution block".into()));
        }
        match &self.initial {
            InitialData::GroundStatePlusY { amplitude } if !amplitude.is_finite() => {
                return Err(Error::Config("nonfinite amplitude".into()));
            }
            InitialData::RescaledGroundState { k } if !(*k > 0.0) => {
                return Err(Error::Config("rescale factor must be positive".into()));
            }
            InitialData::AlphaProfile { alpha, .. } if !alpha.is_finite() => {
                return Err(Error::Config("nonfinite alpha".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn params(&self) -> DimensionParams {
        DimensionParams::new(self.dimension.n).expect("validated")
    }

    pub fn make_grid(&self) -> Result<Arc<RadialGrid>> {
        make_grid_bc(
            self.params(),
            self.grid.r_max,
            self.grid.n_points,
            self.grid.grading,
            self.grid.boundary,
        )
    }

    /// Fine grid for the spectral certificate.
    pub fn make_spectral_reference_grid(&self) -> Result<Arc<RadialGrid>> {
        make_grid_bc(
            self.params(),
            self.grid.r_max,
            self.spectral.reference_n_points,
            self.grid.grading,
            self.grid.boundary,
        )
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tol: self.spectral.eig_tol,
            max_iter: self.spectral.eig_max_iter,
        }
    }

    pub fn evolve_controls(&self) -> EvolveControls {
        EvolveControls {
            t_max: self.evolution.t_max,
            dt_init: self.evolution.dt_init,
            dt_max: self.evolution.dt_max,
            safety: self.evolution.safety,
            dt_growth: self.evolution.dt_growth,
            blowup_threshold: self.evolution.blowup_threshold,
            decay_floor: self.evolution.decay_floor,
            sample_dt: self.evolution.sample_dt,
            sample_dlog_sup: self.evolution.sample_dlog_sup,
            store_fields: self.evolution.store_fields,
            ..EvolveControls::default()
        }
    }

    pub fn track_options(&self) -> TrackOptions {
        TrackOptions {
            alpha_exit: self.modulation.alpha_exit,
            decompose: DecomposeOptions {
                tol: self.modulation.decompose_tol,
                max_iter: self.modulation.decompose_max_iter,
            },
        }
    }

    pub fn rate_band(&self) -> RateBand {
        RateBand {
            lo: self.classify.rate_band_lo,
            hi: self.classify.rate_band_hi,
            tail_sup_lo: self.classify.rate_tail_sup_lo,
            tail_sup_hi: self.classify.rate_tail_sup_hi,
        }
    }

    pub fn classify_policy(&self) -> ClassifyPolicy {
        ClassifyPolicy {
            soliton_grad_eps: self.classify.soliton_grad_eps,
            soliton_a: self.classify.soliton_a,
            lambda_cauchy_tol: self.classify.lambda_cauchy_tol,
            dissipation_drop: self.classify.dissipation_drop,
            rate_band: self.rate_band(),
        }
    }

    /// Multiply the spatial resolution (and shrink time steps to match).
    pub fn scale_resolution(&mut self, factor: f64) -> Result<()> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::Config(format!("bad resolution scale {factor}")));
        }
        self.grid.n_points = ((self.grid.n_points as f64) * factor).round().max(16.0) as usize;
        self.evolution.dt_init /= factor;
        self.evolution.dt_max /= factor;
        self.evolution.safety /= factor;
        Ok(())
    }

    /// Materialize the configured initial data on the grid of `spec`.
    pub fn build_initial(&self, spec: &SpectralData) -> Result<RadialField> {
        let grid = spec.grid.clone();
        match &self.initial {
            InitialData::GroundState => Ok(q_field(grid)),
            InitialData::GroundStatePlusY { amplitude } => {
                q_field(grid).axpy(*amplitude, &spec.y)
            }
            InitialData::RescaledGroundState { k } => rescaled_q(grid, *k),
            InitialData::AlphaProfile { alpha, profile } => {
                let base = match profile {
                    ProfileKind::GroundState => q_field(grid),
                    ProfileKind::Gaussian { width } => {
                        let w = *width;
                        if !(w > 0.0) {
                            return Err(Error::Config("gaussian width must be positive".into()));
                        }
                        RadialField::from_fn(grid, move |r| (-(r * r) / (w * w)).exp())
                    }
                };
                Ok(base.scaled(*alpha))
            }
            InitialData::File { path } => {
                let (_t, field) = crate::io::read_snapshot(std::path::Path::new(path), &grid)?;
                Ok(field)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.dimension.n, 6);
        assert_eq!(cfg.grid.n_points, 4096);
        assert_eq!(cfg.schema_version, Some(SCHEMA_VERSION));
    }

    #[test]
    fn toml_round_trip_preserves_initial_data() {
        let text = r#"
[initial]
kind = "ground_state_plus_y"
amplitude = 1e-3

[grid]
n_points = 1024
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(
            cfg.initial,
            InitialData::GroundStatePlusY { amplitude: 1e-3 }
        );
        assert_eq!(cfg.grid.n_points, 1024);
        let dumped = toml::to_string(&cfg).unwrap();
        let cfg2 = RunConfig::from_toml_str(&dumped).unwrap();
        assert_eq!(cfg2.initial, cfg.initial);
    }

    #[test]
    fn malformed_config_is_rejected() {
        assert!(RunConfig::from_toml_str("gibberish = ][").is_err());
        assert!(RunConfig::from_toml_str("[grid]\nn_points = 4").is_err());
        assert!(RunConfig::from_toml_str("[dimension]\nn = 11").is_err());
        assert!(RunConfig::from_toml_str("[grid]\nbogus_key = 3").is_err());
    }

    #[test]
    fn resolution_scaling() {
        let mut cfg = RunConfig::from_toml_str("").unwrap();
        let dt0 = cfg.evolution.dt_max;
        cfg.scale_resolution(2.0).unwrap();
        assert_eq!(cfg.grid.n_points, 8192);
        assert_eq!(cfg.evolution.dt_max, dt0 / 2.0);
    }
}
