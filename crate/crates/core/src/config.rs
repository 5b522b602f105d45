//! Engine configuration and the model artifact, both versioned TOML documents.

use serde::{Deserialize, Serialize};

use crate::control::IntegrationConfig;
use crate::court::{CourtSpec, MAX_CELL_SIZE, MIN_CELL_SIZE};
use crate::empirical::{EmpiricalConfig, EmpiricalTables};
use crate::error::{Error, Result};
use crate::estimation::{DatasetCaps, OptimizerConfig};
use crate::kinematics::ModelParams;
use crate::oracle::{SyntheticConfig, MIN_SAMPLES};
use crate::scoring::{ExpectationMode, ModelKind};
use crate::tracking::FilterConfig;

pub const CONFIG_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub cell_size: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { cell_size: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub states: usize,
    pub samples: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            states: 50,
            samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub format_version: u32,
    pub seed: u64,
    /// Games held out by `ingest --test-games`; zero keeps everything for training.
    pub test_games: usize,
    pub expectation: ExpectationMode,
    /// Use the BIMOS parameters when a BMOS fit does not converge.
    pub bmos_fallback: bool,
    pub court: CourtSpec,
    pub grid: GridConfig,
    pub filter: FilterConfig,
    pub empirical: EmpiricalConfig,
    pub integration: IntegrationConfig,
    pub init: ModelParams,
    pub optimizer: OptimizerConfig,
    pub caps: DatasetCaps,
    pub oracle: OracleConfig,
    pub synth: SyntheticConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            format_version: CONFIG_VERSION,
            seed: 0,
            test_games: 0,
            expectation: ExpectationMode::default(),
            bmos_fallback: true,
            court: CourtSpec::default(),
            grid: GridConfig::default(),
            filter: FilterConfig::default(),
            empirical: EmpiricalConfig::default(),
            integration: IntegrationConfig::default(),
            init: ModelParams::default(),
            optimizer: OptimizerConfig::default(),
            caps: DatasetCaps::default(),
            oracle: OracleConfig::default(),
            synth: SyntheticConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "unsupported config format_version {} (expected {CONFIG_VERSION})",
                self.format_version
            )));
        }
        self.court.validate()?;
        let max_cell = MAX_CELL_SIZE.min(self.court.half_length);
        if !(self.grid.cell_size >= MIN_CELL_SIZE && self.grid.cell_size <= max_cell) {
            return Err(Error::config(format!(
                "grid cell_size must lie in [{MIN_CELL_SIZE}, {max_cell}], got {}",
                self.grid.cell_size
            )));
        }
        let f = &self.filter;
        if !(f.max_gap > 0.0 && f.min_duration >= 0.0 && f.max_speed > 0.0) {
            return Err(Error::config("filter thresholds must be positive"));
        }
        let e = &self.empirical;
        if !(e.filter_sigma.is_finite() && e.filter_sigma >= 0.0) {
            return Err(Error::config("empirical filter_sigma must be non-negative"));
        }
        self.integration.validate()?;
        self.init.validate()?;
        self.optimizer.validate()?;
        if self.oracle.samples < MIN_SAMPLES || self.oracle.states == 0 {
            return Err(Error::config(format!(
                "oracle needs at least one state and {MIN_SAMPLES} samples"
            )));
        }
        self.synth.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Fitted tables plus physical parameters, per model once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub court: CourtSpec,
    /// Parameters used for models without a fit of their own.
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmos: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bimos: Option<ModelParams>,
    pub tables: EmpiricalTables,
}

impl ModelArtifact {
    pub fn new(court: CourtSpec, params: ModelParams, tables: EmpiricalTables) -> Self {
        ModelArtifact {
            format_version: ARTIFACT_VERSION,
            court,
            params,
            bmos: None,
            bimos: None,
            tables,
        }
    }

    pub fn params_for(&self, kind: ModelKind) -> &ModelParams {
        let fitted = match kind {
            ModelKind::Bmos => self.bmos.as_ref(),
            ModelKind::Bimos => self.bimos.as_ref(),
        };
        fitted.unwrap_or(&self.params)
    }

    pub fn set_params(&mut self, kind: ModelKind, params: ModelParams) {
        match kind {
            ModelKind::Bmos => self.bmos = Some(params),
            ModelKind::Bimos => self.bimos = Some(params),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != ARTIFACT_VERSION {
            return Err(Error::config(format!(
                "unsupported artifact format_version {} (expected {ARTIFACT_VERSION})",
                self.format_version
            )));
        }
        self.court.validate()?;
        self.params.validate()?;
        for p in self.bmos.iter().chain(&self.bimos) {
            p.validate()?;
        }
        self.tables.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("artifact serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let a: ModelArtifact = toml::from_str(text).map_err(|e| Error::Serialization(format!("artifact: {e}")))?;
        a.validate()?;
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SyntheticTruth;

    #[test]
    fn config_round_trips() {
        let cfg = EngineConfig::default();
        cfg.validate().unwrap();
        let back = EngineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = EngineConfig::from_toml("seed = 9\n[grid]\ncell_size = 1.0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.grid.cell_size, 1.0);
        assert_eq!(cfg.integration, IntegrationConfig::default());
    }

    #[test]
    fn config_rejects_out_of_range_values() {
        for text in [
            "format_version = 2\n",
            "[grid]\ncell_size = 0.05\n",
            "[integration]\ndt = 0.0\n",
            "[oracle]\nsamples = 10\n",
            "[optimizer]\nlower = [0.5, 1.0, 1.0, 0.0, 0.0]\n",
            "unknown_key = 1\n",
            "seed = [\n",
        ] {
            assert!(EngineConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn artifact_round_trips_exactly() {
        let court = CourtSpec::default();
        let tables = SyntheticTruth::default().tables(&court);
        let mut a = ModelArtifact::new(court, ModelParams::default(), tables);
        a.set_params(ModelKind::Bimos, SyntheticTruth::default().params);
        let text = a.to_toml();
        let back = ModelArtifact::from_toml(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_toml(), text);
        assert_eq!(back.params_for(ModelKind::Bmos), &ModelParams::default());
        assert_eq!(back.params_for(ModelKind::Bimos), &SyntheticTruth::default().params);
    }

    #[test]
    fn artifact_version_is_checked() {
        let court = CourtSpec::default();
        let mut a = ModelArtifact::new(court, ModelParams::default(), SyntheticTruth::default().tables(&court));
        a.format_version = 7;
        assert!(matches!(ModelArtifact::from_toml(&a.to_toml()), Err(Error::Config(_))));
    }
}
