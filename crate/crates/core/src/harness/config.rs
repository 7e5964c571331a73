use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap::TrainSettings;
use crate::hybrid::GeometryConfig;
use crate::inference::PredictionConfig;
use crate::sim::{PedOracleConfig, SimConfig};
use crate::tracker::NoiseConfig;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub oracle: PedOracleConfig,
    pub prediction: PredictionConfig,
    pub noise: NoiseConfig<f64>,
    /// Road layout shared by the simulator and the tracker. `sim.geometry`
    /// may be omitted; if given it must agree.
    pub geometry: GeometryConfig<f64>,
    pub train: TrainSettings,
    /// Prediction horizons in seconds, strictly increasing.
    pub horizons: Vec<f64>,
    /// Estimate the crossing delay rate and start-speed distribution from
    /// the evaluated dataset instead of using `prediction` as given.
    pub fit_start_params: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sim: SimConfig::default(),
            oracle: PedOracleConfig::default(),
            prediction: PredictionConfig::default(),
            noise: NoiseConfig::default(),
            geometry: GeometryConfig::default(),
            train: TrainSettings::default(),
            horizons: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            fit_start_params: true,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config. Unknown keys are rejected by name.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.sync_geometry()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Self::from_json(&text).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }

    fn sync_geometry(&mut self) -> Result<()> {
        let default = GeometryConfig::default();
        if self.sim.geometry != default && self.sim.geometry != self.geometry {
            return Err(Error::Config(
                "sim.geometry differs from geometry; set the road layout under geometry only".into(),
            ));
        }
        self.sim.geometry = self.geometry;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.oracle.validate()?;
        self.prediction.validate()?;
        self.noise.validate()?;
        self.geometry.validate()?;
        self.train.validate()?;
        if self.horizons.is_empty() {
            return Err(Error::invalid("horizons", "at least one horizon required"));
        }
        if self.horizons.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::invalid("horizons", "must be positive"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("horizons", "must be strictly increasing"));
        }
        if (self.prediction.dt - self.sim.dt).abs() > 1e-12 {
            return Err(Error::invalid("prediction.dt", "must equal sim.dt"));
        }
        Ok(())
    }

    /// Uses `seed` for the simulator, the train/test split and sampled rollouts.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self.prediction.seed = seed;
        self
    }

    /// Seed of the train/test split and cross-validation folds.
    pub fn split_seed(&self) -> u64 {
        self.sim.seed
    }

    /// Output directory: the explicit argument, else `OUTPUT_DIR`, else the config value.
    pub fn resolve_output_dir(&self, explicit: Option<&Path>) -> PathBuf {
        if let Some(p) = explicit {
            return p.to_path_buf();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }
}

/// Process exit code for an error: 2 for configuration problems, 3 for data problems.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = ExperimentConfig::from_json(r#"{"sim": {"n_crosings": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("n_crosings"), "{e}");
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn horizons_must_increase() {
        let e = ExperimentConfig::from_json(r#"{"horizons": [2, 1]}"#).unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn geometry_is_shared() {
        let c = ExperimentConfig::from_json(r#"{"geometry": {"lane_width": 3.5}}"#).unwrap();
        assert_eq!(c.sim.geometry.lane_width, 3.5);
        let e = ExperimentConfig::from_json(r#"{"sim": {"geometry": {"lane_width": 3.0}}}"#).unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn roundtrip() {
        let c = ExperimentConfig::default().with_seed(7);
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }
}
