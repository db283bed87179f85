use std::path::{Path, PathBuf};

use dfp_core::fictitious_play::RunConfig;
use dfp_core::game_model::LqParams;
use dfp_core::lq_oracle::DEFAULT_GRID;
use serde::{Deserialize, Serialize};

use crate::Exit;

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lq: LqParams,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default = "default_grid")]
    pub oracle_grid: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("dfp-run")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, Exit> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Exit::config(format!("invalid config at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Exit> {
        let text = std::fs::read_to_string(path).map_err(|e| Exit::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), Exit> {
        self.lq.validate().map_err(Exit::from)?;
        self.run.validate(&self.lq.dims).map_err(Exit::from)?;
        if self.oracle_grid < 100 {
            return Err(Exit::config("invalid config at `oracle_grid`: must be at least 100".into()));
        }
        Ok(())
    }

    /// Fully resolved JSON, every default written out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"lq": {"a": 1, "q": 0, "epsilon": 1, "c": 1, "sigma": 1, "rho": 0,
        "dims": {"n_players": 2, "state_dim": 1, "control_dim": 1, "noise_dim": 1, "horizon": 1, "n_steps": 5},
        "x0": [0, 1]}, "run": {"n_paths": 256, "train": {"minibatch": 64}}}"#;

    #[test]
    fn defaults_are_materialized_and_round_trip() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.oracle_grid, DEFAULT_GRID);
        assert_eq!(cfg.run.train.epochs, 200);
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("\"minibatch\": 64", "\"minibatch\": \"x\"");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("run.train.minibatch"), "{}", err.message);
        let unknown = MINIMAL.replace("\"rho\": 0", "\"rho\": 0, \"r\": 1");
        assert_eq!(ExperimentConfig::from_json(&unknown).unwrap_err().code, 2);
        let q_too_big = MINIMAL.replace("\"q\": 0", "\"q\": 2");
        let err = ExperimentConfig::from_json(&q_too_big).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains('q'));
    }
}
