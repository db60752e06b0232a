//! Run configuration file: JSON with the model hyperparameters, the emission
//! mode, the data schema and one top-level seed that feeds every RNG stream.

use std::path::Path;

use serde::{Deserialize, Serialize};

use motionseg::io::CorpusSchema;
use motionseg::types::{Hyperparams, Mode};
use motionseg::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; overrides `hyperparams.seed`.
    pub seed: u64,
    pub mode: Mode,
    pub hyperparams: Hyperparams,
    pub data: CorpusSchema,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            mode: Mode::ElementUnigram,
            hyperparams: Hyperparams::default(),
            data: CorpusSchema::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.hyperparams.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Hyperparameters with the master seed applied.
    pub fn effective_hyperparams(&self) -> Hyperparams {
        Hyperparams { seed: self.seed, ..self.hyperparams.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_every_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let cfg = RunConfig {
            seed: 17,
            mode: Mode::WordSeg,
            hyperparams: Hyperparams { element_classes: 9, ..Default::default() },
            data: CorpusSchema { standardize: true, ..Default::default() },
        };
        cfg.save(&path).unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(loaded, cfg);

        // re-serialized JSON equals the file as a value (key order aside)
        let original: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let reserialized: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&loaded).unwrap()).unwrap();
        assert_eq!(original, reserialized);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"seed": 1, "bogus": true}"#).unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn master_seed_wins() {
        let cfg = RunConfig {
            seed: 5,
            hyperparams: Hyperparams { seed: 99, ..Default::default() },
            ..Default::default()
        };
        assert_eq!(cfg.effective_hyperparams().seed, 5);
    }
}
