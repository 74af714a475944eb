use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::hierarchizer::HierConfig;
use crate::segment::SegmenterConfig;
use crate::train::TrainConfig;

/// Which titles the hierarchizer is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TitleSource {
    /// Every gold title.
    #[default]
    Gold,
    /// Gold titles that the trained detector also finds.
    Detected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub segmenter: SegmenterConfig,
    pub detector: DetectorConfig,
    pub hierarchizer: HierConfig,
    pub template_path: Option<PathBuf>,
    pub seed: u64,
    /// Inclusive title-probability threshold of the detector.
    pub threshold: f64,
    /// Detector training loop.
    pub train: TrainConfig,
    /// Hierarchizer training loop; its batch size counts documents. Keys left
    /// out keep the hierarchizer defaults, not the detector ones.
    #[serde(deserialize_with = "hierarchizer_train")]
    pub hierarchizer_train: TrainConfig,
    pub hierarchizer_titles: TitleSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            segmenter: SegmenterConfig::default(),
            detector: DetectorConfig::default(),
            hierarchizer: HierConfig::default(),
            template_path: None,
            seed: 0,
            threshold: 0.5,
            train: TrainConfig::default(),
            hierarchizer_train: default_hierarchizer_train(),
            hierarchizer_titles: TitleSource::Gold,
        }
    }
}

pub fn default_hierarchizer_train() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        ..TrainConfig::default()
    }
}

fn hierarchizer_train<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<TrainConfig, D::Error> {
    let overrides = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut base = match serde_json::to_value(default_hierarchizer_train()) {
        Ok(serde_json::Value::Object(m)) => m,
        _ => unreachable!("TrainConfig serializes to an object"),
    };
    base.extend(overrides);
    serde_json::from_value(serde_json::Value::Object(base)).map_err(serde::de::Error::custom)
}

impl PipelineConfig {
    /// Reads TOML (`.toml`) or JSON (anything else) and validates it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.segmenter.validate()?;
        self.detector.validate()?;
        self.hierarchizer.validate()?;
        self.train.validate()?;
        self.hierarchizer_train.validate()?;
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        if let Some(p) = &self.template_path {
            if !p.is_file() {
                return Err(Error::Config(format!("template file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
