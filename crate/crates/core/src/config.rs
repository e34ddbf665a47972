//! Tunables for the whole pipeline, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dwcgp::DwcgpConfig;
use crate::error::{Error, Result};
use crate::filters::GaborParams;
use crate::firerisk::WindowGrid;
use crate::orientation::ScaleAggregation;
use crate::segmenter::{Algorithm, TrainingConfig, DEFAULT_THRESHOLD};

pub const DEFAULT_RISK_THRESHOLD: f64 = 26.0;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub path: Option<PathBuf>,
    /// Output at or above this value is grass.
    pub threshold: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            path: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaborSection {
    pub orientations: Vec<f64>,
    pub scales: Vec<f64>,
    pub kernel_size: usize,
    pub sigma_factor: f64,
    pub gamma: f64,
    pub scale_aggregation: ScaleAggregation,
}

impl Default for GaborSection {
    fn default() -> Self {
        let p = GaborParams::default();
        Self {
            orientations: p.orientations,
            scales: p.scales,
            kernel_size: p.kernel_size,
            sigma_factor: p.sigma_factor,
            gamma: p.gamma,
            scale_aggregation: ScaleAggregation::Max,
        }
    }
}

impl GaborSection {
    pub fn params(&self) -> GaborParams {
        GaborParams {
            orientations: self.orientations.clone(),
            scales: self.scales.clone(),
            kernel_size: self.kernel_size,
            sigma_factor: self.sigma_factor,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskSection {
    /// Applied to single-window DWCGP values.
    pub window_threshold: f64,
    /// Applied to the per-frame average over windows.
    pub frame_threshold: f64,
}

impl Default for RiskSection {
    fn default() -> Self {
        Self {
            window_threshold: DEFAULT_RISK_THRESHOLD,
            frame_threshold: DEFAULT_RISK_THRESHOLD,
        }
    }
}

/// Training options; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    pub algorithm: Algorithm,
    pub hidden: usize,
    pub goal_error: f64,
    pub max_epochs: usize,
    pub lm_lambda_init: f64,
    pub lm_lambda_factor: f64,
    pub lm_lambda_max: f64,
    pub gd_learning_rate: f64,
    /// Cap on pixels drawn from a corpus; 0 keeps all of them.
    pub max_samples: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            algorithm: t.algorithm,
            hidden: t.hidden,
            goal_error: t.goal_error,
            max_epochs: t.max_epochs,
            lm_lambda_init: t.lm_lambda_init,
            lm_lambda_factor: t.lm_lambda_factor,
            lm_lambda_max: t.lm_lambda_max,
            gd_learning_rate: t.gd_learning_rate,
            max_samples: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub gabor: GaborSection,
    pub dwcgp: DwcgpConfig,
    pub risk: RiskSection,
    pub windows: WindowGrid,
    pub training: TrainingSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            model: ModelSection::default(),
            gabor: GaborSection::default(),
            dwcgp: DwcgpConfig::default(),
            risk: RiskSection::default(),
            windows: WindowGrid::default(),
            training: TrainingSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.gabor.params().validate()?;
        let w = self.dwcgp.region_width;
        if w == 0 || w % 2 == 0 {
            return Err(Error::InvalidRegionWidth(w));
        }
        if !(0.0..=1.0).contains(&self.model.threshold) {
            return Err(Error::Config(format!(
                "threshold {} outside [0, 1]",
                self.model.threshold
            )));
        }
        if !self.risk.window_threshold.is_finite() || !self.risk.frame_threshold.is_finite() {
            return Err(Error::Config("risk thresholds must be finite".into()));
        }
        self.windows.validate()
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            algorithm: t.algorithm,
            hidden: t.hidden,
            goal_error: t.goal_error,
            max_epochs: t.max_epochs,
            lm_lambda_init: t.lm_lambda_init,
            lm_lambda_factor: t.lm_lambda_factor,
            lm_lambda_max: t.lm_lambda_max,
            gd_learning_rate: t.gd_learning_rate,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dwcgp::{EstimatorMode, LengthAggregation};

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!(c.dwcgp.region_width, 5);
        assert_eq!(c.model.threshold, 0.5);
        assert_eq!(c.risk.window_threshold, 26.0);
        assert_eq!(c.windows.rows * c.windows.cols, 15);
        assert_eq!(c.training.goal_error, 0.001);
        assert_eq!(c.training.max_epochs, 200);
        assert_eq!(c.training.hidden, 16);
        assert_eq!(c.gabor.orientations.len(), 4);
        assert_eq!(c.gabor.scales.len(), 5);
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut c = PipelineConfig::default();
        c.seed = 7;
        c.model.path = Some("weights/net.txt".into());
        c.dwcgp.mode = EstimatorMode::Vocgp;
        c.dwcgp.length_agg = LengthAggregation::Sum;
        c.gabor.scale_aggregation = ScaleAggregation::Average;
        c.gabor.sigma_factor = 0.1 + 0.2;
        let back = PipelineConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c =
            PipelineConfig::from_toml("seed = 3\n[dwcgp]\nregion_width = 7\nmode = \"vocgp\"\n")
                .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.dwcgp.region_width, 7);
        assert_eq!(c.dwcgp.mode, EstimatorMode::Vocgp);
        assert_eq!(c.gabor, GaborSection::default());
        assert_eq!(c.training_config().seed, 3);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(matches!(
            PipelineConfig::from_toml("[dwcgp]\nregion_width = 4\n"),
            Err(Error::InvalidRegionWidth(4))
        ));
        assert!(PipelineConfig::from_toml("[model]\nthreshold = 2.0\n").is_err());
        assert!(PipelineConfig::from_toml("[gabor]\nkernel_size = 10\n").is_err());
        assert!(PipelineConfig::from_toml("seed = \"x\"\n").is_err());
    }
}
