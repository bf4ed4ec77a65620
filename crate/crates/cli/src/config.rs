//! Pipeline configuration: the vectorization keys at the top level plus
//! forest, worker, seed, and split settings.

use serde::{Deserialize, Serialize};

use pmiv::config::VectorizeConfig;
use pmiv::forest::ForestConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> anyhow::Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p) || p.is_nan()) {
            anyhow::bail!("split ratios must lie in [0, 1]");
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            anyhow::bail!("split ratios must sum to 1, got {total}");
        }
        if self.train == 0.0 || self.test == 0.0 {
            anyhow::bail!("train and test splits must be nonempty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub vectorize: VectorizeConfig,
    pub forest: ForestConfig,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub seed: u64,
    pub split: SplitRatios,
}

impl PipelineConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: PipelineConfig = serde_json::from_slice(&bytes)
            .map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.vectorize.validate()?;
        self.forest.validate()?;
        self.split.validate()?;
        Ok(())
    }
}
