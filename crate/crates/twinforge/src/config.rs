//! Pipeline configuration: a single JSON document; CLI flags override
//! individual fields after parsing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use twinforge_core::doe::FeatureVector;
use twinforge_core::signals::{AprbsConfig, MultisineConfig, TimeGrid};
use twinforge_core::{FomConfig, TrainConfig};

/// Env var consulted for the store root when the config leaves it unset.
pub const STORE_ENV: &str = "TWINFORGE_STORE";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub n_samples: usize,
    pub dt: f64,
    pub t0: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_samples: 280, dt: 5.0, t0: 0.0 }
    }
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.n_samples, self.dt, self.t0).map_err(|e| anyhow!("{e}"))
    }
}

/// How many signals of each kind to synthesize, and with which generator
/// settings. Seeds are `seed_base + index` over the concatenated plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalPlan {
    pub grid: GridConfig,
    pub seed_base: u64,
    pub n_aprbs: usize,
    pub n_sinaprbs: usize,
    pub n_multisine: usize,
    pub aprbs: AprbsConfig,
    pub sinaprbs: AprbsConfig,
    pub multisine: MultisineConfig,
}

impl Default for SignalPlan {
    fn default() -> Self {
        // Hold times are capped so four plateaus always fit the default
        // 1395 s span; sinAPRBS additionally needs room for its ramps.
        let aprbs = AprbsConfig { hold_max: 320.0, ..AprbsConfig::default() };
        let sinaprbs = AprbsConfig { transition_time: 60.0, ..aprbs };
        Self {
            grid: GridConfig::default(),
            seed_base: 1,
            n_aprbs: 14,
            n_sinaprbs: 3,
            n_multisine: 3,
            aprbs,
            sinaprbs,
            multisine: MultisineConfig::default(),
        }
    }
}

impl SignalPlan {
    pub fn total(&self) -> usize {
        self.n_aprbs + self.n_sinaprbs + self.n_multisine
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Rule choosing the base data set among the non-test sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseRule {
    pub feature: String,
    pub direction: Direction,
}

impl Default for BaseRule {
    fn default() -> Self {
        Self { feature: "std_tb".into(), direction: Direction::Maximize }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TestGroupConfig {
    pub k: usize,
    pub bins: usize,
}

impl Default for TestGroupConfig {
    fn default() -> Self {
        Self { k: 5, bins: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Store root; falls back to $TWINFORGE_STORE when unset.
    pub store_root: Option<PathBuf>,
    pub report_dir: PathBuf,
    pub signals: SignalPlan,
    pub fom: FomConfig,
    pub train: TrainConfig,
    pub test_group: TestGroupConfig,
    pub base_rule: BaseRule,
    /// Number of top-ranked partners confirmed by actual 2-set training.
    pub partner_count: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            store_root: None,
            report_dir: PathBuf::from("report"),
            signals: SignalPlan::default(),
            fom: FomConfig::default(),
            train: TrainConfig::default(),
            test_group: TestGroupConfig::default(),
            base_rule: BaseRule::default(),
            partner_count: 3,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Resolved store root (config field, then env var).
    pub fn store_root(&self) -> Result<PathBuf> {
        if let Some(root) = &self.store_root {
            return Ok(root.clone());
        }
        if let Ok(v) = std::env::var(STORE_ENV) {
            if !v.is_empty() {
                return Ok(PathBuf::from(v));
            }
        }
        bail!("no store root: set store_root in the config or ${STORE_ENV}")
    }

    pub fn validate(&self) -> Result<()> {
        if self.signals.total() < 1 {
            bail!("signal plan must request at least one signal");
        }
        if self.test_group.k < 1 || self.test_group.k >= self.signals.total() {
            bail!(
                "test-group size k={} must leave at least one training set out of {}",
                self.test_group.k,
                self.signals.total()
            );
        }
        if self.partner_count < 1 {
            bail!("partner_count must be at least 1");
        }
        if !FeatureVector::NAMES.contains(&self.base_rule.feature.as_str()) {
            bail!(
                "unknown base-rule feature '{}'; known: {}",
                self.base_rule.feature,
                FeatureVector::NAMES.join(", ")
            );
        }
        let grid = self.signals.grid.to_grid()?;
        self.fom.validate(grid.dt).map_err(|e| anyhow!("{e}"))?;
        Ok(())
    }
}
