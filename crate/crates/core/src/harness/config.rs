//! Versioned experiment configuration. Files are TOML with a strict schema:
//! unknown keys are rejected, absent sections fall back to scenario
//! defaults.

use crate::belief::{BeliefConfig, StudentConfig};
use crate::env::RewardWeights;
use crate::error::{Error, Result};
use crate::synth::Layout;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PolicyCompare,
    Scalability,
    Ablation,
    Sensitivity,
}

/// Scene and budget parameters shared by every scenario.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_stations: usize,
    pub budget: usize,
    pub correlation_length: f64,
    pub scale: f64,
    pub bloom_threshold: f64,
    pub layout: Layout,
    /// Evenly spaced visible/NIR bands; also the raw feature dimension.
    pub grid_bands: usize,
    pub c_half: f64,
    pub noise_sd: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_stations: 8,
            budget: 3,
            correlation_length: 0.4,
            scale: 1.0,
            bloom_threshold: 1.5,
            layout: Layout::Halton,
            grid_bands: 117,
            c_half: 1.0,
            noise_sd: 2e-4,
        }
    }
}

/// Feature-representation ablation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub n_test: usize,
    /// Bloom-endmember scale applied to the shifted test year.
    pub shift_factor: f64,
    pub pool_size: usize,
    pub ridge_reg: f64,
    pub include_ssl: bool,
    pub student: StudentConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            n_test: 92,
            shift_factor: 1.15,
            pool_size: 10_000,
            ridge_reg: 1.0,
            include_ssl: false,
            student: StudentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityPolicy {
    Dqn,
    Ucb,
    GreedyRisk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub grid: Vec<RewardWeights>,
    pub policy: SensitivityPolicy,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            grid: vec![
                RewardWeights::default(),
                RewardWeights { alpha: 1.0, beta: 0.0, gamma: 0.0 },
                RewardWeights { alpha: 0.0, beta: 1.0, gamma: 0.0 },
                RewardWeights { alpha: 0.0, beta: 0.0, gamma: 1.0 },
            ],
            policy: SensitivityPolicy::Dqn,
        }
    }
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub version: u32,
    pub scenario: Scenario,
    /// Evaluation episodes (policy comparison) or seed replicates (ablation).
    pub episodes: usize,
    pub seed: u64,
    /// Explicit per-episode seeds; derived from `seed` when absent.
    pub eval_seeds: Option<Vec<u64>>,
    pub output_dir: Option<String>,
    pub scene: SceneConfig,
    pub weights: RewardWeights,
    /// Labeled sample count used to fit the belief model (and the ablation
    /// teacher).
    pub belief_samples: usize,
    pub belief: BeliefConfig,
    pub dqn: crate::agents::DqnHyper,
    pub ucb_beta: f64,
    pub oracle_cap: u64,
    pub permutation_resamples: usize,
    pub ablation: AblationConfig,
    pub sensitivity: SensitivityConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            scenario: Scenario::PolicyCompare,
            episodes: 500,
            seed: 20260207,
            eval_seeds: None,
            output_dir: None,
            scene: SceneConfig::default(),
            weights: RewardWeights::default(),
            belief_samples: 98,
            belief: BeliefConfig::default(),
            dqn: crate::agents::DqnHyper::default(),
            ucb_beta: 1.0,
            oracle_cap: 1_000_000,
            permutation_resamples: 10_000,
            ablation: AblationConfig::default(),
            sensitivity: SensitivityConfig::default(),
        }
    }
}

impl BenchConfig {
    /// The 8-station / budget-3 benchmark, 500 evaluation episodes.
    pub fn policy_compare() -> Self {
        Self::default()
    }

    /// The 50-station / budget-5 scalability study, 200 episodes. Blooms are
    /// rarer (higher threshold) so detection separates the policies.
    pub fn scalability() -> Self {
        Self {
            scenario: Scenario::Scalability,
            episodes: 200,
            scene: SceneConfig {
                n_stations: 50,
                budget: 5,
                bloom_threshold: 4.0,
                correlation_length: 0.25,
                ..SceneConfig::default()
            },
            ..Self::default()
        }
    }

    /// Feature-representation ablation over 20 seed replicates (ridge only).
    pub fn ablation() -> Self {
        Self {
            scenario: Scenario::Ablation,
            episodes: 20,
            ..Self::default()
        }
    }

    /// Ablation including the teacher-student comparison, 10 replicates.
    pub fn ablation_ssl() -> Self {
        let mut cfg = Self::ablation();
        cfg.episodes = 10;
        cfg.ablation.include_ssl = true;
        cfg
    }

    pub fn sensitivity() -> Self {
        Self {
            scenario: Scenario::Sensitivity,
            episodes: 100,
            ..Self::default()
        }
    }

    /// Seeds of the evaluation episodes.
    pub fn episode_seeds(&self) -> Vec<u64> {
        match &self.eval_seeds {
            Some(seeds) => seeds.clone(),
            None => (0..self.episodes as u64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        if let Some(seeds) = &self.eval_seeds {
            if seeds.is_empty() {
                return Err(Error::Config("eval_seeds must be non-empty".into()));
            }
        }
        let s = &self.scene;
        if s.budget == 0 || s.budget > s.n_stations {
            return Err(Error::Config(format!(
                "budget {} must lie in [1, {}]",
                s.budget, s.n_stations
            )));
        }
        if s.n_stations < 2 {
            return Err(Error::Config("need at least 2 stations".into()));
        }
        if s.grid_bands < 8 {
            return Err(Error::Config("grid_bands must be >= 8".into()));
        }
        if !(s.correlation_length > 0.0) || !(s.scale > 0.0) || !(s.c_half > 0.0) {
            return Err(Error::Config(
                "correlation_length, scale, and c_half must be > 0".into(),
            ));
        }
        if s.noise_sd < 0.0 {
            return Err(Error::Config("noise_sd must be >= 0".into()));
        }
        self.weights.validate()?;
        if !self.ucb_beta.is_finite() {
            return Err(Error::Config("ucb_beta must be finite".into()));
        }
        if self.belief_samples < 2 {
            return Err(Error::Config("belief_samples must be >= 2".into()));
        }
        if self.sensitivity.grid.is_empty() {
            return Err(Error::Config("sensitivity grid must be non-empty".into()));
        }
        for w in &self.sensitivity.grid {
            w.validate()?;
        }
        Ok(())
    }
}

/// Parse and validate a TOML configuration file. Unknown keys are errors.
pub fn load_config(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: BenchConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [
            BenchConfig::policy_compare(),
            BenchConfig::scalability(),
            BenchConfig::ablation(),
            BenchConfig::ablation_ssl(),
            BenchConfig::sensitivity(),
        ] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_and_unknown_key_rejection() {
        let cfg = BenchConfig::scalability();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: BenchConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.scene.n_stations, 50);
        assert_eq!(back.scenario, Scenario::Scalability);

        let bad = format!("{text}\nnot_a_real_key = 3\n");
        assert!(toml::from_str::<BenchConfig>(&bad).is_err());

        let bad_nested = "version = 1\n[scene]\nn_stations = 8\nbogus = true\n";
        assert!(toml::from_str::<BenchConfig>(bad_nested).is_err());
    }

    #[test]
    fn invalid_budget_rejected() {
        let mut cfg = BenchConfig::policy_compare();
        cfg.scene.budget = 99;
        assert!(cfg.validate().is_err());
        cfg.scene.budget = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut cfg = BenchConfig::policy_compare();
        cfg.version = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn episode_seeds_derived_or_explicit() {
        let mut cfg = BenchConfig::policy_compare();
        cfg.episodes = 4;
        assert_eq!(cfg.episode_seeds(), vec![0, 1, 2, 3]);
        cfg.eval_seeds = Some(vec![9, 11]);
        assert_eq!(cfg.episode_seeds(), vec![9, 11]);
    }
}
