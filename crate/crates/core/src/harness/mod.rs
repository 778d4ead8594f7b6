//! Experiment harness: policy comparison on the 8-station benchmark, the
//! 50-station scalability study, the feature-representation ablation,
//! reward-weight sensitivity scans, and permutation-based significance
//! testing. Every report is a deterministic function of its configuration.

mod config;
mod report;
mod run;

pub use config::{load_config, AblationConfig, BenchConfig, Scenario, SceneConfig};
pub use report::{
    AblationOutcome, AblationRow, CompareOutcome, EpisodeSamples, ReportRow, ReportTable,
    SensitivityOutcome, SensitivityRow,
};
pub use run::{
    build_pipeline, run_episode, run_hdlss_ablation, run_policy_compare, run_scalability,
    sensitivity_scan, POLICY_NAMES,
};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use rand::seq::SliceRandom;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Coefficient of determination against the test-set mean.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> f64 {
    let m = mean(truth);
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    let ss_res: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    if ss_tot <= 0.0 {
        return f64::NAN;
    }
    1.0 - ss_res / ss_tot
}

/// Two-sided permutation test of the difference in means:
/// `p = (1 + #{permuted |d| >= observed |d|}) / (resamples + 1)`.
/// Deterministic per seed; a degenerate all-equal pooled sample yields 1.
pub fn permutation_test(
    sample_a: &[f64],
    sample_b: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if sample_a.len() < 2 || sample_b.len() < 2 {
        return Err(Error::Config("both samples need at least 2 values".into()));
    }
    if resamples < 1000 {
        return Err(Error::Config("need at least 1000 resamples".into()));
    }
    let mut pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    if pooled.iter().all(|&v| v == pooled[0]) {
        return Ok(1.0);
    }
    let n_a = sample_a.len() as f64;
    let n_b = sample_b.len() as f64;
    let total: f64 = pooled.iter().sum();
    let observed = (mean(sample_a) - mean(sample_b)).abs();
    let mut rng = seeded_rng(seed);
    let mut hits = 0usize;
    for _ in 0..resamples {
        pooled.shuffle(&mut rng);
        let sum_a: f64 = pooled[..sample_a.len()].iter().sum();
        let delta = (sum_a / n_a - (total - sum_a) / n_b).abs();
        // Count ties as extreme; shuffled sums can drift by rounding.
        if delta >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (resamples + 1) as f64)
}
