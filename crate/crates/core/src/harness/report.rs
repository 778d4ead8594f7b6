//! Report types with fixed, documented CSV headers. Float cells are printed
//! with shortest-round-trip formatting, so a rerun under the same
//! configuration is byte-identical.

use crate::env::StepTrace;
use crate::error::Result;
use serde::Serialize;
use std::collections::BTreeMap;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One aggregated policy row.
///
/// `p_vs_reference` is a permutation-test p-value against the deep-Q
/// reference row: on per-episode RMSE for the policy comparison and
/// sensitivity scenarios, on per-episode detection indicators for the
/// scalability scenario. The reference row itself carries no p-value.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub policy: String,
    pub mean_rmse: Option<f64>,
    pub rmse_sd: Option<f64>,
    pub detection_rate: Option<f64>,
    pub mean_return: Option<f64>,
    pub episodes: usize,
    pub p_vs_reference: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub const CSV_HEADER: &'static str =
        "policy,mean_rmse,rmse_sd,detection_rate,mean_return,episodes,p_vs_reference,note";

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER.split(','))?;
        for r in &self.rows {
            w.write_record(&[
                r.policy.clone(),
                fmt_opt(r.mean_rmse),
                fmt_opt(r.rmse_sd),
                fmt_opt(r.detection_rate),
                fmt_opt(r.mean_return),
                r.episodes.to_string(),
                fmt_opt(r.p_vs_reference),
                r.note.clone(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(format!("{}\n", serde_json::to_string_pretty(self)?))
    }

    pub fn row(&self, policy: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }
}

/// Per-episode samples for one policy.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EpisodeSamples {
    pub rmse: Vec<f64>,
    pub returns: Vec<f64>,
    pub bloom_present: Vec<bool>,
    pub detected: Vec<bool>,
}

impl EpisodeSamples {
    pub fn push(&mut self, rmse: f64, ret: f64, bloom: bool, detected: bool) {
        self.rmse.push(rmse);
        self.returns.push(ret);
        self.bloom_present.push(bloom);
        self.detected.push(detected);
    }

    /// Detection rate over bloom-present episodes; `None` without blooms.
    pub fn detection_rate(&self) -> Option<f64> {
        let bloom_episodes = self.bloom_present.iter().filter(|&&b| b).count();
        if bloom_episodes == 0 {
            return None;
        }
        let hits = self
            .bloom_present
            .iter()
            .zip(&self.detected)
            .filter(|(&b, &d)| b && d)
            .count();
        Some(hits as f64 / bloom_episodes as f64)
    }

    /// 0/1 detection outcomes over bloom-present episodes.
    pub fn detection_indicators(&self) -> Vec<f64> {
        self.bloom_present
            .iter()
            .zip(&self.detected)
            .filter(|(&b, _)| b)
            .map(|(_, &d)| if d { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Output of the policy-comparison and scalability scenarios.
#[derive(Debug, Clone, Serialize)]
pub struct CompareOutcome {
    pub table: ReportTable,
    pub samples: BTreeMap<String, EpisodeSamples>,
    pub traces: Vec<StepTrace>,
}

impl CompareOutcome {
    /// Step traces as CSV `(seed, policy, step, action, r_info, r_uncert,
    /// r_spatial, reward)`.
    pub fn traces_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "seed", "policy", "step", "action", "r_info", "r_uncert", "r_spatial", "reward",
        ])?;
        for t in &self.traces {
            w.write_record(&[
                t.seed.to_string(),
                t.policy.clone(),
                t.step.to_string(),
                t.action.to_string(),
                t.r_info.to_string(),
                t.r_uncert.to_string(),
                t.r_spatial.to_string(),
                t.reward.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
    }
}

/// Aggregated ablation row per feature representation.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub feature_kind: String,
    pub dimension: usize,
    pub train_r2: f64,
    pub test_r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationOutcome {
    pub rows: Vec<AblationRow>,
    pub seeds: usize,
    /// Per-seed test R-squared, keyed like `rows`.
    pub per_seed_test_r2: BTreeMap<String, Vec<f64>>,
    pub per_seed_train_r2: BTreeMap<String, Vec<f64>>,
    /// Seeds where the physics representation generalized at least as well
    /// as the raw bands.
    pub physics_wins_over_raw: usize,
    pub physics_gap_mean: f64,
    pub raw_gap_mean: f64,
    pub teacher_test_r2_mean: f64,
    pub student_test_r2_mean: Option<f64>,
}

impl AblationOutcome {
    pub const CSV_HEADER: &'static str = "feature_kind,dimension,train_r2,test_r2";

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER.split(','))?;
        for r in &self.rows {
            w.write_record(&[
                r.feature_kind.clone(),
                r.dimension.to_string(),
                r.train_r2.to_string(),
                r.test_r2.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(format!("{}\n", serde_json::to_string_pretty(self)?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityRow {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mean_rmse: f64,
    pub detection_rate: Option<f64>,
    pub mean_return: f64,
    /// Mean pairwise distance among the stations each episode selected.
    pub mean_pairwise_spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityOutcome {
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityOutcome {
    pub const CSV_HEADER: &'static str =
        "alpha,beta,gamma,mean_rmse,detection_rate,mean_return,mean_pairwise_spread";

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER.split(','))?;
        for r in &self.rows {
            w.write_record(&[
                r.alpha.to_string(),
                r.beta.to_string(),
                r.gamma.to_string(),
                r.mean_rmse.to_string(),
                fmt_opt(r.detection_rate),
                r.mean_return.to_string(),
                r.mean_pairwise_spread.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(format!("{}\n", serde_json::to_string_pretty(self)?))
    }
}
