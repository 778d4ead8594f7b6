//! Sequential station-selection environment: a reduced belief state over N
//! candidates, budgeted selection of K distinct stations, a three-component
//! reward, and end-of-episode field reconstruction and metrics.

use crate::belief::BeliefEnsemble;
use crate::error::{Error, Result};
use crate::synth::Scene;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// Coefficients of the three reward components: information (negative
/// absolute belief error), uncertainty (belief sigma at the pick), and
/// spatial spread (min distance to prior picks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.25,
        }
    }
}

impl RewardWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.alpha, self.beta, self.gamma].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("reward weights must be finite".into()));
        }
        if self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0 {
            return Err(Error::Config("at least one reward weight must be nonzero".into()));
        }
        Ok(())
    }
}

/// Episode configuration: budget and reward weights.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnvConfig {
    pub budget: usize,
    pub weights: RewardWeights,
}

/// The agent-facing state: belief mean/uncertainty per candidate plus the
/// visited mask. Dimension scales with the candidate count, independent of
/// the spectral dimension.
#[derive(Debug, Clone)]
pub struct BeliefState {
    pub mu: Array1<f64>,
    pub sigma: Array1<f64>,
    pub visited: Vec<bool>,
    pub step: usize,
    budget: usize,
    scene_diameter: f64,
}

impl BeliefState {
    pub fn n(&self) -> usize {
        self.visited.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn done(&self) -> bool {
        self.step >= self.budget
    }

    pub fn unvisited(&self) -> impl Iterator<Item = usize> + '_ {
        self.visited
            .iter()
            .enumerate()
            .filter(|(_, &v)| !v)
            .map(|(i, _)| i)
    }

    pub fn visited_indices(&self) -> Vec<usize> {
        self.visited
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| i)
            .collect()
    }

    /// Flat `[mu || sigma || mask]` vector of length `3N` for Q-networks.
    pub fn vector(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(3 * n);
        out.extend(self.mu.iter());
        out.extend(self.sigma.iter());
        out.extend(self.visited.iter().map(|&v| if v { 1.0 } else { 0.0 }));
        out
    }

    /// Assemble a state directly; tests and simulators use this to inject
    /// hand-crafted beliefs.
    pub fn from_parts(
        mu: Array1<f64>,
        sigma: Array1<f64>,
        visited: Vec<bool>,
        budget: usize,
        scene_diameter: f64,
    ) -> Result<Self> {
        let n = mu.len();
        if sigma.len() != n || visited.len() != n {
            return Err(Error::Shape("state vectors must share length".into()));
        }
        let step = visited.iter().filter(|&&v| v).count();
        if budget > n || step > budget {
            return Err(Error::Config("visited count exceeds budget or budget exceeds N".into()));
        }
        Ok(Self {
            mu,
            sigma,
            visited,
            step,
            budget,
            scene_diameter,
        })
    }
}

/// Start an episode: belief predictions over every station, nothing visited.
pub fn reset(scene: &Scene, ensemble: &BeliefEnsemble, cfg: &EnvConfig) -> Result<BeliefState> {
    let n = scene.n_stations();
    if cfg.budget > n {
        return Err(Error::Config(format!(
            "budget {} exceeds station count {n}",
            cfg.budget
        )));
    }
    if cfg.budget == 0 {
        return Err(Error::Config("budget must be >= 1".into()));
    }
    cfg.weights.validate()?;
    let (mu, sigma) = ensemble.predict_spectra(&scene.spectra)?;
    Ok(BeliefState {
        mu,
        sigma,
        visited: vec![false; n],
        step: 0,
        budget: cfg.budget,
        scene_diameter: scene.field.max_pairwise_distance(),
    })
}

/// The three reward components for selecting `action` in `state`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    /// Negative absolute belief error at the selected station.
    pub info: f64,
    /// Belief sigma at the selected station (pre-observation).
    pub uncert: f64,
    /// Min distance to previously selected stations; the scene diameter on
    /// the first pick so the term stays bounded and scale-consistent.
    pub spatial: f64,
}

impl RewardComponents {
    pub fn combine(&self, w: &RewardWeights) -> f64 {
        w.alpha * self.info + w.beta * self.uncert + w.gamma * self.spatial
    }
}

pub fn reward_components(
    state: &BeliefState,
    action: usize,
    scene: &Scene,
) -> RewardComponents {
    let info = -(scene.field.truth[action] - state.mu[action]).abs();
    let uncert = state.sigma[action];
    let spatial = state
        .visited_indices()
        .iter()
        .map(|&k| scene.field.distance(action, k))
        .fold(f64::INFINITY, f64::min);
    let spatial = if spatial.is_finite() {
        spatial
    } else {
        state.scene_diameter
    };
    RewardComponents {
        info,
        uncert,
        spatial,
    }
}

/// Outcome of one selection.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: BeliefState,
    pub reward: f64,
    pub components: RewardComponents,
    pub done: bool,
}

/// Select an unvisited station, collect the reward, advance the mask.
/// Beliefs are not refit mid-episode.
pub fn step(
    state: &BeliefState,
    action: usize,
    scene: &Scene,
    weights: &RewardWeights,
) -> Result<StepOutcome> {
    if state.done() {
        return Err(Error::InvalidAction("budget exhausted".into()));
    }
    if action >= state.n() {
        return Err(Error::InvalidAction(format!(
            "station {action} out of range (N = {})",
            state.n()
        )));
    }
    if state.visited[action] {
        return Err(Error::InvalidAction(format!("station {action} already visited")));
    }
    let components = reward_components(state, action, scene);
    let reward = components.combine(weights);
    let mut next = state.clone();
    next.visited[action] = true;
    next.step += 1;
    let done = next.done();
    Ok(StepOutcome {
        state: next,
        reward,
        components,
        done,
    })
}

/// Residual-corrected field estimate: the belief mean plus an
/// inverse-distance-squared blend of the observed residuals at visited
/// stations. Exactly reproduces the observation at a visited station.
pub fn reconstruct(state: &BeliefState, scene: &Scene) -> Array1<f64> {
    let visited = state.visited_indices();
    let n = state.n();
    let mut estimate = state.mu.clone();
    if visited.is_empty() {
        return estimate;
    }
    let residual: Vec<f64> = visited
        .iter()
        .map(|&k| scene.field.truth[k] - state.mu[k])
        .collect();
    for i in 0..n {
        if state.visited[i] {
            estimate[i] = scene.field.truth[i];
            continue;
        }
        let mut weights = Vec::with_capacity(visited.len());
        let mut exact = None;
        for (j, &k) in visited.iter().enumerate() {
            let d = scene.field.distance(i, k);
            if d < 1e-12 {
                exact = Some(j);
                break;
            }
            weights.push(1.0 / (d * d));
        }
        if let Some(j) = exact {
            estimate[i] = state.mu[i] + residual[j];
            continue;
        }
        let total: f64 = weights.iter().sum();
        let correction: f64 = weights
            .iter()
            .zip(&residual)
            .map(|(w, r)| w / total * r)
            .sum();
        estimate[i] += correction;
    }
    estimate
}

/// End-of-episode record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub reconstruction_rmse: f64,
    pub bloom_present: bool,
    pub bloom_detected: bool,
}

impl EpisodeReport {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Lake-wide RMSE over all stations plus bloom presence/detection flags.
/// Detection requires visiting at least one station whose true value meets
/// the bloom threshold; episodes without a bloom are excluded from rate
/// denominators downstream.
pub fn episode_metrics(
    state: &BeliefState,
    scene: &Scene,
    actions: Vec<usize>,
    rewards: Vec<f64>,
) -> EpisodeReport {
    let estimate = reconstruct(state, scene);
    let truth = ndarray::ArrayView1::from(&scene.field.truth[..]);
    let rmse = (&estimate - &truth)
        .mapv(|d| d * d)
        .mean()
        .unwrap()
        .sqrt();
    let threshold = scene.field.bloom_threshold;
    let bloom_present = scene.field.truth.iter().any(|&t| t >= threshold);
    let bloom_detected = bloom_present
        && actions
            .iter()
            .any(|&a| scene.field.truth[a] >= threshold);
    EpisodeReport {
        actions,
        rewards,
        reconstruction_rmse: rmse,
        bloom_present,
        bloom_detected,
    }
}

/// One CSV-exportable step trace row.
#[derive(Debug, Clone, Serialize)]
pub struct StepTrace {
    pub seed: u64,
    pub policy: String,
    pub step: usize,
    pub action: usize,
    pub r_info: f64,
    pub r_uncert: f64,
    pub r_spatial: f64,
    pub reward: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BeliefEnsemble, FeatureKind, Standardizer};
    use crate::nn::Network;
    use crate::synth::{
        generate_field, render_scene, ForwardModel, WavelengthGrid,
    };
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::sync::Arc;

    fn test_scene(n: usize, seed: u64) -> Scene {
        let grid = Arc::new(WavelengthGrid::control_points());
        let model = ForwardModel::new(grid, 1.0, 1.0).unwrap();
        let field = generate_field(n, 0.4, seed).unwrap();
        render_scene(&field, &model, 0, 0.0, seed).unwrap()
    }

    fn constant_ensemble(value: f64) -> BeliefEnsemble {
        BeliefEnsemble::from_members(
            vec![Network::constant(10, value)],
            FeatureKind::Physics,
            Standardizer::identity(10),
            (0.0, 2.0),
            value,
            1.0,
        )
        .unwrap()
    }

    fn state_with(mu: Vec<f64>, sigma: Vec<f64>, visited: Vec<bool>, budget: usize) -> BeliefState {
        BeliefState::from_parts(Array1::from(mu), Array1::from(sigma), visited, budget, 1.0)
            .unwrap()
    }

    #[test]
    fn reset_produces_expected_shape() {
        let scene = test_scene(8, 3);
        let ens = constant_ensemble(1.0);
        let cfg = EnvConfig {
            budget: 3,
            weights: RewardWeights::default(),
        };
        let state = reset(&scene, &ens, &cfg).unwrap();
        assert_eq!(state.n(), 8);
        assert_eq!(state.step, 0);
        assert!(state.visited.iter().all(|&v| !v));
        assert_eq!(state.vector().len(), 24);

        let again = reset(&scene, &ens, &cfg).unwrap();
        assert_eq!(state.mu, again.mu);
        assert_eq!(state.sigma, again.sigma);
    }

    #[test]
    fn reset_rejects_budget_over_n() {
        let scene = test_scene(4, 3);
        let ens = constant_ensemble(1.0);
        let cfg = EnvConfig {
            budget: 5,
            weights: RewardWeights::default(),
        };
        assert!(reset(&scene, &ens, &cfg).is_err());
    }

    #[test]
    fn budget_equal_to_n_visits_everything() {
        let scene = test_scene(4, 9);
        let ens = constant_ensemble(1.0);
        let cfg = EnvConfig {
            budget: 4,
            weights: RewardWeights::default(),
        };
        let mut state = reset(&scene, &ens, &cfg).unwrap();
        for a in 0..4 {
            let out = step(&state, a, &scene, &cfg.weights).unwrap();
            state = out.state;
            assert_eq!(out.done, a == 3);
        }
        assert!(state.visited.iter().all(|&v| v));
    }

    #[test]
    fn reward_collapses_to_single_components() {
        let mut scene = test_scene(3, 1);
        scene.field.truth = vec![1.5, 0.5, 2.0];
        let state = state_with(
            vec![2.0, 0.5, 2.0],
            vec![0.1, 0.3, 0.2],
            vec![false; 3],
            2,
        );
        // info only: mu(0)=2.0, truth=1.5 -> -0.5
        let w = RewardWeights::new(1.0, 0.0, 0.0).unwrap();
        let out = step(&state, 0, &scene, &w).unwrap();
        assert_abs_diff_eq!(out.reward, -0.5, epsilon = 1e-12);
        // uncert only: sigma(1)=0.3
        let w = RewardWeights::new(0.0, 1.0, 0.0).unwrap();
        let out = step(&state, 1, &scene, &w).unwrap();
        assert_abs_diff_eq!(out.reward, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn spatial_reward_is_min_distance_and_diameter_first() {
        let mut scene = test_scene(3, 1);
        scene.field.station_coords = vec![(0.0, 0.0), (0.4, 0.0), (1.0, 0.0)];
        scene.field.truth = vec![1.0, 1.0, 1.0];
        let w = RewardWeights::new(0.0, 0.0, 1.0).unwrap();
        let state = BeliefState::from_parts(
            array![1.0, 1.0, 1.0],
            array![0.0, 0.0, 0.0],
            vec![false; 3],
            3,
            scene.field.max_pairwise_distance(),
        )
        .unwrap();
        // First pick earns the scene diameter (1.0 here).
        let first = step(&state, 0, &scene, &w).unwrap();
        assert_abs_diff_eq!(first.reward, 1.0, epsilon = 1e-12);
        // Second pick at distance 0.4 from the first.
        let second = step(&first.state, 1, &scene, &w).unwrap();
        assert_abs_diff_eq!(second.reward, 0.4, epsilon = 1e-12);
        // Third pick: min(0.6 to station 1, 1.0 to station 0) = 0.6.
        let third = step(&second.state, 2, &scene, &w).unwrap();
        assert_abs_diff_eq!(third.reward, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn revisits_and_exhausted_budget_are_errors() {
        let scene = test_scene(3, 2);
        let w = RewardWeights::default();
        let state = state_with(vec![1.0; 3], vec![0.0; 3], vec![false; 3], 1);
        let out = step(&state, 1, &scene, &w).unwrap();
        assert!(out.done);
        assert!(matches!(
            step(&out.state, 0, &scene, &w),
            Err(Error::InvalidAction(_))
        ));
        let visited = state_with(vec![1.0; 3], vec![0.0; 3], vec![false, true, false], 2);
        assert!(matches!(
            step(&visited, 1, &scene, &w),
            Err(Error::InvalidAction(_))
        ));
    }

    #[test]
    fn reward_is_linear_in_weights() {
        let scene = test_scene(5, 4);
        let state = state_with(
            vec![0.5, 1.5, 2.5, 0.1, 0.9],
            vec![0.1, 0.2, 0.3, 0.4, 0.5],
            vec![true, false, false, false, true],
            4,
        );
        let c = reward_components(&state, 2, &scene);
        let w1 = RewardWeights::new(1.0, 0.25, 0.0).unwrap();
        let w2 = RewardWeights::new(0.5, 0.75, 2.0).unwrap();
        let sum = RewardWeights::new(1.5, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(
            c.combine(&w1) + c.combine(&w2),
            c.combine(&sum),
            epsilon = 1e-12
        );
    }

    #[test]
    fn perfect_belief_reconstructs_exactly() {
        let scene = test_scene(6, 5);
        let mut state = state_with(
            scene.field.truth.clone(),
            vec![0.0; 6],
            vec![false; 6],
            3,
        );
        state.visited[0] = true;
        state.visited[3] = true;
        state.visited[5] = true;
        state.step = 3;
        let estimate = reconstruct(&state, &scene);
        for (e, t) in estimate.iter().zip(&scene.field.truth) {
            assert_abs_diff_eq!(*e, *t, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_bias_is_fully_removed_by_one_observation() {
        let scene = test_scene(6, 6);
        let bias = 0.75;
        let mu: Vec<f64> = scene.field.truth.iter().map(|t| t - bias).collect();
        let mut state = state_with(mu, vec![0.0; 6], vec![false; 6], 1);
        state.visited[2] = true;
        state.step = 1;
        let estimate = reconstruct(&state, &scene);
        for (e, t) in estimate.iter().zip(&scene.field.truth) {
            assert_abs_diff_eq!(*e, *t, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruction_matches_independent_idw_formula() {
        let scene = test_scene(8, 7);
        let mut state = state_with(
            (0..8).map(|i| 0.3 * i as f64).collect(),
            vec![0.0; 8],
            vec![false; 8],
            3,
        );
        for a in [1, 4, 6] {
            state.visited[a] = true;
        }
        state.step = 3;
        let estimate = reconstruct(&state, &scene);

        // Independent reimplementation.
        let visited = [1usize, 4, 6];
        for i in 0..8 {
            let expected = if visited.contains(&i) {
                scene.field.truth[i]
            } else {
                let mut num = 0.0;
                let mut den = 0.0;
                for &k in &visited {
                    let d = scene.field.distance(i, k);
                    let w = 1.0 / (d * d);
                    num += w * (scene.field.truth[k] - state.mu[k]);
                    den += w;
                }
                state.mu[i] + num / den
            };
            assert_abs_diff_eq!(estimate[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn metrics_follow_definitions() {
        let mut scene = test_scene(4, 8);
        scene.field.truth = vec![0.1, 0.2, 2.0, 0.3];
        scene.field.bloom_threshold = 1.5;
        let mut state = state_with(
            scene.field.truth.clone(),
            vec![0.0; 4],
            vec![false; 4],
            2,
        );
        state.visited[2] = true;
        state.visited[0] = true;
        state.step = 2;
        let report = episode_metrics(&state, &scene, vec![2, 0], vec![0.0, 0.0]);
        assert!(report.bloom_present);
        assert!(report.bloom_detected);
        assert_abs_diff_eq!(report.reconstruction_rmse, 0.0, epsilon = 1e-12);

        // Miss the bloom.
        let mut miss = state_with(
            scene.field.truth.clone(),
            vec![0.0; 4],
            vec![false; 4],
            2,
        );
        miss.visited[0] = true;
        miss.visited[1] = true;
        miss.step = 2;
        let report = episode_metrics(&miss, &scene, vec![0, 1], vec![0.0, 0.0]);
        assert!(report.bloom_present);
        assert!(!report.bloom_detected);

        // No bloom at all.
        scene.field.truth = vec![0.1, 0.2, 0.3, 0.4];
        let report = episode_metrics(&miss, &scene, vec![0, 1], vec![0.0, 0.0]);
        assert!(!report.bloom_present);
        assert!(!report.bloom_detected);
    }

    #[test]
    fn info_only_return_equals_negative_abs_error_sum() {
        let scene = test_scene(6, 10);
        let ens = constant_ensemble(1.0);
        let cfg = EnvConfig {
            budget: 3,
            weights: RewardWeights::new(1.0, 0.0, 0.0).unwrap(),
        };
        let mut state = reset(&scene, &ens, &cfg).unwrap();
        let mut total = 0.0;
        let actions = [5, 0, 2];
        for &a in &actions {
            let out = step(&state, a, &scene, &cfg.weights).unwrap();
            total += out.reward;
            state = out.state;
        }
        let expected: f64 = actions
            .iter()
            .map(|&a| -(scene.field.truth[a] - 1.0).abs())
            .sum();
        assert_abs_diff_eq!(total, expected, epsilon = 1e-12);
    }
}
