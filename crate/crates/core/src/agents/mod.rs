//! Station-selection policies: random and spatially stratified baselines,
//! three greedy rules, an upper-confidence-bound rule, the masked deep-Q
//! agent, and the exhaustive subset oracle.

mod dqn;

pub use dqn::{dqn_select, dqn_train, load_policy, save_policy, DqnHyper, QPolicy};

use crate::belief::BeliefEnsemble;
use crate::env::BeliefState;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::synth::Scene;
use itertools::Itertools;
use ndarray::Array1;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Argmax over unvisited stations; ties break to the lowest index.
fn masked_argmax(state: &BeliefState, score: impl Fn(usize) -> f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in state.unvisited() {
        let s = score(i);
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidAction("all stations visited".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyVariant {
    /// Highest belief mean.
    Intensity,
    /// Highest exceedance probability `P(value >= threshold)` under
    /// `Normal(mu, sigma)`; degenerates to the indicator when sigma is zero.
    Risk,
    /// Farthest-point rule; the first pick is the station closest to the
    /// coordinate centroid.
    Spatial,
}

/// Uniform pick over unvisited stations.
pub fn random_select(state: &BeliefState, rng: &mut ChaCha8Rng) -> Result<usize> {
    let unvisited: Vec<usize> = state.unvisited().collect();
    unvisited
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::InvalidAction("all stations visited".into()))
}

/// Seeded Lloyd's k-means over station coordinates with k-means++ style
/// initialization. Returns a cluster id per station.
pub fn kmeans_clusters(coords: &[(f64, f64)], k: usize, seed: u64) -> Vec<usize> {
    let n = coords.len();
    let k = k.clamp(1, n);
    let mut rng = seeded_rng(seed);
    let d2 = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);

    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(k);
    centers.push(coords[rng.random_range(0..n)]);
    while centers.len() < k {
        let dist: Vec<f64> = coords
            .iter()
            .map(|&c| {
                centers
                    .iter()
                    .map(|&z| d2(c, z))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut draw = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                draw -= d;
                if draw <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.push(coords[next]);
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &c) in coords.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| d2(c, centers[a]).partial_cmp(&d2(c, centers[b])).unwrap())
                .unwrap();
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        for cluster in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == cluster).collect();
            if members.is_empty() {
                // Re-seed an empty cluster on the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        d2(coords[a], centers[assignment[a]])
                            .partial_cmp(&d2(coords[b], centers[assignment[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centers[cluster] = coords[far];
                assignment[far] = cluster;
                continue;
            }
            let (sx, sy) = members
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &i| (sx + coords[i].0, sy + coords[i].1));
            centers[cluster] = (sx / members.len() as f64, sy / members.len() as f64);
        }
        if !changed {
            break;
        }
    }
    assignment
}

/// Episode plan for the stratified baseline: a fixed k-means partition
/// visited round-robin, one uniform pick per unexhausted cluster.
#[derive(Debug, Clone)]
pub struct StratifiedPlan {
    assignment: Vec<usize>,
    k: usize,
}

impl StratifiedPlan {
    pub fn new(coords: &[(f64, f64)], k: usize, seed: u64) -> Self {
        Self {
            assignment: kmeans_clusters(coords, k, seed),
            k: k.clamp(1, coords.len()),
        }
    }

    pub fn select(&self, state: &BeliefState, rng: &mut ChaCha8Rng) -> Result<usize> {
        if state.unvisited().next().is_none() {
            return Err(Error::InvalidAction("all stations visited".into()));
        }
        // Walk clusters round-robin from the current step until one still
        // holds an unvisited station.
        for offset in 0..self.k {
            let cluster = (state.step + offset) % self.k;
            let candidates: Vec<usize> = state
                .unvisited()
                .filter(|&i| self.assignment[i] == cluster)
                .collect();
            if let Some(&pick) = candidates.choose(rng) {
                return Ok(pick);
            }
        }
        // Every cluster exhausted; fall back to uniform.
        random_select(state, rng)
    }
}

/// Baseline policies as a per-call operation. The stratified plan is
/// re-derived deterministically from the coordinates, so repeated calls
/// within an episode see the same partition.
pub fn baseline_select(
    state: &BeliefState,
    kind: BaselineKind,
    coords: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    match kind {
        BaselineKind::Random => random_select(state, rng),
        BaselineKind::Stratified => {
            StratifiedPlan::new(coords, state.budget(), 0).select(state, rng)
        }
    }
}

pub fn greedy_select(
    state: &BeliefState,
    variant: GreedyVariant,
    coords: &[(f64, f64)],
    threshold: f64,
) -> Result<usize> {
    match variant {
        GreedyVariant::Intensity => masked_argmax(state, |i| state.mu[i]),
        GreedyVariant::Risk => {
            let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
            masked_argmax(state, |i| {
                let sigma = state.sigma[i];
                if sigma <= 1e-12 {
                    if state.mu[i] >= threshold {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    std_normal.cdf((state.mu[i] - threshold) / sigma)
                }
            })
        }
        GreedyVariant::Spatial => {
            let visited = state.visited_indices();
            if visited.is_empty() {
                let n = coords.len() as f64;
                let (cx, cy) = coords
                    .iter()
                    .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
                let (cx, cy) = (cx / n, cy / n);
                // Closest to the centroid: argmax of negative distance.
                masked_argmax(state, |i| {
                    -((coords[i].0 - cx).powi(2) + (coords[i].1 - cy).powi(2))
                })
            } else {
                masked_argmax(state, |i| {
                    visited
                        .iter()
                        .map(|&k| {
                            ((coords[i].0 - coords[k].0).powi(2)
                                + (coords[i].1 - coords[k].1).powi(2))
                            .sqrt()
                        })
                        .fold(f64::INFINITY, f64::min)
                })
            }
        }
    }
}

/// Upper confidence bound: argmax of `mu + beta * sigma` over unvisited.
pub fn ucb_select(state: &BeliefState, exploration_beta: f64) -> Result<usize> {
    masked_argmax(state, |i| state.mu[i] + exploration_beta * state.sigma[i])
}

/// `n choose k` without overflow for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

/// Default cap on oracle enumeration size.
pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_subset: Vec<usize>,
    pub best_rmse: f64,
    pub evaluated_count: u64,
}

/// Reconstruction RMSE if exactly the stations in `subset` were observed,
/// under the belief mean `mu`.
pub fn subset_rmse(scene: &Scene, mu: &Array1<f64>, subset: &[usize]) -> f64 {
    let n = scene.n_stations();
    let mut visited = vec![false; n];
    for &s in subset {
        visited[s] = true;
    }
    let state = BeliefState::from_parts(
        mu.clone(),
        Array1::zeros(n),
        visited,
        subset.len(),
        scene.field.max_pairwise_distance(),
    )
    .expect("valid subset state");
    let estimate = crate::env::reconstruct(&state, scene);
    let truth = ndarray::ArrayView1::from(&scene.field.truth[..]);
    (&estimate - &truth).mapv(|d| d * d).mean().unwrap().sqrt()
}

/// Evaluate every K-subset of stations and return the reconstruction-RMSE
/// minimizer (ties to the lexicographically smallest subset). Refuses to
/// enumerate more than `cap` combinations.
pub fn exhaustive_oracle(
    scene: &Scene,
    ensemble: &BeliefEnsemble,
    k: usize,
    cap: u128,
) -> Result<OracleResult> {
    let n = scene.n_stations();
    if k == 0 || k > n {
        return Err(Error::Config(format!("invalid budget {k} for {n} stations")));
    }
    let combinations = binomial(n, k);
    if combinations > cap {
        return Err(Error::OracleInfeasible {
            n,
            k,
            combinations,
            cap,
        });
    }
    let (mu, _) = ensemble.predict_spectra(&scene.spectra)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut evaluated = 0u64;
    for subset in (0..n).combinations(k) {
        let rmse = subset_rmse(scene, &mu, &subset);
        evaluated += 1;
        // Strict improvement keeps the lexicographically first minimizer.
        if best.as_ref().is_none_or(|(_, b)| rmse < *b) {
            best = Some((subset, rmse));
        }
    }
    let (best_subset, best_rmse) = best.expect("at least one subset");
    Ok(OracleResult {
        best_subset,
        best_rmse,
        evaluated_count: evaluated,
    })
}

/// A policy instance bound to one episode. Heuristics are stateless; the
/// stratified baseline carries its episode partition, the Q-agent its
/// network.
pub enum Agent<'a> {
    Random,
    Stratified(Option<StratifiedPlan>),
    GreedyIntensity,
    GreedyRisk,
    GreedySpatial,
    Ucb { beta: f64 },
    Dqn(&'a QPolicy),
}

impl Agent<'_> {
    pub fn begin_episode(&mut self, state: &BeliefState, scene: &Scene, rng: &mut ChaCha8Rng) {
        if let Agent::Stratified(plan) = self {
            *plan = Some(StratifiedPlan::new(
                &scene.field.station_coords,
                state.budget(),
                rng.random(),
            ));
        }
    }

    pub fn select(
        &mut self,
        state: &BeliefState,
        scene: &Scene,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        let coords = &scene.field.station_coords;
        match self {
            Agent::Random => random_select(state, rng),
            Agent::Stratified(plan) => match plan {
                Some(p) => p.select(state, rng),
                None => baseline_select(state, BaselineKind::Stratified, coords, rng),
            },
            Agent::GreedyIntensity => {
                greedy_select(state, GreedyVariant::Intensity, coords, 0.0)
            }
            Agent::GreedyRisk => greedy_select(
                state,
                GreedyVariant::Risk,
                coords,
                scene.field.bloom_threshold,
            ),
            Agent::GreedySpatial => greedy_select(state, GreedyVariant::Spatial, coords, 0.0),
            Agent::Ucb { beta } => ucb_select(state, *beta),
            Agent::Dqn(policy) => dqn_select(policy, state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BeliefEnsemble, FeatureKind, Standardizer};
    use crate::nn::Network;
    use crate::synth::{generate_field, render_scene, ForwardModel, WavelengthGrid};
    use ndarray::array;
    use std::sync::Arc;

    fn state_with(
        mu: Vec<f64>,
        sigma: Vec<f64>,
        visited: Vec<bool>,
        budget: usize,
    ) -> BeliefState {
        BeliefState::from_parts(Array1::from(mu), Array1::from(sigma), visited, budget, 1.0)
            .unwrap()
    }

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

    #[test]
    fn forced_move_returns_last_station() {
        let state = state_with(vec![0.0; 4], vec![0.0; 4], vec![true, true, false, true], 4);
        let mut rng = seeded_rng(0);
        assert_eq!(random_select(&state, &mut rng).unwrap(), 2);
        let coords = vec![(0.0, 0.0), (0.1, 0.1), (0.9, 0.9), (1.0, 1.0)];
        assert_eq!(
            baseline_select(&state, BaselineKind::Stratified, &coords, &mut rng).unwrap(),
            2
        );
        assert_eq!(
            greedy_select(&state, GreedyVariant::Intensity, &coords, 0.5).unwrap(),
            2
        );
        assert_eq!(ucb_select(&state, 1.0).unwrap(), 2);
    }

    #[test]
    fn all_visited_is_an_error() {
        let state = state_with(vec![0.0; 3], vec![0.0; 3], vec![true; 3], 3);
        let mut rng = seeded_rng(0);
        assert!(random_select(&state, &mut rng).is_err());
        assert!(ucb_select(&state, 0.0).is_err());
    }

    #[test]
    fn random_sequence_is_reproducible() {
        let state = state_with(vec![0.0; 6], vec![0.0; 6], vec![false; 6], 6);
        let picks = |seed| {
            let mut rng = seeded_rng(seed);
            (0..10)
                .map(|_| random_select(&state, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(picks(7), picks(7));
        assert_ne!(picks(7), picks(8));
    }

    #[test]
    fn stratified_spreads_across_separated_blobs() {
        // Three tight blobs of stations; K = 3 picks must span all blobs.
        let coords = vec![
            (0.05, 0.05), (0.08, 0.06), (0.06, 0.09),
            (0.9, 0.1), (0.93, 0.12),
            (0.1, 0.9), (0.12, 0.93), (0.09, 0.95),
        ];
        let blob = |i: usize| match i {
            0..=2 => 0,
            3..=4 => 1,
            _ => 2,
        };
        for seed in 0..20 {
            let mut rng = seeded_rng(seed);
            let plan = StratifiedPlan::new(&coords, 3, seed);
            let mut state = state_with(vec![0.0; 8], vec![0.0; 8], vec![false; 8], 3);
            let mut blobs = Vec::new();
            for _ in 0..3 {
                let a = plan.select(&state, &mut rng).unwrap();
                blobs.push(blob(a));
                state.visited[a] = true;
                state.step += 1;
            }
            blobs.sort_unstable();
            assert_eq!(blobs, vec![0, 1, 2], "seed {seed} picks missed a blob");
        }
    }

    #[test]
    fn greedy_intensity_is_argmax() {
        let state = state_with(vec![0.1, 0.9, 0.5], vec![0.0; 3], vec![false; 3], 3);
        assert_eq!(
            greedy_select(&state, GreedyVariant::Intensity, &[(0.0, 0.0); 3], 0.0).unwrap(),
            1
        );
    }

    #[test]
    fn greedy_risk_prefers_uncertainty_below_threshold() {
        let state = state_with(vec![0.5, 0.5], vec![0.1, 0.5], vec![false; 2], 2);
        assert_eq!(
            greedy_select(&state, GreedyVariant::Risk, &[(0.0, 0.0); 2], 1.0).unwrap(),
            1
        );
    }

    #[test]
    fn greedy_risk_zero_sigma_is_indicator() {
        let state = state_with(vec![2.0, 0.5], vec![0.0, 0.0], vec![false; 2], 2);
        assert_eq!(
            greedy_select(&state, GreedyVariant::Risk, &[(0.0, 0.0); 2], 1.5).unwrap(),
            0
        );
    }

    #[test]
    fn greedy_spatial_farthest_point_on_corners() {
        let coords = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let state = state_with(
            vec![0.0; 4],
            vec![0.0; 4],
            vec![true, false, false, false],
            3,
        );
        assert_eq!(
            greedy_select(&state, GreedyVariant::Spatial, &coords, 0.0).unwrap(),
            3
        );
    }

    #[test]
    fn greedy_spatial_first_pick_is_central() {
        let coords = vec![(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (0.9, 0.1)];
        let state = state_with(vec![0.0; 4], vec![0.0; 4], vec![false; 4], 2);
        assert_eq!(
            greedy_select(&state, GreedyVariant::Spatial, &coords, 0.0).unwrap(),
            1
        );
    }

    #[test]
    fn ucb_examples_and_beta_zero_reduction() {
        let state = state_with(vec![1.0, 1.0], vec![0.1, 0.9], vec![false; 2], 2);
        assert_eq!(ucb_select(&state, 1.0).unwrap(), 1);

        let mut rng = seeded_rng(5);
        for _ in 0..200 {
            let n = rng.random_range(2..10);
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut visited: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
            if visited.iter().all(|&v| v) {
                visited[0] = false;
            }
            let state = state_with(mu.clone(), sigma.clone(), visited.clone(), n);
            assert_eq!(
                ucb_select(&state, 0.0).unwrap(),
                greedy_select(&state, GreedyVariant::Intensity, &[(0.0, 0.0); 16], 0.0)
                    .unwrap()
            );
            // Independent argmax oracle over the scored vector.
            let beta = rng.random_range(0.0..3.0);
            let picked = ucb_select(&state, beta).unwrap();
            let best = (0..n)
                .filter(|&i| !visited[i])
                .fold(None::<usize>, |acc, i| match acc {
                    Some(j) if mu[j] + beta * sigma[j] >= mu[i] + beta * sigma[i] => Some(j),
                    _ => Some(i),
                })
                .unwrap();
            assert_eq!(picked, best);
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(8, 3), 56);
        assert_eq!(binomial(50, 5), 2_118_760);
    }

    #[test]
    fn oracle_counts_and_feasibility() {
        let scene = test_scene(4, 1);
        let ens = constant_ensemble(1.0);
        let res = exhaustive_oracle(&scene, &ens, 2, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(res.evaluated_count, 6);

        let scene8 = test_scene(8, 2);
        let res = exhaustive_oracle(&scene8, &ens, 3, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(res.evaluated_count, 56);

        let scene50 = test_scene(50, 3);
        match exhaustive_oracle(&scene50, &ens, 5, DEFAULT_ORACLE_CAP) {
            Err(Error::OracleInfeasible { combinations, .. }) => {
                assert_eq!(combinations, 2_118_760);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn oracle_matches_independent_brute_force() {
        // Independent enumerator: recursive subset generation plus a
        // from-scratch IDW reconstruction.
        fn brute_force(scene: &Scene, mu: &Array1<f64>, k: usize) -> (Vec<usize>, f64) {
            let n = scene.n_stations();
            let mut best: Option<(Vec<usize>, f64)> = None;
            let mut subset = Vec::new();
            fn recurse(
                start: usize,
                n: usize,
                k: usize,
                subset: &mut Vec<usize>,
                scene: &Scene,
                mu: &Array1<f64>,
                best: &mut Option<(Vec<usize>, f64)>,
            ) {
                if subset.len() == k {
                    let mut sq = 0.0;
                    for i in 0..n {
                        let est = if subset.contains(&i) {
                            scene.field.truth[i]
                        } else {
                            let mut num = 0.0;
                            let mut den = 0.0;
                            for &s in subset.iter() {
                                let d = scene.field.distance(i, s);
                                let w = 1.0 / (d * d);
                                num += w * (scene.field.truth[s] - mu[s]);
                                den += w;
                            }
                            mu[i] + num / den
                        };
                        sq += (est - scene.field.truth[i]).powi(2);
                    }
                    let rmse = (sq / n as f64).sqrt();
                    if best.as_ref().is_none_or(|(_, b)| rmse < *b) {
                        *best = Some((subset.clone(), rmse));
                    }
                    return;
                }
                for i in start..n {
                    subset.push(i);
                    recurse(i + 1, n, k, subset, scene, mu, best);
                    subset.pop();
                }
            }
            recurse(0, n, k, &mut subset, scene, mu, &mut best);
            best.unwrap()
        }

        let ens = constant_ensemble(0.8);
        for n in 3..=6 {
            for k in 1..=3.min(n) {
                for seed in [0, 9] {
                    let scene = test_scene(n, seed);
                    let (mu, _) = ens.predict_spectra(&scene.spectra).unwrap();
                    let res = exhaustive_oracle(&scene, &ens, k, DEFAULT_ORACLE_CAP).unwrap();
                    let (subset, rmse) = brute_force(&scene, &mu, k);
                    assert_eq!(res.best_subset, subset, "n={n} k={k} seed={seed}");
                    assert!((res.best_rmse - rmse).abs() < 1e-12);
                    assert_eq!(res.evaluated_count as u128, binomial(n, k));
                }
            }
        }
    }

    #[test]
    fn oracle_subset_order_does_not_matter() {
        let scene = test_scene(6, 4);
        let ens = constant_ensemble(1.0);
        let (mu, _) = ens.predict_spectra(&scene.spectra).unwrap();
        let a = subset_rmse(&scene, &mu, &[0, 2, 5]);
        let b = subset_rmse(&scene, &mu, &[5, 0, 2]);
        assert_eq!(a, b);
    }

    #[test]
    fn no_policy_selects_a_visited_station() {
        let mut rng = seeded_rng(99);
        let policy_names = ["random", "stratified", "intensity", "risk", "spatial", "ucb"];
        for trial in 0..1500 {
            let n = rng.random_range(2..12);
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..4.0)).collect();
            let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut visited: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
            if visited.iter().all(|&v| v) {
                visited[rng.random_range(0..n)] = false;
            }
            let coords: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let state = state_with(mu, sigma, visited.clone(), n);
            for name in policy_names {
                let pick = match name {
                    "random" => random_select(&state, &mut rng).unwrap(),
                    "stratified" => {
                        StratifiedPlan::new(&coords, 3.min(n), trial as u64)
                            .select(&state, &mut rng)
                            .unwrap()
                    }
                    "intensity" => {
                        greedy_select(&state, GreedyVariant::Intensity, &coords, 1.0).unwrap()
                    }
                    "risk" => greedy_select(&state, GreedyVariant::Risk, &coords, 1.0).unwrap(),
                    "spatial" => {
                        greedy_select(&state, GreedyVariant::Spatial, &coords, 1.0).unwrap()
                    }
                    "ucb" => ucb_select(&state, 1.5).unwrap(),
                    _ => unreachable!(),
                };
                assert!(!visited[pick], "{name} picked visited station {pick}");
            }
        }
    }
}
