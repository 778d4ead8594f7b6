//! Deep Q-learning over the reduced belief state with invalid-action
//! masking, a uniform replay buffer, and a periodically synced target
//! network. Training episodes are simulated scenes; no additional labeled
//! data is consumed beyond what built the belief ensemble.

use crate::belief::BeliefEnsemble;
use crate::env::{self, BeliefState, EnvConfig};
use crate::error::{Error, Result};
use crate::nn::{
    Activation, LayerSpec, Network, NetworkCheckpoint, OptimizerKind, OptimizerState,
};
use crate::rng::{derive_seed, seeded_rng};
use crate::synth::Scene;
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnHyper {
    pub episodes: usize,
    pub discount: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Target-network sync period, counted in gradient updates.
    pub target_sync_interval: usize,
    pub hidden: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of training episodes over which epsilon decays linearly.
    pub eps_decay_fraction: f64,
    /// Standardize the mu/sigma components of the state vector using the
    /// belief model's training-target statistics.
    pub normalize_state: bool,
    pub optimizer: OptimizerKind,
}

impl Default for DqnHyper {
    fn default() -> Self {
        Self {
            episodes: 3000,
            discount: 0.99,
            replay_capacity: 10_000,
            batch_size: 64,
            learning_rate: 1e-3,
            target_sync_interval: 500,
            hidden: 64,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.5,
            normalize_state: true,
            optimizer: OptimizerKind::adam(),
        }
    }
}

impl DqnHyper {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Config("discount must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::Config(
                "replay capacity must be >= batch size >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eps_decay_fraction) {
            return Err(Error::Config("eps_decay_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Affine conditioning applied to the mu/sigma components of the state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StateNorm {
    pub mean: f64,
    pub sd: f64,
}

impl StateNorm {
    fn identity() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }

    fn apply(&self, mut state: Vec<f64>, n: usize) -> Vec<f64> {
        for v in state.iter_mut().take(n) {
            *v = (*v - self.mean) / self.sd;
        }
        for v in state.iter_mut().skip(n).take(n) {
            *v /= self.sd;
        }
        state
    }
}

/// A trained Q-policy: online network, target network, and conditioning.
#[derive(Debug, Clone)]
pub struct QPolicy {
    q_net: Network,
    target_net: Network,
    n: usize,
    hyper: DqnHyper,
    norm: StateNorm,
}

impl QPolicy {
    /// Freshly initialized policy (no training); selection is still legal
    /// because masking happens at action time.
    pub fn init(n: usize, hyper: &DqnHyper, norm: StateNorm, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let specs = [
            LayerSpec::new(3 * n, hyper.hidden, Activation::Relu),
            LayerSpec::new(hyper.hidden, hyper.hidden, Activation::Relu),
            LayerSpec::new(hyper.hidden, n, Activation::Identity),
        ];
        let q_net = Network::new(&specs, derive_seed(seed, "q_init", 0))?;
        let target_net = q_net.clone();
        Ok(Self {
            q_net,
            target_net,
            n,
            hyper: *hyper,
            norm,
        })
    }

    /// Build a policy around an existing network; tests use this to hand-set
    /// Q outputs.
    pub fn from_network(q_net: Network, n: usize, hyper: DqnHyper) -> Result<Self> {
        if q_net.input_width() != 3 * n || q_net.output_width() != n {
            return Err(Error::Shape(format!(
                "Q network must map 3N -> N for N = {n}"
            )));
        }
        Ok(Self {
            target_net: q_net.clone(),
            q_net,
            n,
            hyper,
            norm: StateNorm::identity(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hyper(&self) -> &DqnHyper {
        &self.hyper
    }

    pub fn q_net(&self) -> &Network {
        &self.q_net
    }

    /// Q-values for a state (inference mode, conditioned input).
    pub fn q_values(&self, state: &BeliefState) -> Result<Array1<f64>> {
        if state.n() != self.n {
            return Err(Error::Shape(format!(
                "state has {} stations, policy expects {}",
                state.n(),
                self.n
            )));
        }
        let v = self.norm.apply(state.vector(), self.n);
        let x = Array2::from_shape_vec((1, 3 * self.n), v).expect("length checked");
        Ok(self.q_net.infer(&x)?.row(0).to_owned())
    }
}

/// Greedy masked action: argmax Q over unvisited stations, never a visited
/// index; ties break to the lowest index.
pub fn dqn_select(policy: &QPolicy, state: &BeliefState) -> Result<usize> {
    let q = policy.q_values(state)?;
    let mut best: Option<(usize, f64)> = None;
    for i in state.unvisited() {
        match best {
            Some((_, bq)) if q[i] <= bq => {}
            _ => best = Some((i, q[i])),
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidAction("all stations visited".into()))
}

struct Transition {
    state: Vec<f64>,
    action: usize,
    reward: f64,
    next_state: Vec<f64>,
    next_visited: Vec<bool>,
    done: bool,
}

/// Train a Q-policy on simulated episodes drawn from `scene_gen`. The belief
/// ensemble is fixed throughout; each episode sees a fresh scene keyed by a
/// derived seed. Deterministic given `(generators, hyper, seed)`.
pub fn dqn_train(
    scene_gen: &dyn Fn(u64) -> Result<Scene>,
    ensemble: &BeliefEnsemble,
    env_cfg: &EnvConfig,
    hyper: &DqnHyper,
    seed: u64,
) -> Result<QPolicy> {
    hyper.validate()?;
    let probe = scene_gen(derive_seed(seed, "train_scene", 0))?;
    let n = probe.n_stations();
    let norm = if hyper.normalize_state {
        let (mean, sd) = ensemble.target_stats();
        StateNorm { mean, sd }
    } else {
        StateNorm::identity()
    };
    let mut policy = QPolicy::init(n, hyper, norm, seed)?;
    let mut opt = OptimizerState::new(hyper.optimizer, policy.q_net.parameter_count());
    let mut rng = seeded_rng(derive_seed(seed, "behavior", 0));
    let mut replay: VecDeque<Transition> = VecDeque::with_capacity(hyper.replay_capacity);
    let mut updates = 0usize;

    let decay_span = (hyper.episodes as f64 * hyper.eps_decay_fraction).max(1.0);
    let eps_at = |episode: usize| {
        let t = (episode as f64 / decay_span).min(1.0);
        hyper.eps_start + t * (hyper.eps_end - hyper.eps_start)
    };

    for episode in 0..hyper.episodes {
        let scene = scene_gen(derive_seed(seed, "train_scene", episode as u64))?;
        if scene.n_stations() != n {
            return Err(Error::Shape(format!(
                "training scene has {} stations, expected {n}",
                scene.n_stations()
            )));
        }
        let mut state = env::reset(&scene, ensemble, env_cfg)?;
        let eps = eps_at(episode);
        while !state.done() {
            let action = if rng.random::<f64>() < eps {
                let unvisited: Vec<usize> = state.unvisited().collect();
                unvisited[rng.random_range(0..unvisited.len())]
            } else {
                dqn_select(&policy, &state)?
            };
            let out = env::step(&state, action, &scene, &env_cfg.weights)?;
            if replay.len() == hyper.replay_capacity {
                replay.pop_front();
            }
            replay.push_back(Transition {
                state: policy.norm.apply(state.vector(), n),
                action,
                reward: out.reward,
                next_state: policy.norm.apply(out.state.vector(), n),
                next_visited: out.state.visited.clone(),
                done: out.done,
            });
            state = out.state;

            if replay.len() >= hyper.batch_size {
                let batch: Vec<usize> = (0..hyper.batch_size)
                    .map(|_| rng.random_range(0..replay.len()))
                    .collect();
                td_update(&mut policy, &mut opt, &replay, &batch, hyper, episode)?;
                updates += 1;
                if updates % hyper.target_sync_interval == 0 {
                    policy.target_net = policy.q_net.clone();
                }
            }
        }
    }
    Ok(policy)
}

/// One temporal-difference minibatch update. Only the selected action's
/// output receives a residual; the bootstrap max is masked to unvisited
/// stations of the successor state.
fn td_update(
    policy: &mut QPolicy,
    opt: &mut OptimizerState,
    replay: &VecDeque<Transition>,
    batch: &[usize],
    hyper: &DqnHyper,
    episode: usize,
) -> Result<()> {
    let n = policy.n;
    let b = batch.len();
    let mut states = Array2::zeros((b, 3 * n));
    let mut next_states = Array2::zeros((b, 3 * n));
    for (row, &idx) in batch.iter().enumerate() {
        let t = &replay[idx];
        states
            .row_mut(row)
            .assign(&ndarray::ArrayView1::from(&t.state[..]));
        next_states
            .row_mut(row)
            .assign(&ndarray::ArrayView1::from(&t.next_state[..]));
    }
    let next_q = policy.target_net.infer(&next_states)?;
    let (q, cache) = policy.q_net.forward_frozen(&states)?;

    let mut grad = Array2::zeros((b, n));
    let mut loss = 0.0;
    for (row, &idx) in batch.iter().enumerate() {
        let t = &replay[idx];
        let bootstrap = if t.done {
            0.0
        } else {
            let mut best = f64::NEG_INFINITY;
            for (a, &visited) in t.next_visited.iter().enumerate() {
                if !visited {
                    best = best.max(next_q[[row, a]]);
                }
            }
            best
        };
        let target = t.reward + hyper.discount * if t.done { 0.0 } else { bootstrap };
        let residual = q[[row, t.action]] - target;
        loss += residual * residual;
        grad[[row, t.action]] = 2.0 * residual / b as f64;
    }
    if !loss.is_finite() {
        return Err(Error::Divergence { episode });
    }
    let grads = policy.q_net.backward(&cache, &grad);
    opt.apply(&mut policy.q_net, &grads, hyper.learning_rate);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    format_version: u32,
    n: usize,
    hyper: DqnHyper,
    norm: StateNorm,
    q_net: NetworkCheckpoint,
    target_net: NetworkCheckpoint,
}

/// Checkpoint the policy: network weights plus the hyperparameter manifest.
pub fn save_policy(policy: &QPolicy, path: &Path) -> Result<()> {
    let file = PolicyFile {
        format_version: 1,
        n: policy.n,
        hyper: policy.hyper,
        norm: policy.norm,
        q_net: NetworkCheckpoint::from(&policy.q_net),
        target_net: NetworkCheckpoint::from(&policy.target_net),
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(out), &file)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<QPolicy> {
    let file: PolicyFile = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(path)?,
    ))?;
    if file.format_version != 1 {
        return Err(Error::Config(format!(
            "unsupported policy format version {}",
            file.format_version
        )));
    }
    Ok(QPolicy {
        q_net: Network::try_from(file.q_net)?,
        target_net: Network::try_from(file.target_net)?,
        n: file.n,
        hyper: file.hyper,
        norm: file.norm,
    })
}
