//! Weighted regression training: per-sample weights scale squared residuals,
//! so ground-truth anchors can outweigh pseudo-labeled mass.

use super::Network;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Regression samples with strictly positive per-sample weights.
#[derive(Debug, Clone)]
pub struct WeightedDataset {
    pub inputs: Array2<f64>,
    pub targets: Array1<f64>,
    pub weights: Array1<f64>,
}

impl WeightedDataset {
    pub fn new(inputs: Array2<f64>, targets: Array1<f64>, weights: Array1<f64>) -> Result<Self> {
        if inputs.nrows() != targets.len() || inputs.nrows() != weights.len() {
            return Err(Error::Shape(format!(
                "dataset rows disagree: inputs {}, targets {}, weights {}",
                inputs.nrows(),
                targets.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Shape("sample weights must be finite and > 0".into()));
        }
        Ok(Self {
            inputs,
            targets,
            weights,
        })
    }

    /// Uniform weight 1 on every sample.
    pub fn uniform(inputs: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        let n = targets.len();
        Self::new(inputs, targets, Array1::ones(n))
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Stack two datasets (same input width).
    pub fn concat(&self, other: &WeightedDataset) -> Result<WeightedDataset> {
        if !other.is_empty() && !self.is_empty() && self.inputs.ncols() != other.inputs.ncols() {
            return Err(Error::Shape("input widths differ".into()));
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.is_empty() {
            return Ok(other.clone());
        }
        let inputs = ndarray::concatenate(Axis(0), &[self.inputs.view(), other.inputs.view()])
            .expect("widths checked");
        let targets = ndarray::concatenate(Axis(0), &[self.targets.view(), other.targets.view()])
            .expect("vectors");
        let weights = ndarray::concatenate(Axis(0), &[self.weights.view(), other.weights.view()])
            .expect("vectors");
        WeightedDataset::new(inputs, targets, weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Sgd { momentum: 0.9 }
    }
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter optimizer state over the flattened parameter vector.
pub struct OptimizerState {
    kind: OptimizerKind,
    velocity: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, parameter_count: usize) -> Self {
        Self {
            kind,
            velocity: vec![0.0; parameter_count],
            second: vec![0.0; parameter_count],
            step: 0,
        }
    }

    /// One update over the flattened parameters.
    pub fn apply(&mut self, net: &mut Network, grads: &super::Gradients, lr: f64) {
        let mut params = net.flatten_params();
        let grad = Network::gradients_flat(grads);
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Sgd { momentum } => {
                for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(&grad) {
                    *v = momentum * *v - lr * g;
                    *p += *v;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.step += 1;
                let bc1 = 1.0 - beta1.powi(self.step as i32);
                let bc2 = 1.0 - beta2.powi(self.step as i32);
                for ((p, (m, v)), g) in params
                    .iter_mut()
                    .zip(self.velocity.iter_mut().zip(&mut self.second))
                    .zip(&grad)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                }
            }
        }
        net.assign_flat(&params).expect("same layout");
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::default(),
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Mean weighted squared error of the network over the dataset
/// (inference mode).
pub fn weighted_mse(net: &Network, data: &WeightedDataset) -> Result<f64> {
    let pred = net.predict(&data.inputs)?;
    let n = data.len() as f64;
    Ok((&pred - &data.targets)
        .mapv(|r| r * r)
        .iter()
        .zip(data.weights.iter())
        .map(|(r2, w)| w * r2)
        .sum::<f64>()
        / n)
}

/// Minibatch training of a scalar-output network under the weighted loss.
/// Aborts with the epoch index if any batch loss goes non-finite.
pub fn train(net: Network, data: &WeightedDataset, cfg: &TrainConfig) -> Result<Network> {
    if data.is_empty() {
        return Err(Error::Shape("cannot train on an empty dataset".into()));
    }
    if net.output_width() != 1 {
        return Err(Error::Shape(
            "weighted regression training expects output width 1".into(),
        ));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Config("epochs and batch_size must be >= 1".into()));
    }
    let mut net = net;
    let mut rng = seeded_rng(cfg.seed);
    let mut opt = OptimizerState::new(cfg.optimizer, net.parameter_count());
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.inputs.select(Axis(0), chunk);
            let y = data.targets.select(Axis(0), chunk);
            let w = data.weights.select(Axis(0), chunk);
            let (pred, cache) = net.forward_train(&x, &mut rng)?;
            let residual = &pred.index_axis(Axis(1), 0) - &y;
            let batch = chunk.len() as f64;
            let loss = residual
                .iter()
                .zip(w.iter())
                .map(|(r, wi)| wi * r * r)
                .sum::<f64>()
                / batch;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            let grad_col = (&residual * &w).mapv(|v| 2.0 * v / batch);
            let grad = grad_col.insert_axis(Axis(1));
            let grads = net.backward(&cache, &grad);
            opt.apply(&mut net, &grads, cfg.learning_rate);
        }
        if !net.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
    }
    Ok(net)
}
