//! Minimal dense network substrate: forward, backward, weighted loss,
//! optimizers, gradient checking, and a JSON checkpoint format.
//!
//! Everything is `f64` and seed-deterministic. Inference is a pure function
//! of `(network, batch)`; training mutates one network single-writer style.

mod checkpoint;
mod gradcheck;
mod train;

pub use checkpoint::{load_network, save_network, LayerCheckpoint, NetworkCheckpoint};
pub use gradcheck::{gradient_check, gradient_check_mode};
pub use train::{
    train, weighted_mse, OptimizerKind, OptimizerState, TrainConfig, WeightedDataset,
};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const BN_EPS: f64 = 1e-5;
const BN_DECAY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// One dense layer: linear, then optional batch norm, activation, dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
    pub batch_norm: bool,
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Self {
        Self {
            input_width,
            output_width,
            activation,
            batch_norm: false,
            dropout_rate: 0.0,
        }
    }

    pub fn with_batch_norm(mut self) -> Self {
        self.batch_norm = true;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.output_width == 0 {
            return Err(Error::Shape("layer widths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Shape(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BatchNorm {
    gamma: Array1<f64>,
    beta: Array1<f64>,
    running_mean: Array1<f64>,
    running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Layer {
    spec: LayerSpec,
    /// Shape `(input_width, output_width)`; activations are row vectors.
    weights: Array2<f64>,
    biases: Array1<f64>,
    bn: Option<BatchNorm>,
}

/// A dense feed-forward network. Immutable after training; cheap to clone.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    rng_seed: u64,
}

/// Per-layer tape recorded by a cached forward pass.
struct LayerTape {
    /// Input to the linear map, shape `(batch, in)`.
    input: Array2<f64>,
    /// Linear output `x W + b`, shape `(batch, out)`.
    linear: Array2<f64>,
    /// Batch-norm internals, when the layer normalizes.
    bn: Option<BnTape>,
    /// Input to the activation (post-BN or the linear output).
    pre_activation: Array2<f64>,
    /// Inverted-dropout mask (already scaled by 1/keep), when active.
    dropout: Option<Array2<f64>>,
}

enum BnTape {
    /// Batch statistics path (training).
    Batch {
        mean: Array1<f64>,
        inv_std: Array1<f64>,
        normalized: Array2<f64>,
    },
    /// Running statistics path (frozen, used by inference-style passes).
    Frozen {
        inv_std: Array1<f64>,
        normalized: Array2<f64>,
    },
}

/// Activation tape for one forward pass; feed to [`Network::backward`].
pub struct ForwardCache {
    tapes: Vec<LayerTape>,
    batch: usize,
}

/// Parameter gradients, mirroring the network layout.
pub struct Gradients {
    pub(crate) layers: Vec<LayerGrads>,
}

pub(crate) struct LayerGrads {
    pub(crate) d_weights: Array2<f64>,
    pub(crate) d_biases: Array1<f64>,
    pub(crate) d_gamma: Option<Array1<f64>>,
    pub(crate) d_beta: Option<Array1<f64>>,
}

impl Network {
    /// Build a network with Glorot-uniform weights (`±sqrt(6/(fan_in+fan_out))`),
    /// zero biases, and identity batch-norm statistics. Deterministic per seed.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for spec in specs {
            spec.validate()?;
        }
        for pair in specs.windows(2) {
            if pair[0].output_width != pair[1].input_width {
                return Err(Error::Shape(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].output_width, pair[1].input_width
                )));
            }
        }
        let mut rng = seeded_rng(seed);
        let layers = specs
            .iter()
            .map(|spec| {
                let bound = (6.0 / (spec.input_width + spec.output_width) as f64).sqrt();
                let weights = Array2::from_shape_fn(
                    (spec.input_width, spec.output_width),
                    |_| rng.random_range(-bound..bound),
                );
                Layer {
                    spec: *spec,
                    weights,
                    biases: Array1::zeros(spec.output_width),
                    bn: spec.batch_norm.then(|| BatchNorm::new(spec.output_width)),
                }
            })
            .collect();
        Ok(Self {
            layers,
            rng_seed: seed,
        })
    }

    /// Single linear layer `input_width -> 1` with zero weights and a fixed
    /// bias, so every input maps to `value`. Handy as a stub predictor.
    pub fn constant(input_width: usize, value: f64) -> Self {
        let spec = LayerSpec::new(input_width, 1, Activation::Identity);
        let mut net = Self::new(&[spec], 0).expect("valid spec");
        net.layers[0].weights.fill(0.0);
        net.layers[0].biases.fill(value);
        net
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").spec.output_width
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    /// Trainable parameter count: weights + biases, plus gamma/beta when a
    /// layer normalizes. Running statistics are not trainable.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                let mut n = l.weights.len() + l.biases.len();
                if let Some(bn) = &l.bn {
                    n += bn.gamma.len() + bn.beta.len();
                }
                n
            })
            .sum()
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.layers[layer].weights
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.layers[layer].biases
    }

    /// True when every parameter and running statistic is finite.
    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite())
                && l.biases.iter().all(|v| v.is_finite())
                && l.bn.as_ref().is_none_or(|bn| {
                    bn.gamma.iter().all(|v| v.is_finite())
                        && bn.beta.iter().all(|v| v.is_finite())
                        && bn.running_mean.iter().all(|v| v.is_finite())
                        && bn.running_var.iter().all(|v| v.is_finite())
                })
        })
    }

    fn check_input(&self, batch: &Array2<f64>) -> Result<()> {
        if batch.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Deterministic inference: dropout disabled, batch norm on running stats.
    pub fn infer(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(batch)?;
        let mut x = batch.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights) + &layer.biases;
            if let Some(bn) = &layer.bn {
                let inv_std = bn.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                z = (&z - &bn.running_mean) * &inv_std * &bn.gamma + &bn.beta;
            }
            if layer.spec.activation == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            x = z;
        }
        Ok(x)
    }

    /// Inference for scalar-output networks, returned as a column.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Array1<f64>> {
        if self.output_width() != 1 {
            return Err(Error::Shape(format!(
                "predict expects output width 1, network has {}",
                self.output_width()
            )));
        }
        Ok(self.infer(batch)?.index_axis(Axis(1), 0).to_owned())
    }

    /// Training-mode forward pass: batch-norm uses batch statistics (and
    /// updates the running ones), dropout masks come from `rng`.
    pub fn forward_train(
        &mut self,
        batch: &Array2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(batch)?;
        let rows = batch.nrows();
        let mut tapes = Vec::with_capacity(self.layers.len());
        let mut x = batch.to_owned();
        for layer in &mut self.layers {
            let input = x;
            let linear = input.dot(&layer.weights) + &layer.biases;
            let mut z = linear.clone();
            let bn_tape = if let Some(bn) = layer.bn.as_mut() {
                let mean = linear.mean_axis(Axis(0)).expect("non-empty batch");
                let var = (&linear - &mean).mapv(|v| v * v).mean_axis(Axis(0)).unwrap();
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let normalized = (&linear - &mean) * &inv_std;
                z = &normalized * &bn.gamma + &bn.beta;
                bn.running_mean = &bn.running_mean * BN_DECAY + &(&mean * (1.0 - BN_DECAY));
                bn.running_var = &bn.running_var * BN_DECAY + &(&var * (1.0 - BN_DECAY));
                Some(BnTape::Batch {
                    mean,
                    inv_std,
                    normalized,
                })
            } else {
                None
            };
            let pre_activation = z.clone();
            if layer.spec.activation == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            let dropout = if layer.spec.dropout_rate > 0.0 {
                let keep = 1.0 - layer.spec.dropout_rate;
                let mask = Array2::from_shape_fn(z.dim(), |_| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                z = &z * &mask;
                Some(mask)
            } else {
                None
            };
            tapes.push(LayerTape {
                input,
                linear,
                bn: bn_tape,
                pre_activation,
                dropout,
            });
            x = z;
        }
        Ok((x, ForwardCache { tapes, batch: rows }))
    }

    /// Inference-style forward that records a tape: dropout disabled and
    /// batch norm frozen on running statistics. Used by gradient checking
    /// and by temporal-difference updates on dropout-free networks.
    pub fn forward_frozen(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(batch)?;
        let rows = batch.nrows();
        let mut tapes = Vec::with_capacity(self.layers.len());
        let mut x = batch.to_owned();
        for layer in &self.layers {
            let input = x;
            let linear = input.dot(&layer.weights) + &layer.biases;
            let mut z = linear.clone();
            let bn_tape = if let Some(bn) = &layer.bn {
                let inv_std = bn.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let normalized = (&linear - &bn.running_mean) * &inv_std;
                z = &normalized * &bn.gamma + &bn.beta;
                Some(BnTape::Frozen {
                    inv_std,
                    normalized,
                })
            } else {
                None
            };
            let pre_activation = z.clone();
            if layer.spec.activation == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            tapes.push(LayerTape {
                input,
                linear,
                bn: bn_tape,
                pre_activation,
                dropout: None,
            });
            x = z;
        }
        Ok((x, ForwardCache { tapes, batch: rows }))
    }

    /// Backpropagate `dL/d(output)` through the tape.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Array2<f64>) -> Gradients {
        let batch = cache.batch as f64;
        let mut grad = grad_output.to_owned();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (layer, tape) in self.layers.iter().zip(&cache.tapes).rev() {
            if let Some(mask) = &tape.dropout {
                grad = &grad * mask;
            }
            if layer.spec.activation == Activation::Relu {
                ndarray::Zip::from(&mut grad)
                    .and(&tape.pre_activation)
                    .for_each(|g, &p| {
                        if p <= 0.0 {
                            *g = 0.0;
                        }
                    });
            }
            let (d_gamma, d_beta) = if let Some(bn_tape) = &tape.bn {
                let bn = layer.bn.as_ref().expect("tape matches layer");
                match bn_tape {
                    BnTape::Batch {
                        mean,
                        inv_std,
                        normalized,
                    } => {
                        let d_beta = grad.sum_axis(Axis(0));
                        let d_gamma = (&grad * normalized).sum_axis(Axis(0));
                        let d_norm = &grad * &bn.gamma;
                        let centered = &tape.linear - mean;
                        let d_var = (&d_norm * &centered)
                            .sum_axis(Axis(0))
                            .mapv(|v| -0.5 * v)
                            * inv_std.mapv(|s| s.powi(3));
                        let d_mean = (&d_norm.sum_axis(Axis(0)) * &inv_std.mapv(|s| -s))
                            + &(&d_var * &centered.sum_axis(Axis(0)).mapv(|v| -2.0 * v / batch));
                        grad = &d_norm * inv_std
                            + &(&centered * &d_var.mapv(|v| 2.0 * v / batch))
                            + &d_mean.mapv(|v| v / batch);
                        (Some(d_gamma), Some(d_beta))
                    }
                    BnTape::Frozen {
                        inv_std,
                        normalized,
                    } => {
                        let d_beta = grad.sum_axis(Axis(0));
                        let d_gamma = (&grad * normalized).sum_axis(Axis(0));
                        grad = &grad * &bn.gamma * inv_std;
                        (Some(d_gamma), Some(d_beta))
                    }
                }
            } else {
                (None, None)
            };
            let d_weights = tape.input.t().dot(&grad);
            let d_biases = grad.sum_axis(Axis(0));
            let next = grad.dot(&layer.weights.t());
            layers.push(LayerGrads {
                d_weights,
                d_biases,
                d_gamma,
                d_beta,
            });
            grad = next;
        }
        layers.reverse();
        Gradients { layers }
    }

    /// Flatten trainable parameters in layer order (weights row-major,
    /// biases, gamma, beta). Matches [`Network::assign_flat`].
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.biases.iter());
            if let Some(bn) = &layer.bn {
                out.extend(bn.gamma.iter());
                out.extend(bn.beta.iter());
            }
        }
        out
    }

    /// Overwrite trainable parameters from a flat vector.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "flat vector has {} entries, network has {} parameters",
                flat.len(),
                self.parameter_count()
            )));
        }
        let mut it = flat.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = it.next().unwrap();
            }
            for b in layer.biases.iter_mut() {
                *b = it.next().unwrap();
            }
            if let Some(bn) = &mut layer.bn {
                for g in bn.gamma.iter_mut() {
                    *g = it.next().unwrap();
                }
                for b in bn.beta.iter_mut() {
                    *b = it.next().unwrap();
                }
            }
        }
        Ok(())
    }

    pub(crate) fn gradients_flat(grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &grads.layers {
            out.extend(layer.d_weights.iter());
            out.extend(layer.d_biases.iter());
            if let Some(g) = &layer.d_gamma {
                out.extend(g.iter());
            }
            if let Some(b) = &layer.d_beta {
                out.extend(b.iter());
            }
        }
        out
    }

    pub(crate) fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn from_layers(layers: Vec<Layer>, seed: u64) -> Self {
        Self {
            layers,
            rng_seed: seed,
        }
    }
}
