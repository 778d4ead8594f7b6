//! JSON checkpoint format: layer specs, row-major flattened parameters, and
//! batch-norm running statistics. Round-trips are value-exact for finite
//! doubles (shortest-round-trip float printing).

use super::{BatchNorm, Layer, LayerSpec, Network};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub(crate) const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub spec: LayerSpec,
    /// Row-major `(input_width, output_width)`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub running_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub running_var: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub rng_seed: u64,
    pub layers: Vec<LayerCheckpoint>,
}

impl From<&Network> for NetworkCheckpoint {
    fn from(net: &Network) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerCheckpoint {
                spec: l.spec,
                weights: l.weights.iter().copied().collect(),
                biases: l.biases.to_vec(),
                gamma: l.bn.as_ref().map(|bn| bn.gamma.to_vec()),
                beta: l.bn.as_ref().map(|bn| bn.beta.to_vec()),
                running_mean: l.bn.as_ref().map(|bn| bn.running_mean.to_vec()),
                running_var: l.bn.as_ref().map(|bn| bn.running_var.to_vec()),
            })
            .collect();
        NetworkCheckpoint {
            format_version: FORMAT_VERSION,
            rng_seed: net.seed(),
            layers,
        }
    }
}

impl TryFrom<NetworkCheckpoint> for Network {
    type Error = Error;

    fn try_from(ckpt: NetworkCheckpoint) -> Result<Network> {
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint format version {}",
                ckpt.format_version
            )));
        }
        let mut layers = Vec::with_capacity(ckpt.layers.len());
        for lc in ckpt.layers {
            let (rows, cols) = (lc.spec.input_width, lc.spec.output_width);
            if lc.weights.len() != rows * cols || lc.biases.len() != cols {
                return Err(Error::Shape(format!(
                    "checkpoint layer arrays do not match spec {rows}x{cols}"
                )));
            }
            let weights = Array2::from_shape_vec((rows, cols), lc.weights)
                .map_err(|e| Error::Shape(e.to_string()))?;
            let bn = if lc.spec.batch_norm {
                let take = |v: Option<Vec<f64>>, name: &str| -> Result<Array1<f64>> {
                    let v = v.ok_or_else(|| {
                        Error::Shape(format!("batch-norm layer missing {name}"))
                    })?;
                    if v.len() != cols {
                        return Err(Error::Shape(format!("{name} length != {cols}")));
                    }
                    Ok(Array1::from(v))
                };
                Some(BatchNorm {
                    gamma: take(lc.gamma, "gamma")?,
                    beta: take(lc.beta, "beta")?,
                    running_mean: take(lc.running_mean, "running_mean")?,
                    running_var: take(lc.running_var, "running_var")?,
                })
            } else {
                None
            };
            layers.push(Layer {
                spec: lc.spec,
                weights,
                biases: Array1::from(lc.biases),
                bn,
            });
        }
        // Re-validate chaining through the public constructor path.
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        Network::new(&specs, ckpt.rng_seed)?;
        Ok(Network::from_layers(layers, ckpt.rng_seed))
    }
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &NetworkCheckpoint::from(net))?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network> {
    let file = std::fs::File::open(path)?;
    let ckpt: NetworkCheckpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
    Network::try_from(ckpt)
}
