//! Central-finite-difference verification of the analytic gradients.

use super::Network;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use ndarray::{Array2, Axis};

/// Forward mode under which the checked loss is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Dropout off, batch norm frozen on running statistics. Always valid.
    Frozen,
    /// Batch-statistics path. Invalid when any layer has dropout: the mask
    /// would differ between the analytic and perturbed evaluations.
    Train,
}

/// Relative-error denominators are floored here so that near-zero gradients
/// compare on an absolute scale instead of blowing up on round-off.
const REL_FLOOR: f64 = 1e-4;

/// Max relative error between analytic and central-difference gradients of
/// the weighted squared loss on one sample. Runs with dropout disabled.
pub fn gradient_check(
    net: &Network,
    input: &[f64],
    target: f64,
    weight: f64,
    epsilon: f64,
) -> Result<f64> {
    gradient_check_mode(net, input, target, weight, epsilon, CheckMode::Frozen)
}

pub fn gradient_check_mode(
    net: &Network,
    input: &[f64],
    target: f64,
    weight: f64,
    epsilon: f64,
    mode: CheckMode,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Config(format!(
            "gradient-check epsilon {epsilon} outside (0, 1e-2]"
        )));
    }
    if mode == CheckMode::Train && net.specs().iter().any(|s| s.dropout_rate > 0.0) {
        return Err(Error::GradientCheckMode);
    }
    let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
        .map_err(|e| Error::Shape(e.to_string()))?;

    let loss_of = |candidate: &Network| -> Result<f64> {
        let out = match mode {
            CheckMode::Frozen => candidate.forward_frozen(&x)?.0,
            CheckMode::Train => {
                // Running-stat updates mutate the clone, not the loss value.
                let mut c = candidate.clone();
                let mut rng = seeded_rng(0);
                c.forward_train(&x, &mut rng)?.0
            }
        };
        let r = out[[0, 0]] - target;
        Ok(weight * r * r)
    };

    let analytic = {
        let (out, cache) = match mode {
            CheckMode::Frozen => net.forward_frozen(&x)?,
            CheckMode::Train => {
                let mut c = net.clone();
                let mut rng = seeded_rng(0);
                c.forward_train(&x, &mut rng)?
            }
        };
        let mut grad_out = out.clone();
        grad_out
            .index_axis_mut(Axis(1), 0)
            .mapv_inplace(|v| 2.0 * weight * (v - target));
        Network::gradients_flat(&net.backward(&cache, &grad_out))
    };

    let params = net.flatten_params();
    let mut max_rel = 0.0_f64;
    let mut perturbed = net.clone();
    for j in 0..params.len() {
        let mut plus = params.clone();
        plus[j] += epsilon;
        perturbed.assign_flat(&plus)?;
        let loss_plus = loss_of(&perturbed)?;
        let mut minus = params.clone();
        minus[j] -= epsilon;
        perturbed.assign_flat(&minus)?;
        let loss_minus = loss_of(&perturbed)?;
        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let rel = (analytic[j] - numeric).abs()
            / analytic[j].abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec, Network};
    use ndarray::array;
    use rand::Rng;

    fn random_input(rng: &mut rand_chacha::ChaCha8Rng, width: usize) -> Vec<f64> {
        (0..width).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    #[test]
    fn three_layer_nets_pass_at_1e4() {
        for seed in 0..8_u64 {
            let specs = [
                LayerSpec::new(3, 5, Activation::Relu),
                LayerSpec::new(5, 4, Activation::Relu),
                LayerSpec::new(4, 1, Activation::Identity),
            ];
            let net = Network::new(&specs, seed).unwrap();
            let mut rng = crate::rng::seeded_rng(seed ^ 0xabc);
            let input = random_input(&mut rng, 3);
            let err = gradient_check(&net, &input, 0.7, 2.0, 1e-5).unwrap();
            assert!(err < 1e-4, "seed {seed}: max rel error {err}");
        }
    }

    #[test]
    fn batch_norm_layers_pass_in_frozen_mode() {
        let specs = [
            LayerSpec::new(4, 6, Activation::Relu).with_batch_norm(),
            LayerSpec::new(6, 1, Activation::Identity),
        ];
        let mut net = Network::new(&specs, 3).unwrap();
        // Non-trivial running stats so the frozen path is exercised.
        let mut rng = crate::rng::seeded_rng(77);
        let warm = ndarray::Array2::from_shape_fn((16, 4), |_| rng.random_range(-1.0..1.0));
        net.forward_train(&warm, &mut rng).unwrap();
        let err = gradient_check(&net, &[0.3, -0.2, 0.9, 0.1], -0.4, 1.0, 1e-5).unwrap();
        assert!(err < 1e-4, "max rel error {err}");
    }

    #[test]
    fn zero_network_zero_target_is_vacuous() {
        let mut net = Network::new(&[LayerSpec::new(2, 1, Activation::Identity)], 0).unwrap();
        net.weights_mut(0).fill(0.0);
        let err = gradient_check(&net, &[1.0, 2.0], 0.0, 1.0, 1e-5).unwrap();
        assert!(err < 1e-8, "max rel error {err}");
    }

    #[test]
    fn train_mode_with_dropout_is_invalid_usage() {
        let specs = [
            LayerSpec::new(2, 4, Activation::Relu).with_dropout(0.3),
            LayerSpec::new(4, 1, Activation::Identity),
        ];
        let net = Network::new(&specs, 0).unwrap();
        match gradient_check_mode(&net, &[0.1, 0.2], 0.0, 1.0, 1e-5, CheckMode::Train) {
            Err(Error::GradientCheckMode) => {}
            other => panic!("expected GradientCheckMode, got {other:?}"),
        }
    }

    #[test]
    fn epsilon_outside_range_rejected() {
        let net = Network::new(&[LayerSpec::new(1, 1, Activation::Identity)], 0).unwrap();
        assert!(gradient_check(&net, &[1.0], 0.0, 1.0, 0.0).is_err());
        assert!(gradient_check(&net, &[1.0], 0.0, 1.0, 0.1).is_err());
    }

    /// The batch-statistics backward path, verified against finite
    /// differences of the whole-batch training loss.
    #[test]
    fn batch_norm_training_path_matches_finite_differences() {
        let specs = [
            LayerSpec::new(3, 4, Activation::Relu).with_batch_norm(),
            LayerSpec::new(4, 1, Activation::Identity),
        ];
        let net = Network::new(&specs, 21).unwrap();
        let x = array![
            [0.2, -1.0, 0.5],
            [1.3, 0.4, -0.7],
            [-0.6, 0.9, 0.1],
            [0.0, 0.3, 1.1],
            [0.8, -0.2, -0.4]
        ];
        let y = array![0.1, -0.5, 0.9, 0.2, 0.0];

        let batch_loss = |candidate: &Network| {
            let mut c = candidate.clone();
            let mut rng = crate::rng::seeded_rng(0);
            let (pred, _) = c.forward_train(&x, &mut rng).unwrap();
            let residual = &pred.index_axis(ndarray::Axis(1), 0) - &y;
            residual.mapv(|r| r * r).sum() / y.len() as f64
        };

        let analytic = {
            let mut c = net.clone();
            let mut rng = crate::rng::seeded_rng(0);
            let (pred, cache) = c.forward_train(&x, &mut rng).unwrap();
            let residual = &pred.index_axis(ndarray::Axis(1), 0) - &y;
            let grad = residual
                .mapv(|r| 2.0 * r / y.len() as f64)
                .insert_axis(ndarray::Axis(1));
            Network::gradients_flat(&net.backward(&cache, &grad))
        };

        let params = net.flatten_params();
        let eps = 1e-5;
        let mut perturbed = net.clone();
        for j in 0..params.len() {
            let mut plus = params.clone();
            plus[j] += eps;
            perturbed.assign_flat(&plus).unwrap();
            let lp = batch_loss(&perturbed);
            let mut minus = params.clone();
            minus[j] -= eps;
            perturbed.assign_flat(&minus).unwrap();
            let lm = batch_loss(&perturbed);
            let numeric = (lp - lm) / (2.0 * eps);
            let rel = (analytic[j] - numeric).abs()
                / analytic[j].abs().max(numeric.abs()).max(REL_FLOOR);
            assert!(rel < 1e-4, "param {j}: analytic {} vs fd {numeric}", analytic[j]);
        }
    }
}
