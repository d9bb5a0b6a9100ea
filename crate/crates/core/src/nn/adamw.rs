//! AdamW with decoupled weight decay and optional per-parameter gating.
//!
//! The gate is what makes task isolation work: a masked-out parameter is not
//! touched at all during a step — neither its value nor its first/second
//! moment entries move.

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::nn::mlp::{GradientBuffer, Mlp};

/// Binary per-parameter update gate, shape-matched to an `Mlp`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMask {
    pub layers: Vec<MaskLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskLayer {
    /// Row-major, one flag per weight.
    pub weight: Vec<bool>,
    pub bias: Vec<bool>,
}

impl UpdateMask {
    pub fn all_ones(net: &Mlp) -> Self {
        UpdateMask {
            layers: net
                .layers()
                .iter()
                .map(|l| MaskLayer {
                    weight: vec![true; l.out_dim() * l.in_dim()],
                    bias: vec![true; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn all_zeros(net: &Mlp) -> Self {
        UpdateMask {
            layers: net
                .layers()
                .iter()
                .map(|l| MaskLayer {
                    weight: vec![false; l.out_dim() * l.in_dim()],
                    bias: vec![false; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weight.iter().filter(|&&b| b).count() + l.bias.iter().filter(|&&b| b).count()
            })
            .sum()
    }

    pub fn shape_matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers().len()
            && self.layers.iter().zip(net.layers()).all(|(m, l)| {
                m.weight.len() == l.out_dim() * l.in_dim() && m.bias.len() == l.out_dim()
            })
    }
}

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Optimizer state: first and second moments per parameter plus the step
/// counter used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamWState {
    m: Vec<MomentLayer>,
    v: Vec<MomentLayer>,
    step_count: u64,
    cfg: AdamWConfig,
}

#[derive(Debug, Clone)]
struct MomentLayer {
    weight: Matrix,
    bias: Vec<f64>,
}

impl AdamWState {
    pub fn new(net: &Mlp, cfg: AdamWConfig) -> Self {
        let zeros = || -> Vec<MomentLayer> {
            net.layers()
                .iter()
                .map(|l| MomentLayer {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect()
        };
        AdamWState {
            m: zeros(),
            v: zeros(),
            step_count: 0,
            cfg,
        }
    }

    #[inline]
    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    #[inline]
    pub fn config(&self) -> &AdamWConfig {
        &self.cfg
    }

    /// One AdamW step. Where `mask` is zero the parameter and its moment
    /// entries stay bit-identical; a missing mask means update everything.
    pub fn step(
        &mut self,
        net: &mut Mlp,
        grads: &GradientBuffer,
        mask: Option<&UpdateMask>,
    ) -> Result<()> {
        if !grads.shape_matches(net) {
            return Err(Error::invalid_argument(
                "gradient buffer shape does not match the network",
            ));
        }
        if let Some(m) = mask {
            if !m.shape_matches(net) {
                return Err(Error::invalid_argument(
                    "update mask shape does not match the network",
                ));
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for (k, layer) in net.layers_mut().iter_mut().enumerate() {
            let lg = &grads.layers[k];
            let mk = mask.map(|m| &m.layers[k]);

            let weights = layer.weight_mut().data_mut();
            let gm = self.m[k].weight.data_mut();
            let gv = self.v[k].weight.data_mut();
            for (i, w) in weights.iter_mut().enumerate() {
                if let Some(mk) = mk {
                    if !mk.weight[i] {
                        continue;
                    }
                }
                let g = lg.weight.data()[i];
                gm[i] = beta1 * gm[i] + (1.0 - beta1) * g;
                gv[i] = beta2 * gv[i] + (1.0 - beta2) * g * g;
                let m_hat = gm[i] / bc1;
                let v_hat = gv[i] / bc2;
                *w -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *w);
            }

            let biases = layer.bias_mut();
            let bm = &mut self.m[k].bias;
            let bv = &mut self.v[k].bias;
            for (i, b) in biases.iter_mut().enumerate() {
                if let Some(mk) = mk {
                    if !mk.bias[i] {
                        continue;
                    }
                }
                let g = lg.bias[i];
                bm[i] = beta1 * bm[i] + (1.0 - beta1) * g;
                bv[i] = beta2 * bv[i] + (1.0 - beta2) * g * g;
                let m_hat = bm[i] / bc1;
                let v_hat = bv[i] / bc2;
                *b -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *b);
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn moment_bits(&self) -> Vec<u64> {
        let mut bits = Vec::new();
        for layer in self.m.iter().chain(&self.v) {
            bits.extend(layer.weight.data().iter().map(|v| v.to_bits()));
            bits.extend(layer.bias.iter().map(|v| v.to_bits()));
        }
        bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::params_bits_equal;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_decay() -> AdamWConfig {
        AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradients_without_decay_leave_params_unchanged() {
        let mut net = Mlp::new(&[3, 5, 2], 9).unwrap();
        let before = net.clone();
        let mut state = AdamWState::new(&net, no_decay());
        let grads = GradientBuffer::zeros_like(&net);
        state.step(&mut net, &grads, None).unwrap();
        assert!(params_bits_equal(&net, &before));
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn single_step_matches_hand_computed_update() {
        let mut net = Mlp::new(&[1, 1], 0).unwrap();
        net.layers_mut()[0].weight_mut().set(0, 0, 1.0);
        let mut state = AdamWState::new(&net, no_decay());
        let mut grads = GradientBuffer::zeros_like(&net);
        grads.layers[0].weight.set(0, 0, 1.0);
        state.step(&mut net, &grads, None).unwrap();

        // Hand derivation: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1,
        // w' = 1 - lr * 1 / (1 + eps).
        let expected = 1.0 - 0.01 * (1.0 / (1.0 + 1e-8));
        let got = net.layers()[0].weight().get(0, 0);
        assert!((got - expected).abs() <= 1e-12, "got {got}, expected {expected}");
    }

    #[test]
    fn all_zero_mask_freezes_everything() {
        let mut net = Mlp::new(&[2, 4, 3], 5).unwrap();
        let before = net.clone();
        let mut state = AdamWState::new(&net, AdamWConfig::default());
        let mask = UpdateMask::all_zeros(&net);
        let mut grads = GradientBuffer::zeros_like(&net);
        for lg in &mut grads.layers {
            lg.weight.fill(0.7);
            lg.bias.fill(-0.3);
        }
        let moments_before = state.moment_bits();
        state.step(&mut net, &grads, Some(&mask)).unwrap();
        assert!(params_bits_equal(&net, &before));
        assert_eq!(state.moment_bits(), moments_before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn masked_out_entries_stay_bit_identical_under_random_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut net = Mlp::new(&[3, 6, 4], 21).unwrap();
        let before = net.clone();
        let mut mask = UpdateMask::all_ones(&net);
        for layer in &mut mask.layers {
            for flag in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *flag = rng.random_bool(0.5);
            }
        }
        let mut grads = GradientBuffer::zeros_like(&net);
        for lg in &mut grads.layers {
            for g in lg.weight.data_mut().iter_mut().chain(lg.bias.iter_mut()) {
                *g = rng.random_range(-1.0..1.0);
            }
        }
        let mut state = AdamWState::new(&net, AdamWConfig::default());
        for _ in 0..5 {
            state.step(&mut net, &grads, Some(&mask)).unwrap();
        }
        for (k, (ml, (nl, bl))) in mask
            .layers
            .iter()
            .zip(net.layers().iter().zip(before.layers()))
            .enumerate()
        {
            for (i, &flag) in ml.weight.iter().enumerate() {
                let (now, was) = (nl.weight().data()[i], bl.weight().data()[i]);
                if flag {
                    assert_ne!(now.to_bits(), was.to_bits(), "layer {k} weight {i} should move");
                } else {
                    assert_eq!(now.to_bits(), was.to_bits(), "layer {k} weight {i} must freeze");
                }
            }
            for (i, &flag) in ml.bias.iter().enumerate() {
                let (now, was) = (nl.bias()[i], bl.bias()[i]);
                if !flag {
                    assert_eq!(now.to_bits(), was.to_bits(), "layer {k} bias {i} must freeze");
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut net = Mlp::new(&[2, 3], 0).unwrap();
        let other = Mlp::new(&[2, 4], 0).unwrap();
        let mut state = AdamWState::new(&net, AdamWConfig::default());
        let grads = GradientBuffer::zeros_like(&other);
        assert!(state.step(&mut net, &grads, None).is_err());
        let good = GradientBuffer::zeros_like(&net);
        let mask = UpdateMask::all_ones(&other);
        assert!(state.step(&mut net, &good, Some(&mask)).is_err());
    }

    #[test]
    fn thousand_steps_on_bounded_targets_stay_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Mlp::new(&[4, 16, 16, 2], 1).unwrap();
        let mut state = AdamWState::new(&net, AdamWConfig::default());
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (y, cache) = net.forward(&x).unwrap();
            let og: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a - b).collect();
            let grads = net.backward(&cache, &og).unwrap();
            state.step(&mut net, &grads, None).unwrap();
        }
        assert!(net.all_finite());
    }
}
