//! Fully connected network with ReLU hidden activations, exact
//! backpropagation, and per-weight access.
//!
//! The architecture is a plain stack of dense layers: ReLU between hidden
//! layers, identity on the output. Everything is `f64` and single-sample;
//! batching is a loop at the call site. Layout is kept deliberately open
//! (layers, weights, and biases are reachable) because task-ownership
//! masking needs to address every parameter individually.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::matrix::{dot, Matrix};

/// One dense layer: `y = W x + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weight: Matrix,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::invalid_argument(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Layer { weight, bias })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    #[inline]
    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    #[inline]
    pub fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    #[inline]
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// Dense multi-layer perceptron.
///
/// "6 layers" in configs counts weight layers: `[4, 256, 256, 256, 256,
/// 256, 12]` gives six weight matrices with five ReLU activations between
/// them. (A reading that counts the output layer separately would give a
/// different depth; this crate uses the weight-layer count everywhere.)
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Creates a network with He-normal weights (`std = sqrt(2 / fan_in)`)
    /// and zero biases from a seeded deterministic generator. The same
    /// `(layer_sizes, seed)` pair always produces bit-identical parameters.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid_argument(
                "layer_sizes needs at least an input and an output width",
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid_argument(
                "layer_sizes entries must be positive",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("std is finite and positive");
            let mut weight = Matrix::zeros(fan_out, fan_in);
            for w in weight.data_mut() {
                *w = normal.sample(&mut rng);
            }
            layers.push(Layer {
                weight,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(Mlp { layers })
    }

    /// Builds a network directly from layers; adjacent dimensions must chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid_argument("network needs at least one layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::invalid_argument(format!(
                    "layer {k} out dim {} does not chain into layer {} in dim {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    #[inline]
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    #[inline]
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.layers.len() + 1);
        sizes.push(self.input_dim());
        sizes.extend(self.layers.iter().map(|l| l.out_dim()));
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Runs the network, returning the output and a cache sufficient for an
    /// exact backward pass over the same parameters.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let mut cache = ForwardCache::default();
        let output = self.forward_into(input, &mut cache)?.to_vec();
        Ok((output, cache))
    }

    /// `forward` variant that reuses an existing cache's buffers.
    pub fn forward_into<'c>(
        &self,
        input: &[f64],
        cache: &'c mut ForwardCache,
    ) -> Result<&'c [f64]> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid_argument(format!(
                "input length {} does not match network input width {}",
                input.len(),
                self.input_dim()
            )));
        }
        cache.inputs.resize(self.layers.len(), Vec::new());
        cache.preacts.resize(self.layers.len(), Vec::new());

        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            if k == 0 {
                cache.inputs[0].clear();
                cache.inputs[0].extend_from_slice(input);
            }
            let (before, after) = cache.inputs.split_at_mut(k + 1);
            let x = &before[k];
            let z = &mut cache.preacts[k];
            z.clear();
            z.extend(
                (0..layer.out_dim()).map(|o| dot(layer.weight.row(o), x) + layer.bias[o]),
            );
            if k < last {
                let next_input = &mut after[0];
                next_input.clear();
                next_input.extend(z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }));
            }
        }
        Ok(&cache.preacts[last])
    }

    /// Evaluates the network without recording a cache.
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid_argument(format!(
                "input length {} does not match network input width {}",
                input.len(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut x = input.to_vec();
        let mut y = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            y.clear();
            y.extend(
                (0..layer.out_dim()).map(|o| dot(layer.weight.row(o), &x) + layer.bias[o]),
            );
            if k < last {
                for v in y.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            std::mem::swap(&mut x, &mut y);
        }
        Ok(x)
    }

    /// Exact gradients of the scalar loss whose gradient with respect to the
    /// network output is `output_grad`, accumulated into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut GradientBuffer,
    ) -> Result<()> {
        self.check_cache(cache)?;
        if output_grad.len() != self.output_dim() {
            return Err(Error::invalid_argument(format!(
                "output_grad length {} does not match network output width {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        if !grads.shape_matches(self) {
            return Err(Error::invalid_argument(
                "gradient buffer shape does not match the network",
            ));
        }

        let last = self.layers.len() - 1;
        // dz for the current layer; starts at the output (identity head).
        let mut dz = output_grad.to_vec();
        let mut dx: Vec<f64> = Vec::new();
        for k in (0..=last).rev() {
            let layer = &self.layers[k];
            if k < last {
                // upstream gradient in dz is w.r.t. relu(z); gate it.
                for (g, &z) in dz.iter_mut().zip(&cache.preacts[k]) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let x = &cache.inputs[k];
            let lg = &mut grads.layers[k];
            for (o, &g) in dz.iter().enumerate() {
                lg.bias[o] += g;
                let wrow = lg.weight.row_mut(o);
                for (w, &xi) in wrow.iter_mut().zip(x) {
                    *w += g * xi;
                }
            }
            if k > 0 {
                dx.clear();
                dx.resize(layer.in_dim(), 0.0);
                for (o, &g) in dz.iter().enumerate() {
                    let wrow = layer.weight.row(o);
                    for (d, &w) in dx.iter_mut().zip(wrow) {
                        *d += g * w;
                    }
                }
                std::mem::swap(&mut dz, &mut dx);
            }
        }
        Ok(())
    }

    /// Convenience wrapper returning a fresh gradient buffer.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<GradientBuffer> {
        let mut grads = GradientBuffer::zeros_like(self);
        self.backward_into(cache, output_grad, &mut grads)?;
        Ok(grads)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.inputs.len() != self.layers.len() || cache.preacts.len() != self.layers.len() {
            return Err(Error::invalid_argument(
                "forward cache does not match network depth",
            ));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if cache.inputs[k].len() != layer.in_dim() || cache.preacts[k].len() != layer.out_dim()
            {
                return Err(Error::invalid_argument(format!(
                    "forward cache shape is stale at layer {k}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-layer activations recorded by `forward`, consumed by `backward`.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// `inputs[k]` is the vector fed into layer `k`.
    inputs: Vec<Vec<f64>>,
    /// `preacts[k]` is `W_k inputs[k] + b_k` before the activation.
    preacts: Vec<Vec<f64>>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros_like(net: &Mlp) -> Self {
        GradientBuffer {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for lg in &mut self.layers {
            lg.weight.fill(0.0);
            lg.bias.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for lg in &mut self.layers {
            for w in lg.weight.data_mut() {
                *w *= factor;
            }
            for b in &mut lg.bias {
                *b *= factor;
            }
        }
    }

    pub fn shape_matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers().len()
            && self.layers.iter().zip(net.layers()).all(|(g, l)| {
                g.weight.rows() == l.out_dim()
                    && g.weight.cols() == l.in_dim()
                    && g.bias.len() == l.out_dim()
            })
    }
}

/// True when every parameter of `a` equals the corresponding parameter of
/// `b` bit for bit (distinguishes `0.0` from `-0.0`, unlike `==`).
pub fn params_bits_equal(a: &Mlp, b: &Mlp) -> bool {
    a.layers.len() == b.layers.len()
        && a.layers.iter().zip(&b.layers).all(|(la, lb)| {
            la.weight.data().len() == lb.weight.data().len()
                && la.bias.len() == lb.bias.len()
                && la
                    .weight
                    .data()
                    .iter()
                    .zip(lb.weight.data())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
                && la
                    .bias
                    .iter()
                    .zip(&lb.bias)
                    .all(|(x, y)| x.to_bits() == y.to_bits())
        })
}
