//! Central finite-difference gradients, independent of the backprop path.

use crate::nn::{GradientBuffer, Mlp};

/// Numerically differentiates `loss` with respect to every parameter of
/// `net` using central differences with step `h`.
pub fn finite_difference_gradients(
    net: &Mlp,
    h: f64,
    mut loss: impl FnMut(&Mlp) -> f64,
) -> GradientBuffer {
    let mut probe = net.clone();
    let mut grads = GradientBuffer::zeros_like(net);
    for k in 0..net.layers().len() {
        for i in 0..net.layers()[k].weight().data().len() {
            let orig = probe.layers()[k].weight().data()[i];
            probe.layers_mut()[k].weight_mut().data_mut()[i] = orig + h;
            let plus = loss(&probe);
            probe.layers_mut()[k].weight_mut().data_mut()[i] = orig - h;
            let minus = loss(&probe);
            probe.layers_mut()[k].weight_mut().data_mut()[i] = orig;
            grads.layers[k].weight.data_mut()[i] = (plus - minus) / (2.0 * h);
        }
        for i in 0..net.layers()[k].bias().len() {
            let orig = probe.layers()[k].bias()[i];
            probe.layers_mut()[k].bias_mut()[i] = orig + h;
            let plus = loss(&probe);
            probe.layers_mut()[k].bias_mut()[i] = orig - h;
            let minus = loss(&probe);
            probe.layers_mut()[k].bias_mut()[i] = orig;
            grads.layers[k].bias[i] = (plus - minus) / (2.0 * h);
        }
    }
    grads
}

/// Worst relative disagreement between two gradient buffers, with the
/// denominator floored at 1 so near-zero entries compare absolutely.
pub fn max_relative_error(a: &GradientBuffer, b: &GradientBuffer) -> f64 {
    let mut worst = 0.0f64;
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        for (&x, &y) in la
            .weight
            .data()
            .iter()
            .chain(&la.bias)
            .zip(lb.weight.data().iter().chain(&lb.bias))
        {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}
