//! The individual oracle checks behind the `verify` command.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{AdamWConfig, AdamWState, GradientBuffer, Mlp, UpdateMask};
use crate::verify::finite_diff::{finite_difference_gradients, max_relative_error};

/// Outcome of one oracle run.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl OracleReport {
    fn new(name: &'static str, passed: bool, details: String) -> Self {
        OracleReport {
            name,
            passed,
            details,
        }
    }
}

/// Backpropagation vs central finite differences over `num_nets` random
/// small networks (depth up to 3 weight layers, width up to 8).
pub fn gradient_check(num_nets: usize, tolerance: f64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_06ad);
    let mut worst = 0.0f64;
    for trial in 0..num_nets {
        let depth = rng.random_range(1..=3usize);
        let mut sizes = Vec::with_capacity(depth + 1);
        for _ in 0..=depth {
            sizes.push(rng.random_range(1..=8usize));
        }
        let net = Mlp::new(&sizes, 1000 + trial as u64).expect("valid sizes");
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..*sizes.last().unwrap())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();

        let (output, cache) = net.forward(&input).expect("forward");
        let output_grad: Vec<f64> = output.iter().zip(&target).map(|(y, t)| y - t).collect();
        let analytic = net.backward(&cache, &output_grad).expect("backward");

        let numeric = finite_difference_gradients(&net, 1e-5, |probe| {
            let y = probe.output(&input).expect("probe forward");
            0.5 * y.iter().zip(&target).map(|(v, t)| (v - t) * (v - t)).sum::<f64>()
        });
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    OracleReport::new(
        "gradient-finite-difference",
        worst < tolerance,
        format!("max relative error {worst:.3e} over {num_nets} nets (tolerance {tolerance:.0e})"),
    )
}

/// One AdamW step on a scalar weight against the update formula written out
/// by hand, plus the frozen-mask no-op case.
pub fn adamw_single_step_check() -> OracleReport {
    let scenario = |mask: Option<UpdateMask>| -> (f64, f64) {
        let mut net = Mlp::new(&[1, 1], 0).unwrap();
        net.layers_mut()[0].weight_mut().set(0, 0, 1.0);
        net.layers_mut()[0].bias_mut()[0] = 0.0;
        let cfg = AdamWConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        let mut state = AdamWState::new(&net, cfg);
        let mut grads = GradientBuffer::zeros_like(&net);
        grads.layers[0].weight.set(0, 0, 1.0);
        state.step(&mut net, &grads, mask.as_ref()).unwrap();
        (net.layers()[0].weight().get(0, 0), net.layers()[0].bias()[0])
    };

    // Independent route: the bias-corrected update computed inline.
    let (beta1, beta2, lr, eps, grad) = (0.9f64, 0.999f64, 0.01f64, 1e-8f64, 1.0f64);
    let m = (1.0 - beta1) * grad;
    let v = (1.0 - beta2) * grad * grad;
    let m_hat = m / (1.0 - beta1);
    let v_hat = v / (1.0 - beta2);
    let expected = 1.0 - lr * (m_hat / (v_hat.sqrt() + eps));

    let (updated, bias) = scenario(None);
    let err = (updated - expected).abs();

    let template = Mlp::new(&[1, 1], 0).unwrap();
    let (frozen, _) = scenario(Some(UpdateMask::all_zeros(&template)));

    let passed = err <= 1e-12 && bias == 0.0 && frozen.to_bits() == 1.0f64.to_bits();
    OracleReport::new(
        "adamw-single-step",
        passed,
        format!("updated {updated:.17} vs hand-computed {expected:.17} (|err| {err:.2e}); frozen step left w = {frozen}"),
    )
}

/// Runs every oracle in a fixed order.
pub fn run_all() -> Vec<OracleReport> {
    vec![gradient_check(100, 1e-5), adamw_single_step_check()]
}
