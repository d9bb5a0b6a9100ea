//! Discrete soft actor-critic.
//!
//! The policy head emits logits over the unified action space; twin Q
//! networks with Polyak-averaged target copies provide the critic. Targets
//! use the expected soft value over the full action distribution, so no
//! reparameterization is needed in the discrete case.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::nn::{AdamWConfig, AdamWState, ForwardCache, GradientBuffer, Mlp};

/// Hyperparameters for discrete SAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacConfig {
    /// Entropy temperature; zero recovers plain expected-value training.
    pub alpha: f64,
    pub gamma: f64,
    /// Polyak smoothing factor for the target critics.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps between gradient updates.
    pub update_every: usize,
    pub optimizer: AdamWConfig,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            alpha: 0.2,
            gamma: 0.9,
            tau: 0.005,
            batch_size: 64,
            buffer_capacity: 10_000,
            update_every: 2,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 {
            return Err(Error::invalid_argument("alpha must be non-negative"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid_argument("gamma must be in (0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid_argument("tau must be in (0, 1]"));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::invalid_argument(
                "buffer capacity must hold at least one batch",
            ));
        }
        if self.update_every == 0 {
            return Err(Error::invalid_argument("update cadence must be positive"));
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Log-probabilities via log-sum-exp.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&l| l - lse).collect()
}

/// Shannon entropy of a distribution, with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

fn polyak_into(target: &mut Mlp, online: &Mlp, tau: f64) {
    for (tl, ol) in target.layers_mut().iter_mut().zip(online.layers()) {
        for (t, &o) in tl
            .weight_mut()
            .data_mut()
            .iter_mut()
            .zip(ol.weight().data())
        {
            *t = tau * o + (1.0 - tau) * *t;
        }
        for (t, &o) in tl.bias_mut().iter_mut().zip(ol.bias()) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

/// Soft actor-critic learner with twin critics.
#[derive(Debug, Clone)]
pub struct SacAgent {
    policy: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    opt_policy: AdamWState,
    opt_q1: AdamWState,
    opt_q2: AdamWState,
    buffer: ReplayBuffer,
    cfg: SacConfig,
    rng: ChaCha8Rng,
    env_steps: u64,
}

impl SacAgent {
    /// Policy and critics share the architecture; their seeds derive from
    /// `net_seed` so the three networks start distinct but reproducible.
    pub fn new(
        layer_sizes: &[usize],
        cfg: SacConfig,
        net_seed: u64,
        explore_seed: u64,
        buffer_seed: u64,
    ) -> Result<SacAgent> {
        cfg.validate()?;
        let policy = Mlp::new(layer_sizes, net_seed)?;
        let q1 = Mlp::new(layer_sizes, net_seed.wrapping_add(1))?;
        let q2 = Mlp::new(layer_sizes, net_seed.wrapping_add(2))?;
        let q1_target = q1.clone();
        let q2_target = q2.clone();
        Ok(SacAgent {
            opt_policy: AdamWState::new(&policy, cfg.optimizer),
            opt_q1: AdamWState::new(&q1, cfg.optimizer),
            opt_q2: AdamWState::new(&q2, cfg.optimizer),
            buffer: ReplayBuffer::new(cfg.buffer_capacity, buffer_seed),
            rng: ChaCha8Rng::seed_from_u64(explore_seed),
            env_steps: 0,
            policy,
            q1,
            q2,
            q1_target,
            q2_target,
            cfg,
        })
    }

    #[inline]
    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    #[inline]
    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    #[inline]
    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Action distribution at `obs`.
    pub fn action_probs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.policy.output(obs)?))
    }

    /// Samples from the policy distribution (training behavior).
    pub fn act_sampling(&mut self, obs: &[f64]) -> Result<usize> {
        let probs = softmax(&self.policy.output(obs)?);
        let draw: f64 = self.rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                return Ok(i);
            }
        }
        Ok(probs.len() - 1)
    }

    /// Mode of the policy distribution (evaluation behavior).
    pub fn act_greedy(&self, obs: &[f64]) -> Result<usize> {
        let logits = self.policy.output(obs)?;
        Ok(crate::agent::dqn::argmax(&logits))
    }

    pub fn record(&mut self, transition: Transition) {
        self.buffer.push(transition);
        self.env_steps += 1;
    }

    pub fn update_due(&self) -> bool {
        self.env_steps % self.cfg.update_every as u64 == 0
    }

    /// One soft actor-critic update: critics first against the expected
    /// soft target, then the policy against the refreshed critics, then a
    /// Polyak step on the target copies. Returns `(policy_loss, q_loss)`,
    /// or `None` while the buffer is short of a batch.
    pub fn update(&mut self) -> Result<Option<(f64, f64)>> {
        if self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample_indices(self.cfg.batch_size)?;
        let n = batch.len() as f64;
        let alpha = self.cfg.alpha;

        // Soft targets from the frozen critics.
        let mut targets = Vec::with_capacity(batch.len());
        for &i in &batch {
            let tr = self.buffer.get(i);
            let y = if tr.done {
                tr.reward
            } else {
                let logits = self.policy.output(&tr.next_state)?;
                let probs = softmax(&logits);
                let logp = log_softmax(&logits);
                let q1t = self.q1_target.output(&tr.next_state)?;
                let q2t = self.q2_target.output(&tr.next_state)?;
                let soft_value: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(a, &p)| p * (q1t[a].min(q2t[a]) - alpha * logp[a]))
                    .sum();
                tr.reward + self.cfg.gamma * soft_value
            };
            targets.push(y);
        }

        // Critic regression toward the targets.
        let mut q_loss = 0.0;
        let mut cache = ForwardCache::default();
        for (q_net, opt) in [
            (&mut self.q1, &mut self.opt_q1),
            (&mut self.q2, &mut self.opt_q2),
        ] {
            let mut grads = GradientBuffer::zeros_like(q_net);
            let mut output_grad = vec![0.0; q_net.output_dim()];
            let mut loss = 0.0;
            for (&i, &y) in batch.iter().zip(&targets) {
                let tr = self.buffer.get(i);
                let q = q_net.forward_into(&tr.state, &mut cache)?;
                let e = q[tr.action] - y;
                loss += 0.5 * e * e;
                output_grad.fill(0.0);
                output_grad[tr.action] = e;
                q_net.backward_into(&cache, &output_grad, &mut grads)?;
            }
            grads.scale(1.0 / n);
            opt.step(q_net, &grads, None)?;
            q_loss += loss / n;
        }
        q_loss /= 2.0;

        // Policy step against the updated critics.
        let mut policy_grads = GradientBuffer::zeros_like(&self.policy);
        let mut policy_loss = 0.0;
        for &i in &batch {
            let tr = self.buffer.get(i);
            let logits = self.policy.forward_into(&tr.state, &mut cache)?.to_vec();
            let probs = softmax(&logits);
            let logp = log_softmax(&logits);
            let q1 = self.q1.output(&tr.state)?;
            let q2 = self.q2.output(&tr.state)?;
            let advantage: Vec<f64> = (0..probs.len())
                .map(|a| alpha * logp[a] - q1[a].min(q2[a]))
                .collect();
            let expected: f64 = probs.iter().zip(&advantage).map(|(p, g)| p * g).sum();
            policy_loss += expected;
            let output_grad: Vec<f64> = probs
                .iter()
                .zip(&advantage)
                .map(|(&p, &g)| p * (g - expected) / n)
                .collect();
            self.policy
                .backward_into(&cache, &output_grad, &mut policy_grads)?;
        }
        let grads = std::mem::replace(&mut policy_grads, GradientBuffer { layers: Vec::new() });
        self.opt_policy.step(&mut self.policy, &grads, None)?;
        policy_loss /= n;

        polyak_into(&mut self.q1_target, &self.q1, self.cfg.tau);
        polyak_into(&mut self.q2_target, &self.q2, self.cfg.tau);
        Ok(Some((policy_loss, q_loss)))
    }
}
