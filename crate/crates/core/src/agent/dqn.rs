//! Deep Q-learning over the spectrum environments.
//!
//! One Q-network maps the interference observation to a value per action in
//! the unified channel x MCS space. Updates minimize the mean Huber loss
//! between `Q(s, a)` and the one-step bootstrapped target, with an optional
//! per-parameter gate deciding which weights may move.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::nn::{AdamWConfig, AdamWState, GradientBuffer, Mlp, UpdateMask};

/// Hyperparameters for DQN training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnConfig {
    /// Discount factor in (0, 1].
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Multiplicative epsilon decay applied once per epoch.
    pub epsilon_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Hard target-network sync cadence, in gradient steps.
    pub target_sync_interval: usize,
    /// Environment steps between gradient updates.
    pub update_every: usize,
    /// Bootstrapping from a frozen copy can be turned off, in which case
    /// targets come from the online network.
    pub use_target_net: bool,
    pub optimizer: AdamWConfig,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.99,
            batch_size: 64,
            buffer_capacity: 10_000,
            target_sync_interval: 200,
            update_every: 4,
            use_target_net: true,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid_argument("gamma must be in (0, 1]"));
        }
        for (name, eps) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::invalid_argument(format!("{name} must be in [0, 1]")));
            }
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::invalid_argument(
                "buffer capacity must hold at least one batch",
            ));
        }
        if self.update_every == 0 || self.target_sync_interval == 0 {
            return Err(Error::invalid_argument(
                "update and sync cadences must be positive",
            ));
        }
        Ok(())
    }
}

/// Greedy argmax with ties broken toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action choice over the network's Q-outputs.
pub fn select_action_dqn(
    net: &Mlp,
    obs: &[f64],
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<usize> {
    let actions = net.output_dim();
    if epsilon > 0.0 && rng.random_range(0.0..1.0) < epsilon {
        return Ok(rng.random_range(0..actions));
    }
    let q = net.output(obs)?;
    Ok(argmax(&q))
}

/// One-step bootstrapped target: `r` on terminal transitions, otherwise
/// `r + gamma * max_a Q_target(s', a)`.
pub fn dqn_td_target(
    reward: f64,
    next_state: &[f64],
    done: bool,
    target_net: &Mlp,
    gamma: f64,
) -> Result<f64> {
    if done {
        return Ok(reward);
    }
    let q_next = target_net.output(next_state)?;
    Ok(reward + gamma * q_next[argmax(&q_next)])
}

#[inline]
fn huber(e: f64) -> f64 {
    if e.abs() <= 1.0 {
        0.5 * e * e
    } else {
        e.abs() - 0.5
    }
}

#[inline]
fn huber_grad(e: f64) -> f64 {
    e.clamp(-1.0, 1.0)
}

/// DQN learner bundling the online network, its frozen target copy, the
/// optimizer, the replay buffer, and the exploration state.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    net: Mlp,
    target: Mlp,
    optimizer: AdamWState,
    buffer: ReplayBuffer,
    cfg: DqnConfig,
    epsilon: f64,
    grad_steps: u64,
    env_steps: u64,
    rng: ChaCha8Rng,
    grads: GradientBuffer,
}

impl DqnAgent {
    /// Fresh agent with a seeded network.
    pub fn new(
        layer_sizes: &[usize],
        cfg: DqnConfig,
        net_seed: u64,
        explore_seed: u64,
        buffer_seed: u64,
    ) -> Result<DqnAgent> {
        let net = Mlp::new(layer_sizes, net_seed)?;
        Ok(Self::from_network(net, cfg, explore_seed, buffer_seed))
    }

    /// Warm-started agent around an existing network.
    pub fn from_network(
        net: Mlp,
        cfg: DqnConfig,
        explore_seed: u64,
        buffer_seed: u64,
    ) -> DqnAgent {
        let target = net.clone();
        let optimizer = AdamWState::new(&net, cfg.optimizer);
        let grads = GradientBuffer::zeros_like(&net);
        DqnAgent {
            buffer: ReplayBuffer::new(cfg.buffer_capacity, buffer_seed),
            epsilon: cfg.epsilon_start,
            grad_steps: 0,
            env_steps: 0,
            rng: ChaCha8Rng::seed_from_u64(explore_seed),
            net,
            target,
            optimizer,
            cfg,
            grads,
        }
    }

    #[inline]
    pub fn net(&self) -> &Mlp {
        &self.net
    }

    #[inline]
    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    #[inline]
    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    #[inline]
    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    /// Epsilon-greedy choice with the current exploration rate.
    pub fn act_exploring(&mut self, obs: &[f64]) -> Result<usize> {
        select_action_dqn(&self.net, obs, self.epsilon, &mut self.rng)
    }

    /// Greedy choice, no exploration.
    pub fn act_greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(argmax(&self.net.output(obs)?))
    }

    /// Stores a transition and advances the step counter that drives the
    /// update cadence.
    pub fn record(&mut self, transition: Transition) {
        self.buffer.push(transition);
        self.env_steps += 1;
    }

    /// True when the cadence says the next `update` call should really run.
    pub fn update_due(&self) -> bool {
        self.env_steps % self.cfg.update_every as u64 == 0
    }

    /// One gradient update over a sampled batch. Returns the mean Huber
    /// loss, or `None` when the buffer cannot fill a batch yet (reported,
    /// not an error). `mask` gates which parameters may move.
    pub fn update(&mut self, mask: Option<&UpdateMask>) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample_indices(self.cfg.batch_size)?;
        self.grads.reset();
        let mut loss_sum = 0.0;
        let bootstrap = if self.cfg.use_target_net {
            &self.target
        } else {
            &self.net
        };
        let mut cache = crate::nn::ForwardCache::default();
        let mut output_grad = vec![0.0; self.net.output_dim()];
        for &i in &batch {
            let tr = self.buffer.get(i);
            let y = dqn_td_target(tr.reward, &tr.next_state, tr.done, bootstrap, self.cfg.gamma)?;
            let q = self.net.forward_into(&tr.state, &mut cache)?;
            let e = q[tr.action] - y;
            loss_sum += huber(e);
            output_grad.fill(0.0);
            output_grad[tr.action] = huber_grad(e);
            self.net
                .backward_into(&cache, &output_grad, &mut self.grads)?;
        }
        let batch_len = batch.len() as f64;
        self.grads.scale(1.0 / batch_len);
        // Borrow dance: step needs &mut net plus the shared grads.
        let grads = std::mem::replace(&mut self.grads, GradientBuffer { layers: Vec::new() });
        let step_result = self.optimizer.step(&mut self.net, &grads, mask);
        self.grads = grads;
        step_result?;

        self.grad_steps += 1;
        if self.cfg.use_target_net && self.grad_steps % self.cfg.target_sync_interval as u64 == 0 {
            self.target = self.net.clone();
        }
        Ok(Some(loss_sum / batch_len))
    }

    /// Per-epoch epsilon schedule.
    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.cfg.epsilon_decay).max(self.cfg.epsilon_end);
    }

    /// Forces the target network to match the online one.
    pub fn sync_target(&mut self) {
        self.target = self.net.clone();
    }
}
