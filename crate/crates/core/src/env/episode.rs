//! Discrete-time episode engine over a jammer pattern.
//!
//! A step works on next-slot semantics: the agent observes the current
//! interference row and picks the channel (and MCS) for the **next** slot;
//! the reward comes from the jammer's interference on that channel once the
//! slot arrives. An episode ends after three collisions within the last ten
//! slots, or when the step budget runs out.

use std::collections::VecDeque;

use crate::env::pattern::JammingPattern;
use crate::env::reward::{reward_table_lookup, Mcs};
use crate::error::{Error, Result};

/// Collisions tolerated inside the sliding window before game over.
pub const COLLISION_LIMIT: usize = 3;
/// Length of the sliding collision window, in slots.
pub const COLLISION_WINDOW: usize = 10;
/// Default step budget per episode.
pub const DEFAULT_MAX_STEPS: usize = 100;

/// Interference levels of every channel at the current slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub levels: Vec<f64>,
}

/// Channel plus modulation choice for the next slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvAction {
    pub channel: usize,
    pub mcs: Mcs,
}

impl EnvAction {
    /// Flat index in the unified `channels x 3` action space.
    #[inline]
    pub fn to_index(self) -> usize {
        self.channel * Mcs::ALL.len() + self.mcs.index()
    }

    pub fn from_index(index: usize, channels: usize) -> Result<EnvAction> {
        let n = Mcs::ALL.len();
        if index >= channels * n {
            return Err(Error::invalid_argument(format!(
                "action index {index} out of range for {channels} channels"
            )));
        }
        Ok(EnvAction {
            channel: index / n,
            mcs: Mcs::from_index(index % n)?,
        })
    }
}

/// How a step converts interference into reward and collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// +1 for an interference-free slot, -1 for hitting the jammer; a
    /// collision is full-power interference only. The MCS choice is ignored.
    BinarySafe,
    /// Reward from the interference/MCS table; anything above the 0.25
    /// level counts as a collision.
    SpectralEfficiency,
}

/// What `step` returns.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub collision: bool,
    pub done: bool,
}

/// Single-owner episode state over one pattern.
#[derive(Debug, Clone)]
pub struct JammingEnv {
    pattern: JammingPattern,
    mode: RewardMode,
    max_steps: usize,
    phase: usize,
    t: usize,
    window: VecDeque<bool>,
    collisions: usize,
    done: bool,
    started: bool,
}

impl JammingEnv {
    pub fn new(pattern: JammingPattern, mode: RewardMode, max_steps: usize) -> JammingEnv {
        JammingEnv {
            pattern,
            mode,
            max_steps,
            phase: 0,
            t: 0,
            window: VecDeque::with_capacity(COLLISION_WINDOW),
            collisions: 0,
            done: false,
            started: false,
        }
    }

    #[inline]
    pub fn pattern(&self) -> &JammingPattern {
        &self.pattern
    }

    #[inline]
    pub fn mode(&self) -> RewardMode {
        self.mode
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.pattern.channels()
    }

    #[inline]
    pub fn action_count(&self) -> usize {
        self.pattern.channels() * Mcs::ALL.len()
    }

    #[inline]
    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    /// Steps taken since the last reset.
    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn done(&self) -> bool {
        self.done
    }

    /// Collisions recorded since the last reset.
    #[inline]
    pub fn episode_collisions(&self) -> usize {
        self.collisions
    }

    /// Starts a new episode with slot 0 mapped to `start_phase` in the
    /// pattern, and returns the first observation.
    pub fn reset(&mut self, start_phase: usize) -> Observation {
        self.phase = start_phase % self.pattern.period();
        self.t = 0;
        self.window.clear();
        self.collisions = 0;
        self.done = false;
        self.started = true;
        self.current_observation()
    }

    fn current_observation(&self) -> Observation {
        Observation {
            levels: self.pattern.row(self.phase + self.t).to_vec(),
        }
    }

    /// Applies `action` to the next slot and advances to it.
    pub fn step(&mut self, action: EnvAction) -> Result<StepOutcome> {
        if !self.started {
            return Err(Error::invalid_state("step before reset"));
        }
        if self.done {
            return Err(Error::invalid_state("step after episode end"));
        }
        if action.channel >= self.pattern.channels() {
            return Err(Error::invalid_argument(format!(
                "channel {} out of range for {} channels",
                action.channel,
                self.pattern.channels()
            )));
        }

        self.t += 1;
        let interference = self.pattern.row(self.phase + self.t)[action.channel];
        let (reward, collision) = match self.mode {
            RewardMode::BinarySafe => {
                let hit = interference == 1.0;
                (if hit { -1.0 } else { 1.0 }, hit)
            }
            RewardMode::SpectralEfficiency => {
                let row = reward_table_lookup(interference, action.mcs)?;
                (row.reward, interference > 0.25)
            }
        };

        if self.window.len() == COLLISION_WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(collision);
        if collision {
            self.collisions += 1;
        }
        let in_window = self.window.iter().filter(|&&c| c).count();
        if in_window >= COLLISION_LIMIT || self.t >= self.max_steps {
            self.done = true;
        }

        Ok(StepOutcome {
            obs: self.current_observation(),
            reward,
            collision,
            done: self.done,
        })
    }
}

/// Analytic best response to the sweep pattern: the jammer sits on channel
/// `j` now and will move to `j + 1`, so `j + 2` is always free next slot.
pub fn sweep_dodge_channel(obs: &Observation) -> Option<usize> {
    let jammed = obs.levels.iter().position(|&l| l == 1.0)?;
    Some((jammed + 2) % obs.levels.len())
}
