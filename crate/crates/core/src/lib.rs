//! Continual deep-RL anti-jamming laboratory.
//!
//! Agents learn to pick interference-free channels and modulation schemes
//! against cyclic jammer patterns, and a parameter-isolation layer keeps
//! earlier policies intact when the jammer's behavior changes. The crate is
//! organized as:
//!
//! - [`nn`] — minimal dense network engine (forward, exact backprop, AdamW)
//!   with per-weight update gating.
//! - [`packnet`] — task-ownership masks, one-shot magnitude pruning, masked
//!   retraining, and task-conditioned inference views.
//! - [`env`] — deterministic discrete-time spectrum simulator with built-in
//!   jammer patterns and the interference/MCS reward table.
//! - [`agent`] — DQN and discrete soft actor-critic learners.
//! - [`harness`] — scenario orchestration, baselines, multi-seed
//!   aggregation, and CSV persistence.
//! - [`verify`] — fast self-contained oracle suite (used by the CLI's
//!   `verify` command and by tests).

pub mod agent;
pub mod env;
pub mod error;
pub mod fsio;
pub mod nn;
pub mod packnet;
pub mod verify;

pub use error::{Error, Result};
