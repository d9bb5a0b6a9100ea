//! DQN and discrete soft actor-critic learners with optimizer-gate
//! pass-through, plus the shared epoch loop.

pub mod dqn;
pub mod epoch;
pub mod replay;
pub mod sac;

pub use dqn::{argmax, dqn_td_target, select_action_dqn, DqnAgent, DqnConfig};
pub use epoch::{run_epoch, EpochRecord, FnPolicy, GreedyPolicy, Learner, RunMode};
pub use replay::{ReplayBuffer, Transition};
pub use sac::{entropy, log_softmax, softmax, SacAgent, SacConfig};
