//! Deterministic discrete-time spectrum simulator: jammer patterns, the
//! interference/MCS reward table, collision accounting, and episode
//! termination.

pub mod episode;
pub mod pattern;
pub mod reward;

pub use episode::{
    sweep_dodge_channel, EnvAction, JammingEnv, Observation, RewardMode, StepOutcome,
    COLLISION_LIMIT, COLLISION_WINDOW, DEFAULT_MAX_STEPS,
};
pub use pattern::{
    env1_pattern, env2_pattern, env3_pattern, load_pattern, save_pattern, JammingPattern,
    ALLOWED_LEVELS, CHANNELS,
};
pub use reward::{reward_table_lookup, Mcs, RewardRow, REWARD_RANGE, REWARD_TABLE};
