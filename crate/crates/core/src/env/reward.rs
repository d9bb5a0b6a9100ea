//! Interference/MCS reward table.
//!
//! Rewards are normalized, scaled spectral efficiency: the cleaner the
//! channel and the more aggressive the modulation it can sustain, the
//! higher the reward; transmitting into heavy interference is penalized.

use std::fmt;

use crate::error::{Error, Result};

/// Modulation and coding scheme choices available to the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mcs {
    Bpsk12,
    Qpsk12,
    Qam16_12,
}

impl Mcs {
    pub const ALL: [Mcs; 3] = [Mcs::Bpsk12, Mcs::Qpsk12, Mcs::Qam16_12];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Mcs::Bpsk12 => 0,
            Mcs::Qpsk12 => 1,
            Mcs::Qam16_12 => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Mcs> {
        Mcs::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid_argument(format!("MCS index {i} out of range")))
    }
}

impl fmt::Display for Mcs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mcs::Bpsk12 => "BPSK-1/2",
            Mcs::Qpsk12 => "QPSK-1/2",
            Mcs::Qam16_12 => "16QAM-1/2",
        };
        f.write_str(name)
    }
}

/// One reward-table row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRow {
    pub interference: f64,
    pub mcs: Mcs,
    pub sinr_db: f64,
    /// Spectral efficiency in bits/s/Hz.
    pub se: f64,
    pub reward: f64,
}

const fn row(interference: f64, mcs: Mcs, sinr_db: f64, se: f64, reward: f64) -> RewardRow {
    RewardRow {
        interference,
        mcs,
        sinr_db,
        se,
        reward,
    }
}

/// All 18 combinations of interference level and MCS.
pub static REWARD_TABLE: [RewardRow; 18] = [
    row(0.000, Mcs::Bpsk12, 12.0, 0.5, 0.1),
    row(0.000, Mcs::Qpsk12, 12.0, 1.0, 1.0),
    row(0.000, Mcs::Qam16_12, 12.0, 1.5, 2.0),
    row(0.125, Mcs::Bpsk12, 10.0, 0.5, 0.1),
    row(0.125, Mcs::Qpsk12, 10.0, 1.0, 0.6),
    row(0.125, Mcs::Qam16_12, 10.0, 1.5, 1.0),
    row(0.250, Mcs::Bpsk12, 7.0, 0.5, 0.1),
    row(0.250, Mcs::Qpsk12, 7.0, 0.7, 0.4),
    row(0.250, Mcs::Qam16_12, 7.0, 1.0, 0.2),
    row(0.375, Mcs::Bpsk12, 6.0, 0.3, -0.4),
    row(0.375, Mcs::Qpsk12, 6.0, 0.6, -0.1),
    row(0.375, Mcs::Qam16_12, 6.0, 0.7, -0.2),
    row(0.500, Mcs::Bpsk12, 4.0, 0.2, -0.8),
    row(0.500, Mcs::Qpsk12, 4.0, 0.3, -1.0),
    row(0.500, Mcs::Qam16_12, 4.0, 0.0, -1.0),
    row(1.000, Mcs::Bpsk12, 0.0, 0.0, -1.6),
    row(1.000, Mcs::Qpsk12, 0.0, 0.0, -1.8),
    row(1.000, Mcs::Qam16_12, 0.0, 0.0, -2.0),
];

/// Most negative and most positive rewards in the table.
pub const REWARD_RANGE: (f64, f64) = (-2.0, 2.0);

/// Exact row for `(interference, mcs)`. Interference levels are exact
/// binary fractions, so float equality is the intended comparison.
pub fn reward_table_lookup(interference: f64, mcs: Mcs) -> Result<&'static RewardRow> {
    REWARD_TABLE
        .iter()
        .find(|r| r.interference == interference && r.mcs == mcs)
        .ok_or_else(|| {
            Error::invalid_argument(format!(
                "no reward-table row for interference {interference} with {mcs}"
            ))
        })
}
