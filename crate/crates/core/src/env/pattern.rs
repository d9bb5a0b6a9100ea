//! Cyclic jammer patterns.
//!
//! A pattern is a `period x channels` matrix of interference levels; the
//! jammer repeats it forever. Three patterns ship built in: a linear sweep
//! (`env1`), a non-uniform multi-channel pattern (`env2`), and their
//! temporal concatenation (`env3`). Custom patterns load from flat text
//! files with the same validation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;

/// Interference levels with a defined reward-table entry.
pub const ALLOWED_LEVELS: [f64; 6] = [0.0, 0.125, 0.25, 0.375, 0.5, 1.0];

/// Channel count used by every shipped scenario.
pub const CHANNELS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct JammingPattern {
    period: usize,
    channels: usize,
    /// Row-major `period x channels` levels.
    levels: Vec<f64>,
}

impl JammingPattern {
    /// Validates that every entry is an allowed interference level.
    pub fn new(channels: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if channels == 0 || rows.is_empty() {
            return Err(Error::invalid_argument(
                "pattern needs at least one channel and one row",
            ));
        }
        let mut levels = Vec::with_capacity(rows.len() * channels);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != channels {
                return Err(Error::invalid_argument(format!(
                    "pattern row {t} has {} entries, expected {channels}",
                    row.len()
                )));
            }
            for &level in row {
                if !ALLOWED_LEVELS.contains(&level) {
                    return Err(Error::invalid_argument(format!(
                        "pattern row {t} holds level {level}, outside the reward table domain"
                    )));
                }
            }
            levels.extend_from_slice(row);
        }
        Ok(JammingPattern {
            period: rows.len(),
            channels,
            levels,
        })
    }

    #[inline]
    pub fn period(&self) -> usize {
        self.period
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Interference row for slot `t`; the pattern cycles with its period.
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        let r = t % self.period;
        &self.levels[r * self.channels..(r + 1) * self.channels]
    }
}

/// Linear sweep: each slot jams exactly one channel at full power, cycling
/// through all four channels.
pub fn env1_pattern() -> JammingPattern {
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|t| (0..4).map(|c| if c == t { 1.0 } else { 0.0 }).collect())
        .collect();
    JammingPattern::new(CHANNELS, &rows).expect("built-in pattern is valid")
}

/// Non-uniform power over several channels, period 10.
pub fn env2_pattern() -> JammingPattern {
    let rows: Vec<Vec<f64>> = vec![
        vec![0.500, 0.125, 0.250, 0.000],
        vec![0.250, 0.000, 0.500, 0.375],
        vec![0.125, 0.375, 0.000, 0.500],
        vec![0.375, 0.000, 0.500, 0.250],
        vec![0.125, 0.375, 0.500, 0.250],
        vec![0.250, 0.500, 0.125, 0.000],
        vec![0.250, 0.375, 0.500, 0.000],
        vec![0.375, 0.250, 0.125, 0.500],
        vec![0.000, 0.125, 0.375, 0.500],
        vec![0.000, 0.250, 0.125, 0.375],
    ];
    JammingPattern::new(CHANNELS, &rows).expect("built-in pattern is valid")
}

/// Merged behavior: the four sweep rows followed by the ten `env2` rows,
/// period 14. Concatenation keeps both source behaviors verbatim and every
/// level inside the reward-table domain.
pub fn env3_pattern() -> JammingPattern {
    let e1 = env1_pattern();
    let e2 = env2_pattern();
    let rows: Vec<Vec<f64>> = (0..e1.period())
        .map(|t| e1.row(t).to_vec())
        .chain((0..e2.period()).map(|t| e2.row(t).to_vec()))
        .collect();
    JammingPattern::new(CHANNELS, &rows).expect("built-in pattern is valid")
}

/// Writes a pattern as flat text: one `period channels` line, then one line
/// of levels per slot. `#` starts a comment.
pub fn save_pattern(pattern: &JammingPattern, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "# jammer pattern: {} slots x {} channels", pattern.period(), pattern.channels());
    let _ = writeln!(out, "{} {}", pattern.period(), pattern.channels());
    for t in 0..pattern.period() {
        let row: Vec<String> = pattern.row(t).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    fsio::atomic_write(path, &out)
}

pub fn load_pattern(path: &Path) -> Result<JammingPattern> {
    let text = fsio::read_text(path)?;
    let loc = path.display().to_string();
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let head = lines
        .next()
        .ok_or_else(|| Error::parse(&loc, "empty pattern file"))?;
    let mut parts = head.split_whitespace();
    let period: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| Error::parse(&loc, "bad period"))?;
    let channels: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| Error::parse(&loc, "bad channel count"))?;

    let mut rows = Vec::with_capacity(period);
    for t in 0..period {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(&loc, format!("missing row {t}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(&loc, format!("bad level {p:?} in row {t}")))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if lines.next().is_some() {
        return Err(Error::parse(&loc, "trailing rows beyond the declared period"));
    }
    JammingPattern::new(channels, &rows).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::parse(&loc, msg),
        other => other,
    })
}
