//! Experiment windows and the seed-shared sequence of measurement times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SettingVector, Tick, TICKS_PER_UNIT};

/// Default window length: one time unit.
pub const DEFAULT_WINDOW_TICKS: u64 = TICKS_PER_UNIT;

/// Default switch gap between windows: 1/8 time unit.
pub const DEFAULT_GAP_TICKS: u64 = TICKS_PER_UNIT / 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("rounds per window must be at least 1")]
    ZeroRounds,
    #[error("window length must be positive")]
    EmptyWindow,
    #[error("switch gap must be positive")]
    ZeroGap,
    #[error("window index {0} out of range")]
    WindowOutOfRange(usize),
    #[error("round {round} out of range (rounds per window {rounds})")]
    RoundOutOfRange { round: u32, rounds: u32 },
    #[error("schedule windows are malformed: {0}")]
    Malformed(String),
    #[error("schedule overflows the tick range")]
    Overflow,
}

/// splitmix64: add the golden-ratio increment, then apply the 30/27/31 finalizer.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentWindow {
    pub index: usize,
    pub setting: SettingVector,
    pub start: Tick,
    pub end: Tick,
}

impl ExperimentWindow {
    pub fn len_ticks(&self) -> u64 {
        self.end.0 - self.start.0
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct Schedule {
    windows: Vec<ExperimentWindow>,
    rounds_per_window: u32,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    windows: Vec<ExperimentWindow>,
    rounds_per_window: u32,
    seed: u64,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = ScheduleError;

    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        let s = Schedule {
            windows: raw.windows,
            rounds_per_window: raw.rounds_per_window,
            seed: raw.seed,
        };
        s.validate()?;
        Ok(s)
    }
}

impl Schedule {
    /// Four windows of `window_ticks` separated by `gap_ticks`, starting at t = 0.
    pub fn with_timing(
        rounds: u32,
        seed: u64,
        window_ticks: u64,
        gap_ticks: u64,
    ) -> Result<Schedule, ScheduleError> {
        if rounds == 0 {
            return Err(ScheduleError::ZeroRounds);
        }
        if window_ticks == 0 {
            return Err(ScheduleError::EmptyWindow);
        }
        if gap_ticks == 0 {
            return Err(ScheduleError::ZeroGap);
        }
        let stride = window_ticks
            .checked_add(gap_ticks)
            .ok_or(ScheduleError::Overflow)?;
        let mut windows = Vec::with_capacity(4);
        for (index, setting) in SettingVector::STANDARD_ORDER.into_iter().enumerate() {
            let start = stride
                .checked_mul(index as u64)
                .ok_or(ScheduleError::Overflow)?;
            let end = start
                .checked_add(window_ticks)
                .ok_or(ScheduleError::Overflow)?;
            windows.push(ExperimentWindow {
                index,
                setting,
                start: Tick(start),
                end: Tick(end),
            });
        }
        Ok(Schedule {
            windows,
            rounds_per_window: rounds,
            seed,
        })
    }

    fn validate(&self) -> Result<(), ScheduleError> {
        let bad = |m: &str| Err(ScheduleError::Malformed(m.to_string()));
        if self.rounds_per_window == 0 {
            return Err(ScheduleError::ZeroRounds);
        }
        if self.windows.len() != SettingVector::STANDARD_ORDER.len() {
            return bad("expected exactly four windows");
        }
        for (i, (w, setting)) in self
            .windows
            .iter()
            .zip(SettingVector::STANDARD_ORDER)
            .enumerate()
        {
            if w.index != i {
                return bad("window indices must be 0..3 in order");
            }
            if w.setting != setting {
                return bad("window settings must run yyx, yxy, xyy, xxx");
            }
            if w.start >= w.end {
                return bad("window start must precede its end");
            }
        }
        if self.windows.windows(2).any(|p| p[0].end >= p[1].start) {
            return bad("consecutive windows need a positive switch gap");
        }
        Ok(())
    }

    pub fn windows(&self) -> &[ExperimentWindow] {
        &self.windows
    }

    pub fn window(&self, index: usize) -> Result<&ExperimentWindow, ScheduleError> {
        self.windows
            .get(index)
            .ok_or(ScheduleError::WindowOutOfRange(index))
    }

    pub fn rounds_per_window(&self) -> u32 {
        self.rounds_per_window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_rounds(&self) -> u64 {
        self.rounds_per_window as u64 * self.windows.len() as u64
    }

    /// Common measurement time of round `round` in window `window_index`.
    ///
    /// Every station evaluates this independently and obtains the same tick.
    pub fn measurement_tick(&self, window_index: usize, round: u32) -> Result<Tick, ScheduleError> {
        let window = self.window(window_index)?;
        if round >= self.rounds_per_window {
            return Err(ScheduleError::RoundOutOfRange {
                round,
                rounds: self.rounds_per_window,
            });
        }
        let key = ((window_index as u64) << 32) | round as u64;
        let offset = mix64(self.seed ^ key) % window.len_ticks();
        Ok(Tick(window.start.0 + offset))
    }

    /// Window containing `t`, or `None` inside a switch gap or past the end.
    pub fn window_for_tick(&self, t: Tick) -> Option<usize> {
        self.windows.iter().position(|w| w.contains(t))
    }

    /// All `(window, round, tick)` triples in transmission order.
    pub fn ticks(&self) -> impl Iterator<Item = (usize, u32, Tick)> + '_ {
        (0..self.windows.len()).flat_map(move |w| {
            (0..self.rounds_per_window).map(move |n| {
                let t = self
                    .measurement_tick(w, n)
                    .expect("indices come from the schedule's own ranges");
                (w, n, t)
            })
        })
    }
}

/// Windows of one unit separated by 1/8-unit gaps.
pub fn build_default_schedule(rounds: u32, seed: u64) -> Result<Schedule, ScheduleError> {
    Schedule::with_timing(rounds, seed, DEFAULT_WINDOW_TICKS, DEFAULT_GAP_TICKS)
}
