//! Prioritization task buffer.
//!
//! Each meta-iteration the buffer receives every training task together with
//! its post-adaptation validation return. At the start of the next iteration
//! `L` of those tasks are served back according to a [`Strategy`], after
//! which the buffer is emptied. Returns are "higher is better", so EASY
//! tasks are the highest-return ones.
//!
//! The geometric sandbox and the RL engines both go through this module.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    Easy,
    Hard,
    #[default]
    Medium,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Uniform,
        Strategy::Easy,
        Strategy::Hard,
        Strategy::Medium,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Easy => "easy",
            Strategy::Hard => "hard",
            Strategy::Medium => "medium",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtbEntry {
    pub task: Task,
    pub val_return: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TaskBuffer {
    entries: Vec<PtbEntry>,
    stored: bool,
}

impl TaskBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PtbEntry] {
        &self.entries
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.stored = false;
    }

    /// Stores one iteration's entries. The buffer must have been cleared
    /// since the previous store.
    pub fn store(&mut self, entries: Vec<PtbEntry>) -> Result<()> {
        if self.stored {
            return Err(Error::BufferNotCleared);
        }
        if let Some(e) = entries.iter().find(|e| !e.val_return.is_finite()) {
            return Err(Error::non_finite("buffer validation return", e.val_return));
        }
        self.entries = entries;
        self.stored = true;
        Ok(())
    }

    /// Indices of the `l` entries chosen by `strategy`.
    ///
    /// * medium: the length-`l` block of the ascending-return order centered
    ///   on index `⌊(n−1)/2⌋`; an even block extends one further to the right.
    /// * easy: the `l` highest returns, best first.
    /// * hard: the `l` lowest returns, worst first.
    /// * uniform: `l` indices without replacement.
    ///
    /// The ascending order keeps stored order among ties; easy walks it
    /// backwards, so easy and hard never share an entry while
    /// `2·l ≤ n`.
    pub fn select_indices<R: Rng + ?Sized>(
        &self,
        l: usize,
        strategy: Strategy,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        let n = self.entries.len();
        if l > n {
            return Err(Error::BufferTooSmall {
                requested: l,
                available: n,
            });
        }
        if l == 0 {
            return Ok(Vec::new());
        }
        let ascending = || {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                self.entries[a]
                    .val_return
                    .total_cmp(&self.entries[b].val_return)
            });
            order
        };
        Ok(match strategy {
            Strategy::Uniform => rand::seq::index::sample(rng, n, l).into_vec(),
            Strategy::Hard => ascending()[..l].to_vec(),
            Strategy::Easy => ascending().into_iter().rev().take(l).collect(),
            Strategy::Medium => {
                let center = (n - 1) / 2;
                let start = center.saturating_sub((l - 1) / 2).min(n - l);
                ascending()[start..start + l].to_vec()
            }
        })
    }

    /// Tasks chosen by `strategy`; see [`TaskBuffer::select_indices`].
    pub fn select<R: Rng + ?Sized>(
        &self,
        l: usize,
        strategy: Strategy,
        rng: &mut R,
    ) -> Result<Vec<Task>> {
        Ok(self
            .select_indices(l, strategy, rng)?
            .into_iter()
            .map(|i| self.entries[i].task.clone())
            .collect())
    }
}

/// Linear growth of the number of buffer-served tasks from 0 to `max_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LSchedule {
    pub max_l: usize,
    pub total_iterations: usize,
}

impl LSchedule {
    /// A schedule that never draws from the buffer.
    pub fn disabled(total_iterations: usize) -> Self {
        LSchedule {
            max_l: 0,
            total_iterations,
        }
    }
}

/// `⌊max_l · iteration / (total − 1)⌋`; iterations past the end are
/// treated as the last one. A one-iteration schedule stays at 0.
pub fn l_at(schedule: &LSchedule, iteration: usize) -> usize {
    if schedule.total_iterations <= 1 {
        return 0;
    }
    let last = schedule.total_iterations - 1;
    let it = iteration.min(last);
    (schedule.max_l as u128 * it as u128 / last as u128) as usize
}
