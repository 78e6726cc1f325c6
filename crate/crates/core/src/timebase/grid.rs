use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Instant;

/// Evenly spaced lattice `anchor + k * period` covering `[k_min, k_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGrid {
    pub anchor: f64,
    pub period: f64,
    pub k_min: i64,
    pub k_max: i64,
}

impl SyntheticGrid {
    #[inline]
    pub fn point(&self, k: i64) -> f64 {
        self.anchor + k as f64 * self.period
    }

    /// Largest `k` with `point(k) <= t`, exact under floating point.
    pub fn floor_index(&self, t: f64) -> i64 {
        floor_index(self.anchor, self.period, t)
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.k_max < self.k_min
    }

    /// Grid with a caller-chosen anchor, extended `delta` below the first timestamp.
    pub fn spanning(ts: &[Instant], period: f64, anchor: f64, delta: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid period must be positive, got {period}"
            )));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        let (first, last) = match (ts.first(), ts.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(Error::TooShort { needed: 1, got: 0 }),
        };
        Ok(SyntheticGrid {
            anchor,
            period,
            k_min: floor_index(anchor, period, first - delta),
            k_max: floor_index(anchor, period, last),
        })
    }
}

pub(crate) fn floor_index(anchor: f64, period: f64, t: f64) -> i64 {
    let at = |k: i64| anchor + k as f64 * period;
    let mut k = ((t - anchor) / period).floor() as i64;
    while at(k) > t {
        k -= 1;
    }
    while at(k + 1) <= t {
        k += 1;
    }
    k
}

/// Grid anchored at the mean raw timestamp.
pub fn synthesize_grid(ts: &[Instant], period: f64, delta: f64) -> Result<SyntheticGrid> {
    if ts.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let anchor = ts.iter().sum::<f64>() / ts.len() as f64;
    SyntheticGrid::spanning(ts, period, anchor, delta)
}
