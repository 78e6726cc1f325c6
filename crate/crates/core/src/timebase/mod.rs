//! Timestamp de-jittering.
//!
//! Raw timestamps are late by a nonnegative, random delay. The stream is mapped
//! onto an evenly spaced synthetic grid: every raw timestamp takes the highest
//! free grid point not later than itself, walking from the end of the stream to
//! the start. Grid points left over between the first and last allocation are
//! dropped samples.

mod alloc;
mod grid;
mod refine;
mod stats;

use serde::{Deserialize, Serialize};

pub use alloc::{allocate, detect_drops, DejitterMapping, DropReport};
pub use grid::{synthesize_grid, SyntheticGrid};
pub use refine::{refine_period, PeriodFit};
pub use stats::{robust_timestep, timegap_stats, GapStats, TimestepEstimate};

use crate::error::{Error, Result};
use crate::ingest::{Instant, StreamOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DejitterConfig {
    /// Outlier threshold for the timestep estimate, in standard deviations.
    pub m: f64,
    /// Grid extension below the first timestamp, seconds.
    pub delta: f64,
    /// Refine period and grid phase by epoch folding before allocating.
    pub refine: bool,
}

impl Default for DejitterConfig {
    fn default() -> Self {
        DejitterConfig {
            m: 3.0,
            delta: 0.100,
            refine: true,
        }
    }
}

impl DejitterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "m must be positive, got {}",
                self.m
            )));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DejitterResult {
    pub estimate: TimestepEstimate,
    /// Grid spacing actually used (the refined period when `refined` is set).
    pub period: f64,
    pub refined: Option<PeriodFit>,
    pub grid: SyntheticGrid,
    pub mapping: DejitterMapping,
    pub corrected: Vec<Instant>,
    pub drops: DropReport,
    pub gaps_before: GapStats,
    pub gaps_after: GapStats,
}

impl DejitterResult {
    /// Mean corrected gap per grid step, i.e. with dropped slots counted.
    pub fn drop_adjusted_mean(&self) -> f64 {
        let a = &self.mapping.alloc;
        let n = self.corrected.len();
        let steps = (a[n - 1] - a[0]) as f64;
        (self.corrected[n - 1] - self.corrected[0]) / steps
    }

    pub fn dropped_times(&self) -> impl Iterator<Item = Instant> + '_ {
        self.drops.dropped_k.iter().map(|&k| self.grid.point(k))
    }

    pub fn report(&self, cfg: &DejitterConfig, origin: StreamOrigin) -> DejitterReport {
        DejitterReport {
            t_s: self.period,
            rate_hz: 1.0 / self.period,
            n_excluded: self.estimate.n_excluded,
            delta_s: cfg.delta,
            drops: self
                .dropped_times()
                .map(|t| origin.to_absolute_us(t))
                .collect(),
            gaps_before: self.gaps_before.into(),
            gaps_after: self.gaps_after.into(),
            t_robust_s: self.estimate.period,
            refined: self.refined.is_some(),
            n_drops: self.drops.count,
            drop_adjusted_mean_ms: self.drop_adjusted_mean() * 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl From<GapStats> for GapSummary {
    fn from(g: GapStats) -> Self {
        GapSummary {
            mean_ms: g.mean_ms(),
            std_ms: g.std_ms(),
        }
    }
}

/// JSON form of a de-jitter run. Drop times are absolute microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DejitterReport {
    #[serde(rename = "T_s")]
    pub t_s: f64,
    pub rate_hz: f64,
    pub n_excluded: usize,
    pub delta_s: f64,
    pub drops: Vec<i64>,
    pub gaps_before: GapSummary,
    pub gaps_after: GapSummary,
    #[serde(rename = "T_robust_s")]
    pub t_robust_s: f64,
    pub refined: bool,
    pub n_drops: usize,
    pub drop_adjusted_mean_ms: f64,
}

/// The mean anchor is lowered by this fraction of a period. Rounding in the
/// mean and the period would otherwise be enough to put a sample that lies
/// exactly on the lattice one ulp below its grid point.
const ANCHOR_GUARD: f64 = 1e-9;

pub fn dejitter(ts: &[Instant], cfg: &DejitterConfig) -> Result<DejitterResult> {
    cfg.validate()?;
    let estimate = robust_timestep(ts, cfg.m)?;
    let refined = if cfg.refine {
        refine_period(ts, estimate.period)
    } else {
        None
    };
    let grid = match refined {
        Some(fit) => SyntheticGrid::spanning(ts, fit.period, fit.anchor, cfg.delta)?,
        None => {
            let g = synthesize_grid(ts, estimate.period, cfg.delta)?;
            SyntheticGrid::spanning(ts, g.period, g.anchor - ANCHOR_GUARD * g.period, cfg.delta)?
        }
    };
    let mapping = allocate(ts, &grid)?;
    let corrected: Vec<Instant> = mapping.alloc.iter().map(|&k| grid.point(k)).collect();
    let drops = detect_drops(&mapping);
    Ok(DejitterResult {
        estimate,
        period: grid.period,
        refined,
        gaps_before: timegap_stats(ts)?,
        gaps_after: timegap_stats(&corrected)?,
        grid,
        mapping,
        corrected,
        drops,
    })
}
