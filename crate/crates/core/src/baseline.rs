//! Kalman-filter timestamp correction, used as a comparison baseline.
//!
//! State is `(t, T)`: the time of the current event and the sampling period.
//! Each step predicts `t + T` and corrects it with the raw timestamp.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_atomic, Instant};
use crate::timebase::{dejitter, robust_timestep, timegap_stats, DejitterConfig, GapStats};

/// Noise parameters, in seconds squared. Unset fields are derived from the input:
/// `q_t = (0.1 T)^2`, `q_period = (0.001 T)^2`, `r` = raw gap variance, and the
/// initial period is the outlier-trimmed mean timestep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    pub q_t: Option<f64>,
    pub q_period: Option<f64>,
    pub r: Option<f64>,
    pub initial_period: Option<f64>,
}

/// Minimum spacing forced between consecutive outputs, seconds.
const MONOTONE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Resolved {
    q_t: f64,
    q_period: f64,
    r: f64,
    period: f64,
}

impl KalmanConfig {
    fn resolve(&self, ts: &[Instant]) -> Result<Resolved> {
        let period = match self.initial_period {
            Some(p) => p,
            None => robust_timestep(ts, 3.0)?.period,
        };
        let gaps = timegap_stats(ts)?;
        let r = self
            .r
            .unwrap_or_else(|| (gaps.std * gaps.std).max((1e-6 * period).powi(2)));
        let c = Resolved {
            q_t: self.q_t.unwrap_or((0.1 * period).powi(2)),
            q_period: self.q_period.unwrap_or((0.001 * period).powi(2)),
            r,
            period,
        };
        for (name, v) in [
            ("q_t", c.q_t),
            ("q_period", c.q_period),
            ("r", c.r),
            ("initial period", c.period),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(c)
    }
}

pub fn kalman_correct(ts: &[Instant], cfg: &KalmanConfig) -> Result<Vec<Instant>> {
    if ts.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: ts.len(),
        });
    }
    let c = cfg.resolve(ts)?;
    let (mut t, mut per) = (ts[0], c.period);
    let mut p = [[c.r, 0.0], [0.0, (0.01 * c.period).powi(2)]];
    let mut out = Vec::with_capacity(ts.len());
    out.push(t);
    for (k, &z) in ts.iter().enumerate().skip(1) {
        // predict with F = [[1, 1], [0, 1]]
        t += per;
        let p00 = p[0][0] + 2.0 * p[0][1] + p[1][1] + c.q_t;
        let p01 = p[0][1] + p[1][1];
        let p11 = p[1][1] + c.q_period;
        // update with H = [1, 0]
        let s = p00 + c.r;
        let (k0, k1) = (p00 / s, p01 / s);
        let innov = z - t;
        t += k0 * innov;
        per += k1 * innov;
        p = [
            [(1.0 - k0) * p00, (1.0 - k0) * p01],
            [(1.0 - k0) * p01, p11 - k1 * p01],
        ];
        if !(t.is_finite() && per.is_finite() && p[0][0].is_finite() && p[1][1].is_finite()) {
            return Err(Error::Divergence { step: k });
        }
        let prev = *out.last().unwrap();
        out.push(t.max(prev + MONOTONE_EPS));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub raw: GapStats,
    pub kalman: GapStats,
    pub dejitter: GapStats,
    /// Evenly spaced samples at the de-jitter period: mean `T`, std 0.
    pub theoretical: GapStats,
}

impl ComparisonReport {
    pub fn rows(&self) -> [(&'static str, GapStats); 4] {
        [
            ("raw", self.raw),
            ("kalman", self.kalman),
            ("dejitter", self.dejitter),
            ("theoretical", self.theoretical),
        ]
    }

    /// `method,mean_ms,std_ms`, three decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,mean_ms,std_ms\n");
        for (name, g) in self.rows() {
            s.push_str(&format!("{name},{:.3},{:.3}\n", g.mean_ms(), g.std_ms()));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let body = self.to_csv();
        let p = path.as_ref().to_path_buf();
        write_atomic(path, move |w| {
            w.write_all(body.as_bytes()).map_err(|e| Error::io(p, e))
        })
    }
}

pub fn compare_methods(
    ts: &[Instant],
    dejitter_cfg: &DejitterConfig,
    kalman_cfg: &KalmanConfig,
) -> Result<ComparisonReport> {
    let raw = timegap_stats(ts)?;
    let kalman = timegap_stats(&kalman_correct(ts, kalman_cfg)?)?;
    let dj = dejitter(ts, dejitter_cfg)?;
    Ok(ComparisonReport {
        raw,
        kalman,
        dejitter: dj.gaps_after,
        theoretical: GapStats {
            mean: dj.period,
            std: 0.0,
            n: raw.n,
        },
    })
}
