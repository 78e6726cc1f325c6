use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Instant;

/// Mean and population standard deviation of consecutive timestamp differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl GapStats {
    pub fn mean_ms(&self) -> f64 {
        self.mean * 1e3
    }

    pub fn std_ms(&self) -> f64 {
        self.std * 1e3
    }
}

/// Population mean and standard deviation (two-pass).
pub(crate) fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let (sum, n) = xs.clone().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = sum / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt(), n)
}

fn gaps(ts: &[Instant]) -> impl Iterator<Item = f64> + Clone + '_ {
    ts.windows(2).map(|w| w[1] - w[0])
}

pub fn timegap_stats(ts: &[Instant]) -> Result<GapStats> {
    if ts.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: ts.len(),
        });
    }
    let (mean, std, n) = mean_std(gaps(ts));
    Ok(GapStats { mean, std, n })
}

/// Sampling period estimated from the timestep distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestepEstimate {
    /// Mean timestep after outlier exclusion, seconds.
    pub period: f64,
    pub rate: f64,
    pub n_gaps: usize,
    pub n_excluded: usize,
    pub raw_mean: f64,
    pub raw_std: f64,
}

/// Mean timestep after a single pass of `m`-sigma outlier exclusion.
pub fn robust_timestep(ts: &[Instant], m: f64) -> Result<TimestepEstimate> {
    if ts.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: ts.len(),
        });
    }
    if !(m > 0.0) {
        return Err(Error::InvalidConfig(format!("m must be positive, got {m}")));
    }
    let (raw_mean, raw_std, n_gaps) = mean_std(gaps(ts));
    // Gaps of an evenly spaced stream still differ by rounding error; such
    // differences never count as outliers.
    let rounding = 8.0 * f64::EPSILON * ts[0].abs().max(ts[ts.len() - 1].abs());
    let limit = (m * raw_std).max(rounding);
    let kept = gaps(ts).filter(|d| (d - raw_mean).abs() <= limit);
    let (period, _, n_kept) = mean_std(kept);
    if n_kept == 0 {
        return Err(Error::Degenerate(format!(
            "all {n_gaps} timesteps lie beyond {m} standard deviations"
        )));
    }
    if !(period > 0.0) {
        return Err(Error::Degenerate(format!(
            "mean timestep {period} s is not positive"
        )));
    }
    Ok(TimestepEstimate {
        period,
        rate: 1.0 / period,
        n_gaps,
        n_excluded: n_gaps - n_kept,
        raw_mean,
        raw_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_gaps() {
        let s = timegap_stats(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (1.0, 0.0, 3));
    }

    #[test]
    fn two_gap_hand_arithmetic() {
        // gaps 0.010, 0.020
        let s = timegap_stats(&[0.0, 0.010, 0.030]).unwrap();
        assert!((s.mean - 0.015).abs() < 1e-15);
        assert!((s.std - 0.005).abs() < 1e-15);
    }

    #[test]
    fn too_short() {
        assert!(timegap_stats(&[1.0]).is_err());
        assert!(robust_timestep(&[0.0, 1.0], 3.0).is_err());
    }

    #[test]
    fn single_outlier_excluded() {
        // eighteen 10 ms gaps and one 20 ms gap
        let mut ts = vec![0.0];
        for i in 0..19 {
            let d = if i == 9 { 0.020 } else { 0.010 };
            ts.push(ts.last().unwrap() + d);
        }
        // oracle: mu = 0.2/19, sigma^2 = mean(d^2) - mu^2
        let mu: f64 = 0.2 / 19.0;
        let sigma = ((18.0 * 1e-4 + 4e-4) / 19.0 - mu * mu).sqrt();
        assert!((mu * 1e3 - 10.526).abs() < 1e-3);
        assert!((sigma * 1e3 - 2.233).abs() < 1e-3);
        assert!(0.020 - mu > 3.0 * sigma);

        let est = robust_timestep(&ts, 3.0).unwrap();
        assert_eq!(est.n_gaps, 19);
        assert_eq!(est.n_excluded, 1);
        assert!((est.period - 0.010).abs() < 1e-15);
        assert!((est.rate * est.period - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_excludes_nothing() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 1e-3).collect();
        let est = robust_timestep(&ts, 3.0).unwrap();
        assert_eq!(est.n_excluded, 0);
        assert!((est.period - 1e-3).abs() / 1e-3 < 1e-12);
    }

    #[test]
    fn every_gap_excluded_is_degenerate() {
        // two gaps symmetric about the mean sit exactly one sigma away
        let ts = [0.0, 1.0, 3.0];
        assert!(matches!(
            robust_timestep(&ts, 0.5),
            Err(Error::Degenerate(_))
        ));
        assert!(robust_timestep(&ts, 0.0).is_err());
    }

    #[test]
    fn zero_gaps_are_degenerate() {
        assert!(matches!(
            robust_timestep(&[1.0, 1.0, 1.0], 3.0),
            Err(Error::Degenerate(_))
        ));
    }
}
