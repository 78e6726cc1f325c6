//! Sensor signal conditioning: Savitzky-Golay smoothing followed by a
//! zero-phase Butterworth bandpass.

mod butterworth;
mod filtfilt;
mod savgol;

use serde::{Deserialize, Serialize};

pub use butterworth::{design_bandpass, magnitude_response, BandpassConfig, BiquadSection};
pub use filtfilt::{filtfilt, lfilter, pad_len};
pub use savgol::{savgol_coefficients, savgol_smooth, SavGolConfig};

use crate::error::{Error, Result};
use crate::ingest::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedSignal {
    pub timestamps: Vec<Instant>,
    pub smoothed: Vec<f64>,
    /// Bandpass output; frame labels are drawn from here.
    pub filtered: Vec<f64>,
}

impl ProcessedSignal {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

pub fn process_signal(
    values: &[f64],
    timestamps: &[Instant],
    sg: &SavGolConfig,
    bp: &BandpassConfig,
) -> Result<ProcessedSignal> {
    if values.len() != timestamps.len() {
        return Err(Error::Degenerate(format!(
            "{} values for {} timestamps",
            values.len(),
            timestamps.len()
        )));
    }
    let sections = design_bandpass(bp)?;
    let smoothed = savgol_smooth(values, sg)?;
    let filtered = filtfilt(&sections, &smoothed)?;
    Ok(ProcessedSignal {
        timestamps: timestamps.to_vec(),
        smoothed,
        filtered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_and_zero_inputs() {
        let n = 20_000;
        let ts: Vec<f64> = (0..n).map(|i| i as f64 * 1e-3).collect();
        let cfg = (SavGolConfig::default(), BandpassConfig::default());
        let zero = process_signal(&vec![0.0; n], &ts, &cfg.0, &cfg.1).unwrap();
        assert!(zero.filtered.iter().all(|&v| v == 0.0));
        let dc = process_signal(&vec![3.0; n], &ts, &cfg.0, &cfg.1).unwrap();
        let mean = dc.filtered.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3e-3, "{mean}");
    }

    #[test]
    fn length_mismatch() {
        let r = process_signal(
            &[0.0; 10],
            &[0.0; 9],
            &SavGolConfig::default(),
            &BandpassConfig::default(),
        );
        assert!(r.is_err());
    }
}
