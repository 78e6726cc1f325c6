//! Synthetic streams with known ground truth.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`) seeded with the model's
//! `seed` through `SeedableRng::seed_from_u64`, so a seed reproduces the same
//! stream on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Instant;

/// Capture-to-timestamp delay distribution. All delays are nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    /// `|N(0, sigma^2)|`.
    HalfNormal { sigma: f64 },
    /// Uniform on `[0, max]`.
    Uniform { max: f64 },
    /// Samples are buffered and timestamped together when a packet of
    /// `samples_per_packet` is complete, plus a half-normal transport delay
    /// per packet. This is how USB / Bluetooth biosignal front ends behave.
    Packetized {
        samples_per_packet: usize,
        transport_sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterModel {
    /// True sampling period, seconds.
    pub period: f64,
    pub delay: DelayModel,
    pub drop_rate: f64,
    pub seed: u64,
}

/// Population std of the difference of two independent half-normal variables,
/// per unit `sigma`.
fn half_normal_gap_std_factor() -> f64 {
    (2.0 * (1.0 - 2.0 / std::f64::consts::PI)).sqrt()
}

impl JitterModel {
    /// Half-normal delays sized so consecutive raw gaps have roughly `gap_std`
    /// standard deviation (before the ordering constraint and drops).
    pub fn half_normal_for_gap_std(period: f64, gap_std: f64, drop_rate: f64, seed: u64) -> Self {
        JitterModel {
            period,
            delay: DelayModel::HalfNormal {
                sigma: gap_std / half_normal_gap_std_factor(),
            },
            drop_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::InvalidConfig(format!(
                "drop rate must lie in [0, 1), got {}",
                self.drop_rate
            )));
        }
        let ok = match self.delay {
            DelayModel::HalfNormal { sigma } => sigma >= 0.0 && sigma.is_finite(),
            DelayModel::Uniform { max } => max >= 0.0 && max.is_finite(),
            DelayModel::Packetized {
                samples_per_packet,
                transport_sigma,
            } => samples_per_packet >= 1 && transport_sigma >= 0.0 && transport_sigma.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "invalid delay model {:?}",
                self.delay
            )));
        }
        Ok(())
    }
}

/// Ground truth for a generated stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Ideal capture time of every emitted sample.
    pub event_times: Vec<Instant>,
    /// Ideal slot numbers that were dropped.
    pub dropped_indices: Vec<usize>,
    /// Ideal slot number of every emitted sample.
    pub emitted_indices: Vec<usize>,
}

fn half_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma)
        .expect("validated sigma")
        .sample(rng)
        .abs()
}

/// Raw timestamps for `n_ideal` slots `k * period`.
///
/// A timestamp is never earlier than the one before it: a sample cannot be
/// stamped before a sample captured earlier has been stamped, so each raw time
/// is `max(event + delay, previous raw)`. Delays therefore stay nonnegative.
pub fn gen_timestamps(n_ideal: usize, model: &JitterModel) -> Result<(Vec<Instant>, SynthTruth)> {
    if n_ideal < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: n_ideal,
        });
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);

    let mut delays = vec![0.0; n_ideal];
    match model.delay {
        DelayModel::HalfNormal { sigma } => {
            delays.iter_mut().for_each(|d| *d = half_normal(&mut rng, sigma));
        }
        DelayModel::Uniform { max } => {
            delays.iter_mut().for_each(|d| *d = rng.random::<f64>() * max);
        }
        DelayModel::Packetized {
            samples_per_packet: k,
            transport_sigma,
        } => {
            for (p, chunk) in delays.chunks_mut(k).enumerate() {
                let transport = half_normal(&mut rng, transport_sigma);
                // a trailing partial packet is flushed with its last sample
                let ready = ((p * k + chunk.len() - 1) as f64) * model.period;
                for (j, d) in chunk.iter_mut().enumerate() {
                    *d = ready - ((p * k + j) as f64) * model.period + transport;
                }
            }
        }
    }

    let mut raw = Vec::with_capacity(n_ideal);
    let mut truth = SynthTruth {
        event_times: Vec::with_capacity(n_ideal),
        dropped_indices: Vec::new(),
        emitted_indices: Vec::with_capacity(n_ideal),
    };
    let mut last = f64::NEG_INFINITY;
    for (k, &d) in delays.iter().enumerate() {
        if model.drop_rate > 0.0 && rng.random::<f64>() < model.drop_rate {
            truth.dropped_indices.push(k);
            continue;
        }
        let event = k as f64 * model.period;
        last = (event + d).max(last);
        raw.push(last);
        truth.event_times.push(event);
        truth.emitted_indices.push(k);
    }
    if raw.len() < 2 {
        return Err(Error::Degenerate(format!(
            "only {} of {n_ideal} samples survived dropping",
            raw.len()
        )));
    }
    Ok((raw, truth))
}

/// Amplitudes of the fundamental and its harmonics.
const HARMONICS: [f64; 3] = [1.0, 0.5, 0.25];

/// Pulse-like waveform `sum_h a_h cos(2 pi h f0 t)` at `hr_bpm / 60` Hz plus
/// white Gaussian noise, sampled at `fs` for `duration` seconds.
pub fn gen_pulse_signal(
    duration: f64,
    fs: f64,
    hr_bpm: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(fs > 0.0) || !fs.is_finite() || !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "need positive fs and duration, got fs={fs} duration={duration}"
        )));
    }
    if !(hr_bpm > 0.0) || !(noise_std >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need positive heart rate and nonnegative noise, got {hr_bpm} bpm, noise {noise_std}"
        )));
    }
    let n = (duration * fs).round() as usize;
    Ok(pulse_at(
        &(0..n).map(|i| i as f64 / fs).collect::<Vec<_>>(),
        hr_bpm,
        noise_std,
        seed,
    ))
}

/// Same waveform evaluated at arbitrary sample times.
pub fn pulse_at(times: &[Instant], hr_bpm: f64, noise_std: f64, seed: u64) -> Vec<f64> {
    let f0 = hr_bpm / 60.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std).ok();
    times
        .iter()
        .map(|&t| {
            let clean: f64 = HARMONICS
                .iter()
                .enumerate()
                .map(|(h, a)| a * (std::f64::consts::TAU * (h + 1) as f64 * f0 * t).cos())
                .sum();
            match noise {
                Some(d) if noise_std > 0.0 => clean + d.sample(&mut rng),
                _ => clean,
            }
        })
        .collect()
}
