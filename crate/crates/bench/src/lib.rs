//! Inputs shared by the benchmarks.

use pulsealign_core::synth::{gen_pulse_signal, gen_timestamps, JitterModel};
use pulsealign_core::{Instant, ProcessedSignal};

/// Camera-like stream: 30 fps, ~11.5 ms gap std, 0.3% drops.
pub fn frame_stream(n: usize, seed: u64) -> Vec<Instant> {
    let m = JitterModel::half_normal_for_gap_std(0.033_33, 0.0115, 0.003, seed);
    gen_timestamps(n, &m).expect("valid model").0
}

pub fn pulse(n: usize, fs: f64) -> Vec<f64> {
    gen_pulse_signal(n as f64 / fs, fs, 72.0, 0.2, 1).expect("valid signal")
}

/// Evenly sampled sensor signal at `fs` with `n` samples.
pub fn sensor(n: usize, fs: f64) -> ProcessedSignal {
    let filtered = pulse(n, fs);
    ProcessedSignal {
        timestamps: (0..filtered.len()).map(|i| i as f64 / fs).collect(),
        smoothed: filtered.clone(),
        filtered,
    }
}
