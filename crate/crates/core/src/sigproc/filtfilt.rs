use super::butterworth::BiquadSection;
use crate::error::{Error, Result};

/// Steady-state delay-line values of each section for a unit step input
/// (transposed direct form II).
fn step_state(sections: &[BiquadSection]) -> Vec<[f64; 2]> {
    let mut gain = 1.0;
    sections
        .iter()
        .map(|s| {
            let y = gain * (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
            let z = [y - s.b0 * gain, s.b2 * gain - s.a2 * y];
            gain = y;
            z
        })
        .collect()
}

fn run(sections: &[BiquadSection], zi: &[[f64; 2]], x: &mut [f64]) {
    let x0 = x[0];
    for (s, z) in sections.iter().zip(zi) {
        let (mut z1, mut z2) = (z[0] * x0, z[1] * x0);
        for v in x.iter_mut() {
            let xin = *v;
            let y = s.b0 * xin + z1;
            z1 = s.b1 * xin - s.a1 * y + z2;
            z2 = s.b2 * xin - s.a2 * y;
            *v = y;
        }
    }
}

/// Filters in place once, causally, from zero initial state.
pub fn lfilter(sections: &[BiquadSection], x: &mut [f64]) {
    let zero = vec![[0.0; 2]; sections.len()];
    run(sections, &zero, x);
}

/// Number of samples reflected onto each end by [`filtfilt`].
pub fn pad_len(sections: &[BiquadSection]) -> usize {
    3 * 2 * sections.len()
}

/// Zero-phase filtering: forward, reverse, forward, reverse.
///
/// Both ends are extended by odd reflection about the end sample and each pass
/// starts from the step-response steady state scaled to its first input, which
/// keeps start-up transients small. The padding is removed afterwards.
pub fn filtfilt(sections: &[BiquadSection], signal: &[f64]) -> Result<Vec<f64>> {
    let pad = pad_len(sections);
    let n = signal.len();
    if n <= pad {
        return Err(Error::TooShort {
            needed: pad + 1,
            got: n,
        });
    }
    if sections.is_empty() {
        return Ok(signal.to_vec());
    }
    let (first, last) = (signal[0], signal[n - 1]);
    let mut x = Vec::with_capacity(n + 2 * pad);
    x.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    x.extend_from_slice(signal);
    x.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let zi = step_state(sections);
    run(sections, &zi, &mut x);
    x.reverse();
    run(sections, &zi, &mut x);
    x.reverse();
    Ok(x[pad..pad + n].to_vec())
}
