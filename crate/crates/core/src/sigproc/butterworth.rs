use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandpassConfig {
    pub f_low: f64,
    pub f_high: f64,
    /// Sampling rate, Hz. The pipeline replaces it with the measured sensor rate.
    pub fs: f64,
    /// Order of the analog lowpass prototype; the bandpass has twice this order.
    pub order: usize,
}

impl Default for BandpassConfig {
    fn default() -> Self {
        BandpassConfig {
            f_low: 0.7,
            f_high: 2.5,
            fs: 1000.0,
            order: 2,
        }
    }
}

impl BandpassConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if !(0.0 < self.f_low && self.f_low < self.f_high && self.f_high < self.fs / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < f_low < f_high < fs/2, got f_low={} f_high={} fs={}",
                self.f_low, self.f_high, self.fs
            )));
        }
        if self.order == 0 {
            return Err(Error::InvalidConfig("filter order must be at least 1".into()));
        }
        Ok(())
    }
}

/// `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiquadSection {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadSection {
    pub fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b0 + zi * (self.b1 + zi * self.b2);
        let den = 1.0 + zi * (self.a1 + zi * self.a2);
        num / den
    }

    /// Both poles strictly inside the unit circle (Jury conditions).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }
}

/// `|H(e^{j 2 pi f / fs})|` of a cascade.
pub fn magnitude_response(sections: &[BiquadSection], f: f64, fs: f64) -> f64 {
    let z = Complex64::from_polar(1.0, 2.0 * PI * f / fs);
    sections.iter().map(|s| s.response(z)).product::<Complex64>().norm()
}

/// Butterworth bandpass as cascaded biquads.
///
/// Lowpass prototype poles are mapped through `s -> (s^2 + W0^2) / (B s)` with
/// prewarped band edges, then through the bilinear transform. Each section
/// carries one zero at DC and one at Nyquist and is scaled to unit gain at the
/// band center; sections are ordered by ascending pole Q.
pub fn design_bandpass(cfg: &BandpassConfig) -> Result<Vec<BiquadSection>> {
    cfg.validate()?;
    let fs = cfg.fs;
    let n = cfg.order;
    let prewarp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (wl, wh) = (prewarp(cfg.f_low), prewarp(cfg.f_high));
    let bw = wh - wl;
    let w0sq = wl * wh;

    let mut analog: Vec<[Complex64; 2]> = Vec::with_capacity(n);
    for k in 0..n {
        let p = Complex64::from_polar(1.0, PI * (2 * k + n + 1) as f64 / (2 * n) as f64);
        if p.im < -1e-12 {
            continue;
        }
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0sq).sqrt();
        let (r1, r2) = ((pb + disc) / 2.0, (pb - disc) / 2.0);
        if p.im.abs() <= 1e-12 {
            // real prototype pole: its two bandpass poles form one real section
            analog.push([r1, r2]);
        } else {
            analog.push([r1, r1.conj()]);
            analog.push([r2, r2.conj()]);
        }
    }
    let q = |s: &Complex64| s.norm() / (-2.0 * s.re);
    analog.sort_by(|a, b| q(&a[0]).total_cmp(&q(&b[0])));

    let fs2 = 2.0 * fs;
    let f_center = fs / PI * (w0sq.sqrt() / fs2).atan();
    let zc = Complex64::from_polar(1.0, 2.0 * PI * f_center / fs);
    let sections = analog
        .iter()
        .map(|[s1, s2]| {
            let z1 = (fs2 + s1) / (fs2 - s1);
            let z2 = (fs2 + s2) / (fs2 - s2);
            let mut sec = BiquadSection {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -(z1 + z2).re,
                a2: (z1 * z2).re,
            };
            let g = sec.response(zc).norm();
            sec.b0 /= g;
            sec.b2 /= g;
            sec
        })
        .collect::<Vec<_>>();
    if let Some(bad) = sections.iter().find(|s| !s.is_stable()) {
        return Err(Error::Degenerate(format!("unstable section {bad:?}")));
    }
    Ok(sections)
}
