//! Period and phase refinement for the synthetic grid.
//!
//! The end-to-start allocation only stays locked to the true sample slots when
//! the grid period is within roughly `period / N` of the truth; an error of a
//! few parts in 10^4 already turns into dozens of phantom drops (period too
//! short) or a grid underflow (period too long) over a long recording. The
//! outlier-trimmed mean timestep is not that accurate once drops and one-sided
//! delays are present, so it is used only as a starting point here.
//!
//! Refinement:
//! 1. Epoch folding: maximize `|sum exp(2 pi i t / P)|` over candidate periods `P`.
//!    Missing samples only remove terms, so drops do not bias the peak.
//!    The search runs on growing prefixes, narrowing the window at each step.
//! 2. Phase: delays are nonnegative, so the folded phases of undelayed samples
//!    sit at the start of the occupied arc. The grid is shifted onto that edge.
//! 3. Polish: allocate against the folded grid, then take the lower supporting
//!    line of `(slot, t)` (lower convex hull). Every sample lies on or above it,
//!    so re-allocating against it cannot create phantom drops.
//!
//! When the folded peak is not significant (delay spread well beyond one
//! period, or very short streams) no refinement is returned.

use std::f64::consts::TAU;

use super::alloc::allocate_unbounded;
use crate::ingest::Instant;

const MIN_SAMPLES: usize = 32;
/// Relative half-width of the initial period search.
const SEARCH_SPAN: f64 = 0.05;
const INITIAL_PREFIX: usize = 1024;
const MAX_INITIAL_PREFIX: usize = 16384;
/// Required `|Z| / sqrt(n)`; noise alone gives `|Z|^2 / n ~ Exp(1)`.
const SIGNIFICANCE: f64 = 5.5;
/// Candidates per peak width.
const OVERSAMPLE: f64 = 8.0;
const GOLDEN_STEPS: usize = 40;
/// Keeps lattice points strictly below the envelope vertices.
const ENVELOPE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodFit {
    pub period: f64,
    /// Grid anchor: a lattice point on the lower delay envelope, at or below the mean timestamp.
    pub anchor: f64,
    /// `|Z| / n` at the chosen period, in `[0, 1]`.
    pub coherence: f64,
    pub polished: bool,
}

fn folded_magnitude(ts: &[Instant], period: f64) -> f64 {
    let t0 = ts[0];
    let (mut re, mut im) = (0.0, 0.0);
    for &t in ts {
        let x = (t - t0) / period;
        let (s, c) = (TAU * (x - x.floor())).sin_cos();
        re += c;
        im += s;
    }
    re.hypot(im)
}

/// Width of the folding peak for a prefix: period / number of cycles spanned.
fn peak_width(ts: &[Instant], period: f64) -> Option<f64> {
    let span = ts[ts.len() - 1] - ts[0];
    (span > 0.0).then(|| period * period / span)
}

fn best_on_grid(ts: &[Instant], lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).ceil() as usize + 1;
    (0..n)
        .map(|j| lo + j as f64 * step)
        .filter(|&p| p > 0.0)
        .map(|p| (p, folded_magnitude(ts, p)))
        .fold((lo, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
}

fn fold_period(ts: &[Instant], rough: f64) -> Option<(f64, f64)> {
    let n = ts.len();
    let mut b = n.min(INITIAL_PREFIX);
    let mut period = loop {
        let prefix = &ts[..b];
        let w = peak_width(prefix, rough)?;
        let (p, z) = best_on_grid(
            prefix,
            rough * (1.0 - SEARCH_SPAN),
            rough * (1.0 + SEARCH_SPAN),
            w / OVERSAMPLE,
        );
        if z >= SIGNIFICANCE * (b as f64).sqrt() {
            break p;
        }
        if b == n || b >= MAX_INITIAL_PREFIX {
            return None;
        }
        b = n.min(b * 4);
    };
    while b < n {
        let w_prev = peak_width(&ts[..b], period)?;
        b = n.min(b * 4);
        let prefix = &ts[..b];
        let w = peak_width(prefix, period)?;
        period = best_on_grid(prefix, period - w_prev, period + w_prev, w / OVERSAMPLE).0;
    }
    // golden-section search inside the final grid cell
    let w = peak_width(ts, period)?;
    let (mut lo, mut hi) = (period - w / 4.0, period + w / 4.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut c = lo + g * (hi - lo);
    let (mut za, mut zc) = (folded_magnitude(ts, a), folded_magnitude(ts, c));
    for _ in 0..GOLDEN_STEPS {
        if za > zc {
            hi = c;
            c = a;
            zc = za;
            a = hi - g * (hi - lo);
            za = folded_magnitude(ts, a);
        } else {
            lo = a;
            a = c;
            za = zc;
            c = lo + g * (hi - lo);
            zc = folded_magnitude(ts, c);
        }
    }
    let period = 0.5 * (lo + hi);
    let z = folded_magnitude(ts, period);
    (z >= SIGNIFICANCE * (n as f64).sqrt()).then_some((period, z / n as f64))
}

/// Offset in `[0, period)` of the leading edge of the folded phase distribution.
fn envelope_phase(ts: &[Instant], period: f64, reference: f64) -> f64 {
    let mut phases: Vec<f64> = ts
        .iter()
        .map(|&t| (t - reference).rem_euclid(period))
        .collect();
    phases.sort_by(f64::total_cmp);
    let n = phases.len();
    let (mut best_gap, mut after) = (f64::NEG_INFINITY, 0);
    for i in 0..n {
        let next = if i + 1 < n {
            phases[i + 1]
        } else {
            phases[0] + period
        };
        let gap = next - phases[i];
        if gap > best_gap {
            best_gap = gap;
            after = (i + 1) % n;
        }
    }
    phases[after]
}

/// Lower convex hull of points sorted by x; returns the supporting line
/// `y = intercept + slope * x` touching the hull at the mean abscissa.
fn lower_support(xs: &[i64], ys: &[f64]) -> Option<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let p = (x as f64, y);
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let xm = xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
    hull.windows(2)
        .find(|w| w[0].0 <= xm && xm <= w[1].0)
        .map(|w| {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            (w[0].1 - slope * w[0].0, slope)
        })
}

fn lattice_at_or_below(origin: f64, period: f64, target: f64) -> f64 {
    origin + ((target - origin) / period).floor() * period
}

pub fn refine_period(ts: &[Instant], rough: f64) -> Option<PeriodFit> {
    if ts.len() < MIN_SAMPLES || !(rough > 0.0) {
        return None;
    }
    let (period, coherence) = fold_period(ts, rough)?;
    let mean = ts.iter().sum::<f64>() / ts.len() as f64;
    let edge = envelope_phase(ts, period, mean);
    let anchor = lattice_at_or_below(mean + edge, period, mean) - ENVELOPE_GUARD * period;

    let slots = allocate_unbounded(ts, anchor, period);
    let width = peak_width(ts, period)?;
    match lower_support(&slots, ts) {
        Some((intercept, slope)) if (slope - period).abs() <= width => Some(PeriodFit {
            period: slope,
            anchor: lattice_at_or_below(intercept, slope, mean) - ENVELOPE_GUARD * slope,
            coherence,
            polished: true,
        }),
        _ => Some(PeriodFit {
            period,
            anchor,
            coherence,
            polished: false,
        }),
    }
}
