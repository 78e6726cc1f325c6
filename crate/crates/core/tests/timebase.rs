use proptest::prelude::*;

use pulsealign_core::synth::{gen_timestamps, DelayModel};
use pulsealign_core::timebase::{
    allocate, detect_drops, robust_timestep, synthesize_grid, timegap_stats, SyntheticGrid,
};
use pulsealign_core::{dejitter, DejitterConfig, Error, JitterModel};

/// High-to-low scan over grid points, skipping allocated ones.
fn brute(ts: &[f64], g: &SyntheticGrid) -> Option<Vec<i64>> {
    let mut taken = std::collections::HashSet::new();
    let mut out = vec![0; ts.len()];
    for i in (0..ts.len()).rev() {
        let k = (g.k_min..=g.k_max)
            .rev()
            .find(|k| !taken.contains(k) && g.point(*k) <= ts[i])?;
        taken.insert(k);
        out[i] = k;
    }
    Some(out)
}

fn stream() -> impl Strategy<Value = Vec<f64>> {
    (
        -5.0..5.0f64,
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..0.05f64], 2..200),
    )
        .prop_map(|(start, gaps)| {
            let mut ts = vec![start];
            for g in gaps {
                ts.push(ts.last().unwrap() + g);
            }
            ts
        })
}

proptest! {
    #[test]
    fn closed_form_matches_scan(ts in stream(), scale in 0.3..1.5f64, shift in -1.0..1.0f64, ext in 0.0..30.0f64) {
        let mean_gap = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        prop_assume!(mean_gap > 1e-4);
        let period = mean_gap * scale;
        let anchor = ts.iter().sum::<f64>() / ts.len() as f64 + shift * period;
        let g = SyntheticGrid::spanning(&ts, period, anchor, ext * period).unwrap();
        match (allocate(&ts, &g), brute(&ts, &g)) {
            (Ok(m), Some(b)) => {
                prop_assert_eq!(&m.alloc, &b);
                prop_assert!(m.alloc.windows(2).all(|w| w[0] < w[1]));
                for (&k, &t) in m.alloc.iter().zip(&ts) {
                    prop_assert!(g.point(k) <= t);
                }
                let d = detect_drops(&m);
                prop_assert_eq!(d.count, d.dropped_k.len());
                for k in &d.dropped_k {
                    prop_assert!(!m.alloc.contains(k));
                }
                let span = (m.alloc[m.alloc.len() - 1] - m.alloc[0] + 1) as usize;
                prop_assert_eq!(span, ts.len() + d.count);
            }
            (Err(Error::GridUnderflow { .. }), None) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn grid_bounds(ts in stream(), period in 0.001..0.1f64, delta in 0.0..0.5f64) {
        let g = synthesize_grid(&ts, period, delta).unwrap();
        let first = ts[0] - delta;
        let last = ts[ts.len() - 1];
        prop_assert!(g.point(g.k_min) <= first && first < g.point(g.k_min + 1));
        prop_assert!(g.point(g.k_max) <= last && last < g.point(g.k_max + 1));
    }

    #[test]
    fn zero_jitter_period_is_exact(n in 3usize..2000, period in 1e-4..0.1f64) {
        let ts: Vec<f64> = (0..n).map(|i| i as f64 * period).collect();
        let est = robust_timestep(&ts, 3.0).unwrap();
        prop_assert!((est.period - period).abs() / period < 1e-12);
        prop_assert_eq!(est.n_excluded, 0);
        prop_assert!((est.rate * est.period - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dejitter_invariants(seed in any::<u64>(), sigma_frac in 0.0..0.3f64, p in 0.0..0.01f64) {
        let period = 0.02;
        let m = JitterModel {
            period,
            delay: DelayModel::HalfNormal { sigma: sigma_frac * period },
            drop_rate: p,
            seed,
        };
        let (raw, _) = gen_timestamps(1500, &m).unwrap();
        let r = dejitter(&raw, &DejitterConfig::default()).unwrap();
        for (c, t) in r.corrected.iter().zip(&raw) {
            prop_assert!(c <= t);
        }
        for w in r.corrected.windows(2) {
            let q = (w[1] - w[0]) / r.period;
            prop_assert!(q > 0.5);
            prop_assert!((q - q.round()).abs() < 1e-9 * q.round().max(1.0) * 1e3);
        }
        let after = timegap_stats(&r.corrected).unwrap();
        if r.drops.count == 0 {
            prop_assert!((after.mean - r.period).abs() < 1e-9);
        } else {
            prop_assert!(after.mean > r.period);
        }
    }
}

#[test]
fn refinement_off_uses_mean_anchored_grid() {
    let ts: Vec<f64> = (0..200).map(|i| i as f64 * 0.01 + if i % 3 == 0 { 0.002 } else { 0.0 }).collect();
    let cfg = DejitterConfig {
        refine: false,
        ..Default::default()
    };
    let r = dejitter(&ts, &cfg).unwrap();
    assert!(r.refined.is_none());
    let est = robust_timestep(&ts, 3.0).unwrap();
    assert_eq!(r.period, est.period);
    let mean = ts.iter().sum::<f64>() / ts.len() as f64;
    assert!((r.grid.anchor - mean).abs() < 1e-9 * est.period + 1e-15);
}

#[test]
fn jitter_free_thirty_fps() {
    let m = JitterModel {
        period: 0.033_33,
        delay: DelayModel::HalfNormal { sigma: 0.0 },
        drop_rate: 0.0,
        seed: 0,
    };
    let (raw, _) = gen_timestamps(9001, &m).unwrap();
    let r = dejitter(&raw, &DejitterConfig::default()).unwrap();
    assert!(r.gaps_after.std_ms() <= 1e-6);
    assert!(r.estimate.rate < 30.01);
}

#[test]
fn drops_show_up_as_gap_peaks() {
    let m = JitterModel::half_normal_for_gap_std(0.033_33, 0.0115, 0.01, 3);
    let (raw, truth) = gen_timestamps(6000, &m).unwrap();
    let r = dejitter(&raw, &DejitterConfig::default()).unwrap();
    assert!(r.gaps_after.std > 0.0);
    let peaks = r
        .corrected
        .windows(2)
        .filter(|w| w[1] - w[0] > 1.5 * r.period)
        .count();
    assert!(peaks > 0);
    let e = &truth.emitted_indices;
    let interior = truth
        .dropped_indices
        .iter()
        .filter(|&&k| k > e[0] && k < e[e.len() - 1])
        .count();
    assert_eq!(r.drops.count, interior);
}
