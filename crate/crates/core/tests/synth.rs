use proptest::prelude::*;

use pulsealign_core::synth::{gen_pulse_signal, gen_timestamps, DelayModel};
use pulsealign_core::timebase::timegap_stats;
use pulsealign_core::{dejitter, DejitterConfig, JitterModel};

fn model() -> impl Strategy<Value = JitterModel> {
    (
        any::<u64>(),
        0.001..0.05f64,
        0.0..0.02f64,
        prop_oneof![
            (0.0..0.5f64).prop_map(|f| DelayModel::HalfNormal { sigma: f }),
            (0.0..2.0f64).prop_map(|f| DelayModel::Uniform { max: f }),
            (1usize..12, 0.0..0.2f64).prop_map(|(k, f)| DelayModel::Packetized {
                samples_per_packet: k,
                transport_sigma: f,
            }),
        ],
    )
        .prop_map(|(seed, period, drop_rate, d)| {
            // delay parameters were drawn in units of the period
            let delay = match d {
                DelayModel::HalfNormal { sigma } => DelayModel::HalfNormal { sigma: sigma * period },
                DelayModel::Uniform { max } => DelayModel::Uniform { max: max * period },
                DelayModel::Packetized {
                    samples_per_packet,
                    transport_sigma,
                } => DelayModel::Packetized {
                    samples_per_packet,
                    transport_sigma: transport_sigma * period,
                },
            };
            JitterModel {
                period,
                delay,
                drop_rate,
                seed,
            }
        })
}

proptest! {
    #[test]
    fn deterministic_and_causal(m in model(), n in 3usize..3000) {
        let (a, ta) = gen_timestamps(n, &m).unwrap();
        let (b, tb) = gen_timestamps(n, &m).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&ta, &tb);
        prop_assert!(a.windows(2).all(|w| w[0] <= w[1]));
        for (r, e) in a.iter().zip(&ta.event_times) {
            prop_assert!(r >= e);
        }
        let mut slots: Vec<usize> = ta.emitted_indices.iter().chain(&ta.dropped_indices).copied().collect();
        slots.sort_unstable();
        prop_assert_eq!(slots, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn sparse_drops_recover_period(seed in any::<u64>(), sigma in 0.0..0.4f64, p in 0.0..0.01f64) {
        let m = JitterModel {
            period: 0.01,
            delay: DelayModel::HalfNormal { sigma: sigma * 0.01 },
            drop_rate: p,
            seed,
        };
        let (raw, _) = gen_timestamps(5000, &m).unwrap();
        let r = dejitter(&raw, &DejitterConfig::default()).unwrap();
        prop_assert!((r.period - 0.01).abs() / 0.01 < 1e-3);
    }
}

#[test]
fn thirty_fps_regime() {
    let m = JitterModel::half_normal_for_gap_std(0.033_33, 0.0115, 0.0, 21);
    let (raw, _) = gen_timestamps(20_000, &m).unwrap();
    let g = timegap_stats(&raw).unwrap();
    assert!((g.std_ms() - 11.5).abs() < 0.5, "{}", g.std_ms());
}

#[test]
fn drop_count_within_binomial_bound() {
    let m = JitterModel {
        period: 0.001,
        delay: DelayModel::HalfNormal { sigma: 1e-4 },
        drop_rate: 0.01,
        seed: 99,
    };
    let (_, t) = gen_timestamps(10_000, &m).unwrap();
    let bound = 3.0 * (10_000.0f64 * 0.01 * 0.99).sqrt();
    assert!((t.dropped_indices.len() as f64 - 100.0).abs() <= bound);
}

#[test]
fn pulse_periodic_component_is_seed_independent() {
    let clean = gen_pulse_signal(2.0, 1000.0, 60.0, 0.0, 0).unwrap();
    for i in 0..1000 {
        assert!((clean[i] - clean[i + 1000]).abs() < 1e-9);
    }
    let a = gen_pulse_signal(2.0, 1000.0, 60.0, 0.5, 1).unwrap();
    let b = gen_pulse_signal(2.0, 1000.0, 60.0, 0.5, 2).unwrap();
    assert_ne!(a, b);
    let mean_diff: f64 = a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    assert!(mean_diff.abs() < 0.05);
}
