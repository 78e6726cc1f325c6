use proptest::prelude::*;

use pulsealign_core::ingest::{apply_exclusions, load_stream, write_stream};
use pulsealign_core::timebase::timegap_stats;
use pulsealign_core::{ExclusionList, SampleStream, StreamKind};

fn intervals() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..10.0f64, 0.001..2.0f64), 0..6)
        .prop_map(|v| v.into_iter().map(|(s, w)| (s, s + w)).collect())
}

fn abs_us() -> impl Strategy<Value = Vec<i64>> {
    (
        0i64..2_000_000_000_000_000,
        prop::collection::vec(0i64..100_000, 2..300),
    )
        .prop_map(|(start, gaps)| {
            let mut v = vec![start];
            for g in gaps {
                v.push(v.last().unwrap() + g);
            }
            v
        })
}

proptest! {
    #[test]
    fn exclusion_matches_predicate_and_is_idempotent(us in abs_us(), iv in intervals()) {
        let s = SampleStream::from_absolute_us(StreamKind::Frame, &us, None, None).unwrap();
        let excl = ExclusionList::new(iv.clone()).unwrap();
        let inside = |t: f64| iv.iter().any(|&(a, b)| a <= t && t < b);
        let want: Vec<f64> = s.timestamps.iter().copied().filter(|&t| !inside(t)).collect();
        match apply_exclusions(&s, &excl) {
            Ok((once, removed)) => {
                prop_assert_eq!(&once.timestamps, &want);
                prop_assert_eq!(removed, s.len() - want.len());
                let (twice, again) = apply_exclusions(&once, &excl).unwrap();
                prop_assert_eq!(twice, once);
                prop_assert_eq!(again, 0);
            }
            Err(_) => prop_assert!(want.len() < 2),
        }
    }

    #[test]
    fn normalization_keeps_gaps(us in abs_us()) {
        let s = SampleStream::from_absolute_us(StreamKind::Frame, &us, None, None).unwrap();
        prop_assert_eq!(s.timestamps[0], 0.0);
        for (w, t) in us.windows(2).zip(s.timestamps.windows(2)) {
            let want = (w[1] - w[0]) as f64 * 1e-6;
            prop_assert!(((t[1] - t[0]) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn file_round_trip_is_exact(us in abs_us(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..us.len())
            .map(|i| ((seed ^ i as u64) as f64).sin() * 1e3)
            .collect();
        let s = SampleStream::from_absolute_us(StreamKind::Sensor, &us, Some(values), None).unwrap();
        let p = dir.path().join("s.csv");
        write_stream(&p, &s).unwrap();
        let back = load_stream(&p, StreamKind::Sensor).unwrap();
        prop_assert_eq!(back.absolute_us(), us);
        prop_assert_eq!(back, s);
    }
}

#[test]
fn gap_stats_of_loaded_frames() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    std::fs::write(&p, "index,ts_us\n0,1000000\n1,1033333\n2,1066666\n").unwrap();
    let s = load_stream(&p, StreamKind::Frame).unwrap();
    assert_eq!(s.origin.epoch_us, 1_000_000);
    assert!((s.timestamps[1] - 0.033333).abs() < 1e-12);
    let g = timegap_stats(&s.timestamps).unwrap();
    assert!((g.mean_ms() - 33.333).abs() < 1e-9);
}
