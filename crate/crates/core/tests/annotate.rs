use proptest::prelude::*;

use pulsealign_core::annotate::annotate_frames_counted;
use pulsealign_core::ingest::{load_annotations, write_annotations, AnnotationRow};
use pulsealign_core::{annotate_brute, overlay_export, ProcessedSignal, StreamOrigin};

fn sorted(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..20.0f64, 1..max_len).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    })
}

fn signal(ts: Vec<f64>) -> ProcessedSignal {
    let filtered: Vec<f64> = ts.iter().map(|t| (3.0 * t).cos()).collect();
    ProcessedSignal {
        smoothed: filtered.clone(),
        timestamps: ts,
        filtered,
    }
}

proptest! {
    #[test]
    fn cursor_matches_brute_force(frames in sorted(200), sensor_ts in sorted(500)) {
        let s = signal(sensor_ts);
        match (annotate_frames_counted(&frames, &s), annotate_brute(&frames, &s)) {
            (Ok((a, skipped, visits)), Ok(b)) => {
                prop_assert_eq!(&a, &b);
                prop_assert_eq!(skipped + a.len(), frames.len());
                prop_assert!(visits <= frames.len() + s.len());
                prop_assert!(a.windows(2).all(|w| w[0].sensor_index <= w[1].sensor_index));
                for f in &a {
                    prop_assert!(f.sensor_ts <= f.frame_ts);
                    prop_assert_eq!(f.label, s.filtered[f.sensor_index]);
                    if let Some(&next) = s.timestamps.get(f.sensor_index + 1) {
                        prop_assert!(f.frame_ts < next);
                    }
                }
            }
            (Err(_), Err(_)) => prop_assert!(frames.iter().all(|&f| f < s.timestamps[0])),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.map(|x| x.0.len()), b.map(|x| x.len())),
        }
    }

    #[test]
    fn overlay_row_count(frames in sorted(50), sensor_ts in sorted(100)) {
        let s = signal(sensor_ts);
        if let Ok((a, _, _)) = annotate_frames_counted(&frames, &s) {
            prop_assert_eq!(overlay_export(&a, &s).len(), a.len() + s.len());
        }
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = signal((0..100).map(|i| i as f64 * 0.001).collect());
    let frames: Vec<f64> = (0..30).map(|i| 0.0005 + i as f64 * 0.0033).collect();
    let (a, _, _) = annotate_frames_counted(&frames, &s).unwrap();
    let origin = StreamOrigin::new(1_690_000_000_123_456);
    let p = dir.path().join("a.csv");
    write_annotations(&p, &a, origin).unwrap();
    let back = load_annotations(&p).unwrap();
    let want: Vec<AnnotationRow> = a.iter().map(|f| AnnotationRow::from_frame(f, origin)).collect();
    assert_eq!(back, want);
    for (r, f) in back.iter().zip(&a) {
        assert_eq!(r.label, f.label);
        assert!((origin.to_relative(r.dejittered_ts_us) - f.frame_ts).abs() <= 0.5e-6);
    }
    assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), a.len() + 1);
}
