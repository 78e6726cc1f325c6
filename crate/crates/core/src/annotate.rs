//! Frame labeling: each frame takes the latest processed sensor value whose
//! timestamp is not later than the frame's.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Instant;
use crate::sigproc::ProcessedSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedFrame {
    /// Position of the frame in the frame stream (or its recorded index once relabeled).
    pub frame_index: u64,
    /// Frame time before de-jittering.
    pub raw_frame_ts: Instant,
    pub frame_ts: Instant,
    pub label: f64,
    pub sensor_index: usize,
    pub sensor_ts: Instant,
}

fn check_sorted(ts: &[Instant], what: &str) -> Result<()> {
    match ts.windows(2).position(|w| !(w[0] <= w[1])) {
        Some(i) => Err(Error::Degenerate(format!(
            "{what} timestamps not increasing at position {}",
            i + 1
        ))),
        None => Ok(()),
    }
}

fn frame(i: usize, t: Instant, j: usize, sensor: &ProcessedSignal) -> AnnotatedFrame {
    AnnotatedFrame {
        frame_index: i as u64,
        raw_frame_ts: t,
        frame_ts: t,
        label: sensor.filtered[j],
        sensor_index: j,
        sensor_ts: sensor.timestamps[j],
    }
}

/// Cursor join. Returns the annotations, the number of leading frames with no
/// earlier sensor sample, and the number of sensor timestamp comparisons made.
pub fn annotate_frames_counted(
    frame_ts: &[Instant],
    sensor: &ProcessedSignal,
) -> Result<(Vec<AnnotatedFrame>, usize, usize)> {
    check_sorted(frame_ts, "frame")?;
    check_sorted(&sensor.timestamps, "sensor")?;
    let s = &sensor.timestamps;
    let mut out = Vec::with_capacity(frame_ts.len());
    let mut skipped = 0;
    let mut visits = 0;
    // number of sensor samples at or before the current frame
    let mut cursor = 0;
    for (i, &t) in frame_ts.iter().enumerate() {
        loop {
            if cursor == s.len() {
                break;
            }
            visits += 1;
            if s[cursor] <= t {
                cursor += 1;
            } else {
                break;
            }
        }
        if cursor == 0 {
            skipped += 1;
        } else {
            out.push(frame(i, t, cursor - 1, sensor));
        }
    }
    if out.is_empty() {
        return Err(Error::NoPrecedingSensor);
    }
    Ok((out, skipped, visits))
}

/// Returns the annotations and the number of skipped leading frames.
pub fn annotate_frames(
    frame_ts: &[Instant],
    sensor: &ProcessedSignal,
) -> Result<(Vec<AnnotatedFrame>, usize)> {
    annotate_frames_counted(frame_ts, sensor).map(|(a, skipped, _)| (a, skipped))
}

/// Full scan per frame.
pub fn annotate_brute(frame_ts: &[Instant], sensor: &ProcessedSignal) -> Result<Vec<AnnotatedFrame>> {
    check_sorted(frame_ts, "frame")?;
    check_sorted(&sensor.timestamps, "sensor")?;
    let out: Vec<AnnotatedFrame> = frame_ts
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| {
            let mut best = None;
            for (j, &s) in sensor.timestamps.iter().enumerate() {
                if s <= t {
                    best = Some(j);
                }
            }
            best.map(|j| frame(i, t, j, sensor))
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoPrecedingSensor);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Sensor,
    FrameLabels,
}

impl Series {
    pub fn as_str(self) -> &'static str {
        match self {
            Series::Sensor => "sensor",
            Series::FrameLabels => "frame_labels",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub series: Series,
    pub t: Instant,
    pub value: f64,
}

/// Long-format table of the full-rate filtered signal followed by the frame labels.
pub fn overlay_export(annotations: &[AnnotatedFrame], sensor: &ProcessedSignal) -> Vec<OverlayRow> {
    let full = sensor
        .timestamps
        .iter()
        .zip(&sensor.filtered)
        .map(|(&t, &value)| OverlayRow {
            series: Series::Sensor,
            t,
            value,
        });
    let labels = annotations.iter().map(|a| OverlayRow {
        series: Series::FrameLabels,
        t: a.frame_ts,
        value: a.label,
    });
    full.chain(labels).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor(ts: &[f64]) -> ProcessedSignal {
        ProcessedSignal {
            timestamps: ts.to_vec(),
            smoothed: ts.iter().map(|t| t * 10.0).collect(),
            filtered: ts.iter().map(|t| t * 100.0).collect(),
        }
    }

    #[test]
    fn between_samples() {
        let s = sensor(&[0.0, 1.0, 2.0]);
        let (a, skipped) = annotate_frames(&[0.5, 1.5], &s).unwrap();
        assert_eq!(skipped, 0);
        assert_eq!(a.iter().map(|f| f.sensor_index).collect::<Vec<_>>(), [0, 1]);
        assert_eq!(a[1].label, 100.0);
    }

    #[test]
    fn tie_takes_that_sample() {
        let s = sensor(&[0.0, 1.0, 2.0]);
        let (a, _) = annotate_frames(&[1.0], &s).unwrap();
        assert_eq!(a[0].sensor_index, 1);
        assert_eq!(annotate_brute(&[1.0], &s).unwrap(), a);
    }

    #[test]
    fn head_frames_skipped() {
        let s = sensor(&[1.0, 2.0]);
        let (a, skipped) = annotate_frames(&[0.2, 0.4, 1.2, 5.0], &s).unwrap();
        assert_eq!(skipped, 2);
        assert_eq!(a.len(), 2);
        assert_eq!(a[1].sensor_index, 1);
        assert_eq!(a[0].frame_index, 2);
        assert!(matches!(
            annotate_frames(&[0.1], &s),
            Err(Error::NoPrecedingSensor)
        ));
        assert!(matches!(
            annotate_brute(&[0.1], &s),
            Err(Error::NoPrecedingSensor)
        ));
    }

    #[test]
    fn unsorted_rejected() {
        let s = sensor(&[0.0, 1.0]);
        assert!(annotate_frames(&[0.5, 0.2], &s).is_err());
    }

    #[test]
    fn overlay_rows() {
        let ts: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let s = sensor(&ts);
        let (a, _) = annotate_frames(&[0.105, 0.5, 0.905], &s).unwrap();
        let rows = overlay_export(&a, &s);
        assert_eq!(rows.len(), 103);
        for r in rows.iter().filter(|r| r.series == Series::FrameLabels) {
            assert!(rows
                .iter()
                .any(|q| q.series == Series::Sensor && q.t <= r.t && q.value == r.value));
        }
    }
}
