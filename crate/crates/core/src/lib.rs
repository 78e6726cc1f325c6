//! Time alignment and labeling toolkit for camera + physiological-sensor recordings.
//!
//! The processing order mirrors how a recording is turned into a dataset:
//!
//! 1. [`ingest`] loads frame / sensor streams and removes operator-marked bad sections.
//! 2. [`timebase`] replaces jittered timestamps with points on an evenly spaced
//!    synthetic grid and reports dropped samples.
//! 3. [`sigproc`] smooths the sensor signal (Savitzky-Golay) and band-limits it
//!    with a zero-phase Butterworth bandpass.
//! 4. [`annotate`] labels every frame with the latest processed sensor value
//!    that is not later than the frame.
//!
//! [`baseline`] holds a Kalman-filter timestamp corrector used for comparison, and
//! [`synth`] generates streams with known ground truth.

pub mod annotate;
pub mod baseline;
pub mod error;
pub mod ingest;
pub mod sigproc;
pub mod synth;
pub mod timebase;

pub use annotate::{annotate_brute, annotate_frames, overlay_export, AnnotatedFrame, OverlayRow};
pub use baseline::{compare_methods, kalman_correct, ComparisonReport, KalmanConfig};
pub use error::{Error, Result};
pub use ingest::{ExclusionList, Instant, SampleStream, StreamKind, StreamOrigin};
pub use sigproc::{BandpassConfig, BiquadSection, ProcessedSignal, SavGolConfig};
pub use synth::{DelayModel, JitterModel, SynthTruth};
pub use timebase::{
    dejitter, DejitterConfig, DejitterResult, DropReport, GapStats, SyntheticGrid,
    TimestepEstimate,
};
