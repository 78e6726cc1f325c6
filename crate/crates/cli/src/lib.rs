//! Stages behind the `pulsealign` command.
//!
//! Every stage takes and returns the same data the corresponding subcommand
//! reads and writes. Stage boundaries go through the on-disk representation
//! (absolute integer microseconds, first row as origin), so running
//! `pipeline` gives byte-identical artifacts to running `dejitter`, `filter`
//! and `annotate` one after another on the intermediate files.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pulsealign_core::ingest::{
    apply_exclusions, load_exclusions, load_stream, write_annotations, write_json,
    write_overlay, write_processed, write_stream,
};
use pulsealign_core::sigproc::process_signal;
use pulsealign_core::synth::{gen_timestamps, pulse_at, DelayModel};
use pulsealign_core::timebase::{robust_timestep, DejitterReport, GapSummary};
use pulsealign_core::{
    annotate_frames, compare_methods, dejitter, overlay_export, AnnotatedFrame, BandpassConfig,
    ComparisonReport, DejitterConfig, Instant, JitterModel, KalmanConfig, ProcessedSignal,
    SampleStream, SavGolConfig, StreamKind, StreamOrigin,
};

/// Anything the user got wrong on the command line or in the config file.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A pipeline failure, tagged with the stage it happened in.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

trait InStage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> InStage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub fps: f64,
    pub fs: f64,
    pub hr_bpm: f64,
    pub noise_std: f64,
    /// Target std of raw frame gaps.
    pub frame_gap_std_ms: f64,
    pub frame_drop_rate: f64,
    pub sensor_samples_per_packet: usize,
    pub sensor_transport_sigma_ms: f64,
    pub sensor_drop_rate: f64,
    /// How long the sensor starts recording before the camera.
    pub sensor_lead_s: f64,
    pub epoch_us: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_s: 300.0,
            fps: 30.0,
            fs: 1000.0,
            hr_bpm: 72.0,
            noise_std: 0.2,
            frame_gap_std_ms: 11.5,
            frame_drop_rate: 0.003,
            sensor_samples_per_packet: 8,
            sensor_transport_sigma_ms: 0.05,
            sensor_drop_rate: 1e-5,
            sensor_lead_s: 0.5,
            epoch_us: 1_700_000_000_000_000,
            seed: 0,
        }
    }
}

/// Whole-run configuration. Relative paths are resolved against the directory
/// of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub frames: Option<PathBuf>,
    pub sensor: Option<PathBuf>,
    pub frame_exclusions: Option<PathBuf>,
    pub sensor_exclusions: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub frame_dejitter: DejitterConfig,
    pub sensor_dejitter: DejitterConfig,
    pub savgol: SavGolConfig,
    /// `fs` is ignored: the rate is measured from the de-jittered sensor stream.
    pub bandpass: BandpassConfig,
    pub kalman: KalmanConfig,
    pub synth: SynthConfig,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub delta_ms: Option<f64>,
    pub m: Option<f64>,
    pub sg_window: Option<usize>,
    pub sg_order: Option<usize>,
    pub band_low_hz: Option<f64>,
    pub band_high_hz: Option<f64>,
    pub order: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.frames,
            &mut cfg.sensor,
            &mut cfg.frame_exclusions,
            &mut cfg.sensor_exclusions,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        for d in [&mut self.frame_dejitter, &mut self.sensor_dejitter] {
            if let Some(ms) = o.delta_ms {
                d.delta = ms / 1e3;
            }
            if let Some(m) = o.m {
                d.m = m;
            }
        }
        if let Some(s) = o.seed {
            self.synth.seed = s;
        }
        if let Some(w) = o.sg_window {
            self.savgol.w = w;
        }
        if let Some(p) = o.sg_order {
            self.savgol.p = p;
        }
        if let Some(f) = o.band_low_hz {
            self.bandpass.f_low = f;
        }
        if let Some(f) = o.band_high_hz {
            self.bandpass.f_high = f;
        }
        if let Some(n) = o.order {
            self.bandpass.order = n;
        }
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let bad = |e: pulsealign_core::Error| UsageError(e.to_string());
        self.frame_dejitter.validate().map_err(bad)?;
        self.sensor_dejitter.validate().map_err(bad)?;
        self.savgol.validate().map_err(bad)?;
        Ok(())
    }
}

/// Result of de-jittering one stream.
pub struct Dejittered {
    /// Corrected stream as it appears on disk.
    pub stream: SampleStream,
    pub report: DejitterReport,
    pub removed: usize,
    pub comparison: ComparisonReport,
}

pub fn stage_dejitter(
    raw: &SampleStream,
    exclusions: Option<&Path>,
    cfg: &DejitterConfig,
    kalman: &KalmanConfig,
) -> anyhow::Result<Dejittered> {
    let (clean, removed) = match exclusions {
        Some(p) => apply_exclusions(raw, &load_exclusions(p)?)?,
        None => (raw.clone(), 0),
    };
    let r = dejitter(&clean.timestamps, cfg)?;
    let comparison = compare_methods(&clean.timestamps, cfg, kalman)?;
    let corrected = clean.with_timestamps(r.corrected.clone())?;
    let stream = SampleStream::from_absolute_us(
        corrected.kind,
        &corrected.absolute_us(),
        corrected.values,
        Some((0..clean.len()).map(|i| clean.index_of(i)).collect()),
    )?;
    let stream = match stream.kind {
        StreamKind::Sensor => SampleStream {
            indices: None,
            ..stream
        },
        StreamKind::Frame => stream,
    };
    Ok(Dejittered {
        stream,
        report: r.report(cfg, clean.origin),
        removed,
        comparison,
    })
}

pub struct Filtered {
    pub signal: ProcessedSignal,
    pub raw: Vec<f64>,
    pub origin: StreamOrigin,
    pub fs: f64,
}

/// Smoothing and bandpass on a de-jittered sensor stream. The sampling rate is
/// measured from the stream.
pub fn stage_filter(
    sensor: &SampleStream,
    m: f64,
    sg: &SavGolConfig,
    bp: &BandpassConfig,
) -> anyhow::Result<Filtered> {
    let values = sensor
        .values
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("sensor stream has no values"))?;
    let fs = robust_timestep(&sensor.timestamps, m)?.rate;
    let bp = BandpassConfig { fs, ..*bp };
    let signal = process_signal(values, &sensor.timestamps, sg, &bp)?;
    // re-base on the first row, as the processed CSV does
    let origin = StreamOrigin::new(sensor.origin.to_absolute_us(sensor.timestamps[0]));
    let shift = sensor.origin.offset_to(origin);
    let signal = ProcessedSignal {
        timestamps: signal.timestamps.iter().map(|t| t + shift).collect(),
        ..signal
    };
    Ok(Filtered {
        signal,
        raw: values.clone(),
        origin,
        fs,
    })
}

pub struct Annotated {
    pub frames: Vec<AnnotatedFrame>,
    pub skipped_head: usize,
}

/// Labels de-jittered frames from a processed sensor signal. Frame times are
/// moved into the sensor's time base; `raw_frames` supplies the recorded frame
/// times for the `frame_ts_us` column (matched on frame index).
pub fn stage_annotate(
    frames: &SampleStream,
    raw_frames: Option<&SampleStream>,
    sensor: &ProcessedSignal,
    sensor_origin: StreamOrigin,
) -> anyhow::Result<Annotated> {
    let shift = frames.origin.offset_to(sensor_origin);
    let ts: Vec<Instant> = frames.timestamps.iter().map(|t| t + shift).collect();
    let (mut out, skipped_head) = annotate_frames(&ts, sensor)?;
    let raw_by_index: Option<HashMap<u64, Instant>> = raw_frames.map(|r| {
        let s = r.origin.offset_to(sensor_origin);
        (0..r.len())
            .map(|i| (r.index_of(i), r.timestamps[i] + s))
            .collect()
    });
    for a in &mut out {
        let pos = a.frame_index as usize;
        a.frame_index = frames.index_of(pos);
        if let Some(map) = &raw_by_index {
            a.raw_frame_ts = *map.get(&a.frame_index).ok_or_else(|| {
                anyhow::anyhow!("frame index {} missing from raw frames", a.frame_index)
            })?;
        }
    }
    Ok(Annotated {
        frames: out,
        skipped_head,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub mean_ms: f64,
    pub std_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamSummary {
    pub n_samples: usize,
    pub n_excluded_samples: usize,
    #[serde(rename = "T_s")]
    pub t_s: f64,
    pub rate_hz: f64,
    pub n_drops: usize,
    pub gaps_before: GapSummary,
    pub gaps_after: GapSummary,
    pub comparison: Vec<MethodRow>,
}

impl StreamSummary {
    fn new(d: &Dejittered) -> Self {
        StreamSummary {
            n_samples: d.stream.len(),
            n_excluded_samples: d.removed,
            t_s: d.report.t_s,
            rate_hz: d.report.rate_hz,
            n_drops: d.report.n_drops,
            gaps_before: d.report.gaps_before,
            gaps_after: d.report.gaps_after,
            comparison: method_rows(&d.comparison),
        }
    }
}

pub fn method_rows(c: &ComparisonReport) -> Vec<MethodRow> {
    c.rows()
        .iter()
        .map(|(name, g)| MethodRow {
            method: name.to_string(),
            mean_ms: g.mean_ms(),
            std_ms: g.std_ms(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub frames: StreamSummary,
    pub sensor: StreamSummary,
    pub sensor_fs_hz: f64,
    pub n_annotations: usize,
    pub skipped_head: usize,
}

pub const ANNOTATIONS: &str = "annotations.csv";
pub const FRAME_REPORT: &str = "frame_dejitter.json";
pub const SENSOR_REPORT: &str = "sensor_dejitter.json";
pub const PROCESSED: &str = "processed.csv";
pub const OVERLAY: &str = "overlay.csv";
pub const SUMMARY: &str = "summary.json";

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, StageError> {
    p.as_deref().ok_or_else(|| StageError {
        stage: "config",
        source: UsageError(format!("no {what} given")).into(),
    })
}

/// Runs every stage, then writes all artifacts. Nothing is written if any
/// stage fails.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Summary, StageError> {
    cfg.validate().stage("config")?;
    let frames_path = required(&cfg.frames, "frame file")?;
    let sensor_path = required(&cfg.sensor, "sensor file")?;
    let out_dir = required(&cfg.out_dir, "output directory")?;

    let raw_frames = load_stream(frames_path, StreamKind::Frame).stage("load")?;
    let raw_sensor = load_stream(sensor_path, StreamKind::Sensor).stage("load")?;

    let (fd, sd) = std::thread::scope(|s| {
        let f = s.spawn(|| {
            stage_dejitter(
                &raw_frames,
                cfg.frame_exclusions.as_deref(),
                &cfg.frame_dejitter,
                &cfg.kalman,
            )
        });
        let sd = stage_dejitter(
            &raw_sensor,
            cfg.sensor_exclusions.as_deref(),
            &cfg.sensor_dejitter,
            &cfg.kalman,
        );
        (f.join().expect("frame de-jitter thread panicked"), sd)
    });
    let fd = fd.stage("dejitter")?;
    let sd = sd.stage("dejitter")?;

    let filtered = stage_filter(&sd.stream, cfg.sensor_dejitter.m, &cfg.savgol, &cfg.bandpass)
        .stage("filter")?;
    let annotated = stage_annotate(
        &fd.stream,
        Some(&raw_frames),
        &filtered.signal,
        filtered.origin,
    )
    .stage("annotate")?;
    let overlay = overlay_export(&annotated.frames, &filtered.signal);

    let summary = Summary {
        frames: StreamSummary::new(&fd),
        sensor: StreamSummary::new(&sd),
        sensor_fs_hz: filtered.fs,
        n_annotations: annotated.frames.len(),
        skipped_head: annotated.skipped_head,
    };

    (|| -> anyhow::Result<()> {
        fs::create_dir_all(out_dir)?;
        write_json(out_dir.join(FRAME_REPORT), &fd.report)?;
        write_json(out_dir.join(SENSOR_REPORT), &sd.report)?;
        write_processed(
            out_dir.join(PROCESSED),
            &filtered.signal,
            &filtered.raw,
            filtered.origin,
        )?;
        write_overlay(out_dir.join(OVERLAY), &overlay, filtered.origin)?;
        write_annotations(out_dir.join(ANNOTATIONS), &annotated.frames, filtered.origin)?;
        write_json(out_dir.join(SUMMARY), &summary)?;
        Ok(())
    })()
    .stage("write")?;
    Ok(summary)
}

/// Ground truth written next to synthetic streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSidecar {
    pub config: SynthConfig,
    pub frames: StreamTruth,
    pub sensor: StreamTruth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamTruth {
    pub period_s: f64,
    pub epoch_us: i64,
    pub n_ideal: usize,
    pub n_emitted: usize,
    /// Ideal slots (`epoch + k * period`) that were dropped.
    pub dropped_slots: Vec<usize>,
    /// Absolute times of the dropped slots.
    pub dropped_us: Vec<i64>,
}

pub struct SynthOutput {
    pub frames: SampleStream,
    pub sensor: SampleStream,
    pub sidecar: SynthSidecar,
}

/// Camera and sensor recordings of the same synthetic pulse. The sensor
/// samples the pulse at its true capture instants; both streams then get
/// their own timestamp delays and drops.
pub fn synthesize(cfg: &SynthConfig) -> anyhow::Result<SynthOutput> {
    if !(cfg.fps > 0.0 && cfg.fs > 0.0 && cfg.duration_s > 0.0) {
        anyhow::bail!("fps, fs and duration must be positive");
    }
    let frame_model = JitterModel::half_normal_for_gap_std(
        1.0 / cfg.fps,
        cfg.frame_gap_std_ms / 1e3,
        cfg.frame_drop_rate,
        cfg.seed,
    );
    let sensor_model = JitterModel {
        period: 1.0 / cfg.fs,
        delay: DelayModel::Packetized {
            samples_per_packet: cfg.sensor_samples_per_packet,
            transport_sigma: cfg.sensor_transport_sigma_ms / 1e3,
        },
        drop_rate: cfg.sensor_drop_rate,
        seed: cfg.seed.wrapping_add(1),
    };
    let n_frames = (cfg.duration_s * cfg.fps).round() as usize;
    let n_sensor = ((cfg.duration_s + cfg.sensor_lead_s) * cfg.fs).round() as usize;
    let (f_raw, f_truth) = gen_timestamps(n_frames, &frame_model)?;
    let (s_raw, s_truth) = gen_timestamps(n_sensor, &sensor_model)?;
    let values = pulse_at(
        &s_truth.event_times,
        cfg.hr_bpm,
        cfg.noise_std,
        cfg.seed.wrapping_add(2),
    );

    let lead_us = (cfg.sensor_lead_s * 1e6).round() as i64;
    let sensor_epoch = cfg.epoch_us - lead_us;
    let to_us = |epoch: i64, ts: &[f64]| -> Vec<i64> {
        ts.iter().map(|t| epoch + (t * 1e6).round() as i64).collect()
    };
    let frames = SampleStream::from_absolute_us(
        StreamKind::Frame,
        &to_us(cfg.epoch_us, &f_raw),
        None,
        Some((0..f_raw.len() as u64).collect()),
    )?;
    let sensor = SampleStream::from_absolute_us(
        StreamKind::Sensor,
        &to_us(sensor_epoch, &s_raw),
        Some(values),
        None,
    )?;
    let truth = |period: f64, epoch: i64, n: usize, emitted: usize, dropped: &[usize]| {
        StreamTruth {
            period_s: period,
            epoch_us: epoch,
            n_ideal: n,
            n_emitted: emitted,
            dropped_slots: dropped.to_vec(),
            dropped_us: dropped
                .iter()
                .map(|&k| epoch + (k as f64 * period * 1e6).round() as i64)
                .collect(),
        }
    };
    let sidecar = SynthSidecar {
        config: cfg.clone(),
        frames: truth(
            frame_model.period,
            cfg.epoch_us,
            n_frames,
            f_raw.len(),
            &f_truth.dropped_indices,
        ),
        sensor: truth(
            sensor_model.period,
            sensor_epoch,
            n_sensor,
            s_raw.len(),
            &s_truth.dropped_indices,
        ),
    };
    Ok(SynthOutput {
        frames,
        sensor,
        sidecar,
    })
}

pub const SYNTH_FRAMES: &str = "frames.csv";
pub const SYNTH_SENSOR: &str = "sensor.csv";
pub const SYNTH_TRUTH: &str = "truth.json";

pub fn write_synth(out: &SynthOutput, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    write_stream(dir.join(SYNTH_FRAMES), &out.frames)?;
    write_stream(dir.join(SYNTH_SENSOR), &out.sensor)?;
    write_json(dir.join(SYNTH_TRUTH), &out.sidecar)?;
    Ok(())
}
