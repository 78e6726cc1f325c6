//! Stream files: loading, origin normalization, exclusion masks and output writers.
//!
//! Times are stored on disk as integer microseconds and held in memory as `f64`
//! seconds relative to the first sample of the stream.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::{AnnotatedFrame, OverlayRow};
use crate::error::{Error, Result};
use crate::sigproc::ProcessedSignal;

/// Seconds relative to a stream origin.
pub type Instant = f64;

const US_PER_S: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Frame,
    Sensor,
}

impl StreamKind {
    fn header(self) -> &'static [&'static str] {
        match self {
            StreamKind::Frame => &["index", "ts_us"],
            StreamKind::Sensor => &["ts_us", "value"],
        }
    }
}

impl FromStr for StreamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame" | "frames" => Ok(StreamKind::Frame),
            "sensor" => Ok(StreamKind::Sensor),
            other => Err(Error::InvalidConfig(format!("unknown stream kind `{other}`"))),
        }
    }
}

/// Absolute time of a stream's first raw sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamOrigin {
    pub epoch_us: i64,
}

impl StreamOrigin {
    pub fn new(epoch_us: i64) -> Self {
        StreamOrigin { epoch_us }
    }

    pub fn to_absolute_us(self, t: Instant) -> i64 {
        self.epoch_us + (t * US_PER_S).round() as i64
    }

    pub fn to_relative(self, abs_us: i64) -> Instant {
        (abs_us - self.epoch_us) as f64 / US_PER_S
    }

    /// Seconds to add to a time relative to `self` to express it relative to `other`.
    pub fn offset_to(self, other: StreamOrigin) -> f64 {
        (self.epoch_us - other.epoch_us) as f64 / US_PER_S
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub kind: StreamKind,
    pub origin: StreamOrigin,
    pub timestamps: Vec<Instant>,
    /// Signal values (sensor streams only).
    pub values: Option<Vec<f64>>,
    /// Frame indices as recorded (frame streams only).
    pub indices: Option<Vec<u64>>,
}

impl SampleStream {
    /// Builds a stream from absolute microsecond timestamps; the first one becomes the origin.
    pub fn from_absolute_us(
        kind: StreamKind,
        ts_us: &[i64],
        values: Option<Vec<f64>>,
        indices: Option<Vec<u64>>,
    ) -> Result<Self> {
        let first = *ts_us.first().ok_or(Error::TooShort {
            needed: 2,
            got: 0,
        })?;
        Self::with_origin(kind, StreamOrigin::new(first), ts_us, values, indices)
    }

    /// Builds a stream from absolute timestamps against an explicit origin.
    pub fn with_origin(
        kind: StreamKind,
        origin: StreamOrigin,
        ts_us: &[i64],
        values: Option<Vec<f64>>,
        indices: Option<Vec<u64>>,
    ) -> Result<Self> {
        if let Some(pos) = ts_us.windows(2).position(|w| w[1] < w[0]) {
            // header is line 1, sample i is on line i + 2
            return Err(Error::DecreasingTimestamp {
                line: pos as u64 + 3,
            });
        }
        let timestamps = ts_us.iter().map(|&us| origin.to_relative(us)).collect();
        let stream = SampleStream {
            kind,
            origin,
            timestamps,
            values,
            indices,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.timestamps.len();
        if n < 2 {
            return Err(Error::TooShort { needed: 2, got: n });
        }
        if self.timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Degenerate("non-finite timestamp".into()));
        }
        if let Some(pos) = self.timestamps.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::DecreasingTimestamp {
                line: pos as u64 + 3,
            });
        }
        if let Some(v) = &self.values {
            if v.len() != n {
                return Err(Error::Degenerate(format!(
                    "{} values for {n} timestamps",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Degenerate("non-finite signal value".into()));
            }
        }
        if let Some(ix) = &self.indices {
            if ix.len() != n {
                return Err(Error::Degenerate(format!(
                    "{} frame indices for {n} timestamps",
                    ix.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn absolute_us(&self) -> Vec<i64> {
        self.timestamps
            .iter()
            .map(|&t| self.origin.to_absolute_us(t))
            .collect()
    }

    /// Frame index of sample `i`, falling back to the position in the stream.
    pub fn index_of(&self, i: usize) -> u64 {
        self.indices.as_ref().map_or(i as u64, |ix| ix[i])
    }

    /// Same samples, new timestamps (kept relative to the same origin).
    pub fn with_timestamps(&self, timestamps: Vec<Instant>) -> Result<Self> {
        let s = SampleStream {
            timestamps,
            ..self.clone()
        };
        s.validate()?;
        Ok(s)
    }

    /// Rounds every timestamp through the on-disk microsecond representation.
    pub fn quantized(&self) -> Result<Self> {
        let us = self.absolute_us();
        Self::with_origin(
            self.kind,
            self.origin,
            &us,
            self.values.clone(),
            self.indices.clone(),
        )
    }
}

/// Half-open `[start, end)` intervals, in stream-relative seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExclusionList {
    intervals: Vec<(Instant, Instant)>,
}

impl ExclusionList {
    /// Sorts and merges overlapping (or touching) intervals.
    pub fn new(mut intervals: Vec<(Instant, Instant)>) -> Result<Self> {
        if let Some(&(s, e)) = intervals.iter().find(|(s, e)| !(s < e)) {
            return Err(Error::InvalidConfig(format!(
                "exclusion interval [{s}, {e}) is empty or reversed"
            )));
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(Instant, Instant)> = Vec::with_capacity(intervals.len());
        for (s, e) in intervals {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        Ok(ExclusionList { intervals: merged })
    }

    pub fn intervals(&self) -> &[(Instant, Instant)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: Instant) -> bool {
        let i = self.intervals.partition_point(|&(s, _)| s <= t);
        i > 0 && t < self.intervals[i - 1].1
    }
}

/// Drops every sample that falls inside an exclusion interval.
pub fn apply_exclusions(
    stream: &SampleStream,
    excl: &ExclusionList,
) -> Result<(SampleStream, usize)> {
    if excl.is_empty() {
        return Ok((stream.clone(), 0));
    }
    let keep: Vec<usize> = (0..stream.len())
        .filter(|&i| !excl.contains(stream.timestamps[i]))
        .collect();
    if keep.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: keep.len(),
        });
    }
    let pick = |v: &Vec<f64>| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let out = SampleStream {
        kind: stream.kind,
        origin: stream.origin,
        timestamps: pick(&stream.timestamps),
        values: stream.values.as_ref().map(pick),
        indices: stream
            .indices
            .as_ref()
            .map(|ix| keep.iter().map(|&i| ix[i]).collect()),
    };
    let removed = stream.len() - out.len();
    Ok((out, removed))
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let got = rdr.headers()?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header `{}`, got `{}`", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(rdr)
}

fn for_each_row(
    path: &Path,
    header: &[&str],
    mut f: impl FnMut(u64, &csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<()> {
    let mut rdr = open_csv(path, header)?;
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        if !more {
            return Ok(());
        }
        let line = rec.position().map_or(0, |p| p.line());
        f(line, &rec).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })?;
    }
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> std::result::Result<T, String> {
    let raw = rec.get(i).ok_or_else(|| format!("missing `{name}`"))?;
    raw.parse()
        .map_err(|_| format!("cannot parse `{name}` from `{raw}`"))
}

/// Reads a frame (`index,ts_us`) or sensor (`ts_us,value`) CSV.
pub fn load_stream(path: impl AsRef<Path>, kind: StreamKind) -> Result<SampleStream> {
    let path = path.as_ref();
    let mut ts = Vec::new();
    let mut lines = Vec::new();
    let mut values = Vec::new();
    let mut indices = Vec::new();
    for_each_row(path, kind.header(), |line, rec| {
        match kind {
            StreamKind::Frame => {
                indices.push(field::<u64>(rec, 0, "index")?);
                ts.push(field::<i64>(rec, 1, "ts_us")?);
            }
            StreamKind::Sensor => {
                ts.push(field::<i64>(rec, 0, "ts_us")?);
                let v: f64 = field(rec, 1, "value")?;
                if !v.is_finite() {
                    return Err(format!("non-finite value `{v}`"));
                }
                values.push(v);
            }
        }
        lines.push(line);
        Ok(())
    })?;
    if let Some(pos) = ts.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::DecreasingTimestamp {
            line: lines[pos + 1],
        });
    }
    let (values, indices) = match kind {
        StreamKind::Frame => (None, Some(indices)),
        StreamKind::Sensor => (Some(values), None),
    };
    SampleStream::from_absolute_us(kind, &ts, values, indices)
}

/// Writes to a sibling temp file and renames it into place.
pub fn write_atomic(
    path: impl AsRef<Path>,
    f: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let path = path.as_ref();
    let tmp = tmp_path(path);
    let res = (|| {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
        w.get_ref().sync_all().map_err(|e| Error::io(&tmp, e))?;
        Ok(())
    })();
    match res {
        Ok(()) => fs::rename(&tmp, path).map_err(|e| Error::io(path, e)),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().from_writer(w)
}

pub fn write_stream(path: impl AsRef<Path>, stream: &SampleStream) -> Result<()> {
    let abs = stream.absolute_us();
    write_atomic(path, |w| {
        let mut wr = csv_writer(w);
        wr.write_record(stream.kind.header())?;
        for (i, us) in abs.iter().enumerate() {
            match stream.kind {
                StreamKind::Frame => {
                    wr.write_record([stream.index_of(i).to_string(), us.to_string()])?
                }
                StreamKind::Sensor => {
                    let v = stream.values.as_ref().map_or(0.0, |v| v[i]);
                    wr.write_record([us.to_string(), v.to_string()])?
                }
            }
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    })
}

/// Exclusion CSV: `start_us,end_us`, stream-relative microseconds.
pub fn load_exclusions(path: impl AsRef<Path>) -> Result<ExclusionList> {
    let path = path.as_ref();
    let mut iv = Vec::new();
    for_each_row(path, &["start_us", "end_us"], |_, rec| {
        let s: i64 = field(rec, 0, "start_us")?;
        let e: i64 = field(rec, 1, "end_us")?;
        if s >= e {
            return Err(format!("start_us {s} is not before end_us {e}"));
        }
        iv.push((s as f64 / US_PER_S, e as f64 / US_PER_S));
        Ok(())
    })?;
    ExclusionList::new(iv)
}

/// One line of the annotation CSV. Times are absolute microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub frame_index: u64,
    pub frame_ts_us: i64,
    pub dejittered_ts_us: i64,
    pub label: f64,
    pub sensor_ts_us: i64,
}

impl AnnotationRow {
    /// `origin` is the time base the annotation instants are expressed in.
    pub fn from_frame(a: &AnnotatedFrame, origin: StreamOrigin) -> Self {
        AnnotationRow {
            frame_index: a.frame_index,
            frame_ts_us: origin.to_absolute_us(a.raw_frame_ts),
            dejittered_ts_us: origin.to_absolute_us(a.frame_ts),
            label: a.label,
            sensor_ts_us: origin.to_absolute_us(a.sensor_ts),
        }
    }
}

const ANNOTATION_HEADER: [&str; 5] = [
    "frame_index",
    "frame_ts_us",
    "dejittered_ts_us",
    "label",
    "sensor_ts_us",
];

pub fn write_annotations(
    path: impl AsRef<Path>,
    annotations: &[AnnotatedFrame],
    origin: StreamOrigin,
) -> Result<()> {
    if annotations.is_empty() {
        return Err(Error::Empty("annotation sequence"));
    }
    write_atomic(path, |w| {
        let mut wr = csv_writer(w);
        for a in annotations {
            wr.serialize(AnnotationRow::from_frame(a, origin))?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    })
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRow>> {
    let path = path.as_ref();
    let mut rows = Vec::new();
    for_each_row(path, &ANNOTATION_HEADER, |_, rec| {
        rows.push(AnnotationRow {
            frame_index: field(rec, 0, "frame_index")?,
            frame_ts_us: field(rec, 1, "frame_ts_us")?,
            dejittered_ts_us: field(rec, 2, "dejittered_ts_us")?,
            label: field(rec, 3, "label")?,
            sensor_ts_us: field(rec, 4, "sensor_ts_us")?,
        });
        Ok(())
    })?;
    Ok(rows)
}

/// Processed-signal CSV: `ts_us,raw,smoothed,filtered`.
pub fn write_processed(
    path: impl AsRef<Path>,
    signal: &ProcessedSignal,
    raw: &[f64],
    origin: StreamOrigin,
) -> Result<()> {
    if raw.len() != signal.timestamps.len() {
        return Err(Error::Degenerate("raw/processed length mismatch".into()));
    }
    write_atomic(path, |w| {
        let mut wr = csv_writer(w);
        wr.write_record(["ts_us", "raw", "smoothed", "filtered"])?;
        for i in 0..raw.len() {
            wr.write_record([
                origin.to_absolute_us(signal.timestamps[i]).to_string(),
                raw[i].to_string(),
                signal.smoothed[i].to_string(),
                signal.filtered[i].to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    })
}

/// Reads a processed-signal CSV back. The first row's time becomes the origin.
pub fn load_processed(path: impl AsRef<Path>) -> Result<(ProcessedSignal, Vec<f64>, StreamOrigin)> {
    let path = path.as_ref();
    let (mut ts, mut raw, mut sm, mut fl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for_each_row(path, &["ts_us", "raw", "smoothed", "filtered"], |_, rec| {
        ts.push(field::<i64>(rec, 0, "ts_us")?);
        raw.push(field::<f64>(rec, 1, "raw")?);
        sm.push(field::<f64>(rec, 2, "smoothed")?);
        fl.push(field::<f64>(rec, 3, "filtered")?);
        Ok(())
    })?;
    let first = *ts.first().ok_or(Error::TooShort { needed: 1, got: 0 })?;
    let origin = StreamOrigin::new(first);
    let signal = ProcessedSignal {
        timestamps: ts.iter().map(|&us| origin.to_relative(us)).collect(),
        smoothed: sm,
        filtered: fl,
    };
    Ok((signal, raw, origin))
}

/// Overlay CSV: `series,t_us,value`.
pub fn write_overlay(path: impl AsRef<Path>, rows: &[OverlayRow], origin: StreamOrigin) -> Result<()> {
    write_atomic(path, |w| {
        let mut wr = csv_writer(w);
        wr.write_record(["series", "t_us", "value"])?;
        for r in rows {
            wr.write_record([
                r.series.as_str().to_string(),
                origin.to_absolute_us(r.t).to_string(),
                r.value.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io("<json>", e))?;
        Ok(())
    })
}
