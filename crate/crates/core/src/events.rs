//! Event data model, CSV ingestion, fixed-rate windowing, and label
//! alignment.

use std::fmt::Write as _;
use std::path::Path;

/// One camera event. Timestamps are microseconds; polarity is +1 or -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub t: i64,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

/// An ordered event recording with its sensor resolution `(width, height)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub resolution: (u16, u16),
    pub events: Vec<Event>,
}

/// One label sample: timestamp, normalized pupil center, eye-closed flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelSample {
    pub t: i64,
    pub cx: f64,
    pub cy: f64,
    pub closed: bool,
}

/// Pupil-center labels normalized to [0,1] by the sensor resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTrack {
    pub rate_hz: u32,
    pub samples: Vec<LabelSample>,
}

impl LabelTrack {
    /// Label sampling period in microseconds.
    pub fn period_us(&self) -> i64 {
        1_000_000 / self.rate_hz as i64
    }
}

/// A half-open time span `[t_start, t_end)` and the events inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub t_start: i64,
    pub t_end: i64,
    pub resolution: (u16, u16),
    pub events: Vec<Event>,
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("window [{t_start}, {t_end}) lies beyond the label track's extent")]
    BeyondLabels { t_start: i64, t_end: i64 },
    #[error("{0}")]
    Invalid(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses event CSV text: one `t,x,y,p` record per line, `t` in ascending
/// microseconds, `p` in {1,-1}, coordinates inside `resolution`.
pub fn parse_events_str(text: &str, resolution: (u16, u16)) -> Result<EventStream, DataError> {
    let (w, h) = resolution;
    if w == 0 || h == 0 {
        return Err(DataError::Invalid("resolution must be positive".into()));
    }
    let mut events = Vec::new();
    let mut last_t = i64::MIN;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let t: i64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad timestamp field"))?;
        let x: u16 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad x field"))?;
        let y: u16 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad y field"))?;
        let p: i8 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad polarity field"))?;
        if parts.next().is_some() {
            return Err(parse_err(line_no, "expected exactly 4 fields"));
        }
        if t < 0 {
            return Err(parse_err(line_no, "timestamp must be non-negative"));
        }
        if t < last_t {
            return Err(parse_err(line_no, "timestamps must be non-decreasing"));
        }
        if x >= w {
            return Err(parse_err(line_no, format!("x {x} out of range (width {w})")));
        }
        if y >= h {
            return Err(parse_err(line_no, format!("y {y} out of range (height {h})")));
        }
        if p != 1 && p != -1 {
            return Err(parse_err(line_no, format!("polarity {p} must be 1 or -1")));
        }
        last_t = t;
        events.push(Event { t, x, y, p });
    }
    Ok(EventStream { resolution, events })
}

pub fn load_events<P: AsRef<Path>>(
    path: P,
    resolution: (u16, u16),
) -> Result<EventStream, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_events_str(&text, resolution)
}

pub fn events_to_csv(stream: &EventStream) -> String {
    let mut out = String::new();
    for e in &stream.events {
        writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p).unwrap();
    }
    out
}

pub fn save_events<P: AsRef<Path>>(path: P, stream: &EventStream) -> Result<(), DataError> {
    std::fs::write(path, events_to_csv(stream))?;
    Ok(())
}

/// Parses label CSV text: `t,cx,cy,closed` with `cx`,`cy` in pixel units of
/// `resolution` and `closed` in {0,1}. Centers are normalized to [0,1].
pub fn parse_labels_str(
    text: &str,
    resolution: (u16, u16),
    rate_hz: u32,
) -> Result<LabelTrack, DataError> {
    let (w, h) = resolution;
    if w == 0 || h == 0 {
        return Err(DataError::Invalid("resolution must be positive".into()));
    }
    if rate_hz == 0 || rate_hz > 1_000_000 {
        return Err(DataError::Invalid(format!(
            "label rate {rate_hz} Hz out of range"
        )));
    }
    let mut samples = Vec::new();
    let mut last_t = i64::MIN;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let t: i64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad timestamp field"))?;
        let cx_px: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad cx field"))?;
        let cy_px: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(line_no, "bad cy field"))?;
        let closed_raw = parts
            .next()
            .ok_or_else(|| parse_err(line_no, "missing closed field"))?
            .trim();
        if parts.next().is_some() {
            return Err(parse_err(line_no, "expected exactly 4 fields"));
        }
        let closed = match closed_raw {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line_no, format!("closed flag {other} must be 0 or 1"))),
        };
        if t < 0 {
            return Err(parse_err(line_no, "timestamp must be non-negative"));
        }
        if t < last_t {
            return Err(parse_err(line_no, "timestamps must be non-decreasing"));
        }
        if !cx_px.is_finite() || !cy_px.is_finite() {
            return Err(parse_err(line_no, "center must be finite"));
        }
        if !(0.0..=w as f64).contains(&cx_px) {
            return Err(parse_err(line_no, format!("cx {cx_px} out of range (width {w})")));
        }
        if !(0.0..=h as f64).contains(&cy_px) {
            return Err(parse_err(line_no, format!("cy {cy_px} out of range (height {h})")));
        }
        last_t = t;
        samples.push(LabelSample {
            t,
            cx: cx_px / w as f64,
            cy: cy_px / h as f64,
            closed,
        });
    }
    Ok(LabelTrack { rate_hz, samples })
}

pub fn load_labels<P: AsRef<Path>>(
    path: P,
    resolution: (u16, u16),
    rate_hz: u32,
) -> Result<LabelTrack, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_labels_str(&text, resolution, rate_hz)
}

/// Writes a label track back to pixel-unit CSV.
pub fn save_labels<P: AsRef<Path>>(
    path: P,
    track: &LabelTrack,
    resolution: (u16, u16),
) -> Result<(), DataError> {
    let (w, h) = resolution;
    let mut out = String::new();
    for s in &track.samples {
        writeln!(
            out,
            "{},{},{},{}",
            s.t,
            s.cx * w as f64,
            s.cy * h as f64,
            u8::from(s.closed)
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Cuts a stream into fixed-rate windows anchored at t = 0: window `k` spans
/// `[k*hop_us, k*hop_us + window_us)`. Enough windows are produced to cover
/// the last event; an empty stream yields no windows.
pub fn window_stream(stream: &EventStream, window_us: i64, hop_us: i64) -> Vec<Window> {
    window_stream_from(stream, 0, window_us, hop_us, None)
}

/// Windowing from an arbitrary origin (used by the temporal-shift
/// augmentation). Window `k` spans `[origin + k*hop_us, origin + k*hop_us +
/// window_us)`. When `count` is given, exactly that many windows are
/// produced; otherwise enough to cover the last event at or after `origin`.
pub fn window_stream_from(
    stream: &EventStream,
    origin: i64,
    window_us: i64,
    hop_us: i64,
    count: Option<usize>,
) -> Vec<Window> {
    assert!(window_us > 0, "window_us must be positive");
    assert!(hop_us > 0, "hop_us must be positive");
    let n = match count {
        Some(n) => n,
        None => {
            let last = match stream.events.iter().rev().find(|e| e.t >= origin) {
                Some(e) => e.t,
                None => return Vec::new(),
            };
            ((last - origin) / hop_us) as usize + 1
        }
    };

    let ts: Vec<i64> = stream.events.iter().map(|e| e.t).collect();
    let mut windows = Vec::with_capacity(n);
    for k in 0..n {
        let t_start = origin + k as i64 * hop_us;
        let t_end = t_start + window_us;
        let lo = ts.partition_point(|&t| t < t_start);
        let hi = ts.partition_point(|&t| t < t_end);
        windows.push(Window {
            t_start,
            t_end,
            resolution: stream.resolution,
            events: stream.events[lo..hi].to_vec(),
        });
    }
    windows
}

/// Index of the track sample nearest to `t`, ties resolved toward the
/// earlier sample. `None` on an empty track.
fn nearest_sample(track: &LabelTrack, t: i64) -> Option<usize> {
    if track.samples.is_empty() {
        return None;
    }
    let idx = track.samples.partition_point(|s| s.t < t);
    if idx == 0 {
        return Some(0);
    }
    if idx == track.samples.len() {
        return Some(track.samples.len() - 1);
    }
    let before = &track.samples[idx - 1];
    let after = &track.samples[idx];
    // Strictly-closer wins; the exact midpoint keeps the earlier sample.
    if (t - before.t) <= (after.t - t) {
        Some(idx - 1)
    } else {
        Some(idx)
    }
}

/// One label per window: the sample nearest to the window's `t_end` (ties
/// toward the earlier sample). A window whose `t_end` has no sample within
/// one label period is beyond the track's extent and errors.
pub fn align_labels(
    track: &LabelTrack,
    windows: &[Window],
    out_rate_hz: u32,
) -> Result<Vec<LabelSample>, DataError> {
    assert!(out_rate_hz > 0, "output rate must be positive");
    assert!(
        track.rate_hz % out_rate_hz == 0,
        "output rate {out_rate_hz} Hz must divide the track rate {} Hz",
        track.rate_hz
    );
    let period = track.period_us();
    let mut out = Vec::with_capacity(windows.len());
    for wdw in windows {
        let idx = nearest_sample(track, wdw.t_end).ok_or(DataError::BeyondLabels {
            t_start: wdw.t_start,
            t_end: wdw.t_end,
        })?;
        let s = track.samples[idx];
        if (s.t - wdw.t_end).abs() > period {
            return Err(DataError::BeyondLabels {
                t_start: wdw.t_start,
                t_end: wdw.t_end,
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// Label for each window like [`align_labels`], but windows beyond the
/// track's extent take the nearest (first/last) sample instead of erroring —
/// the behaviour wanted when a temporal shift pushes a window slightly past
/// the recording's edge.
pub fn align_labels_clamped(track: &LabelTrack, windows: &[Window]) -> Vec<LabelSample> {
    windows
        .iter()
        .map(|w| {
            let idx = nearest_sample(track, w.t_end).expect("label track must be non-empty");
            track.samples[idx]
        })
        .collect()
}
