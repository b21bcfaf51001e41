//! Line codec for per-channel telemetry: `t=<ms> ch=<id> v=<counts> f=<raw|filtered>`.

use std::fmt;
use std::path::Path;

use super::{check_header, read_text, version_header, HarnessError};
use crate::ADC_MAX;

pub const FRAME_KIND: &str = "circumsense-frames";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Raw,
    Filtered,
}

impl FrameKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameKind::Raw => "raw",
            FrameKind::Filtered => "filtered",
        }
    }
}

/// One channel sample. Raw values are whole ADC counts; filtered values may
/// be fractional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamFrame {
    pub timestamp: u64,
    pub channel: u8,
    pub value: f64,
    pub kind: FrameKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameError {
    OutOfRange(f64),
    Fractional(f64),
    Malformed(String),
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::OutOfRange(v) => write!(f, "value {v} outside 0..={ADC_MAX}"),
            FrameError::Fractional(v) => write!(f, "raw value {v} is not a whole count"),
            FrameError::Malformed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for FrameError {}

impl StreamFrame {
    pub fn raw(timestamp: u64, channel: u8, counts: u16) -> Self {
        Self { timestamp, channel, value: counts as f64, kind: FrameKind::Raw }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if !(0.0..=ADC_MAX as f64).contains(&self.value) {
            return Err(FrameError::OutOfRange(self.value));
        }
        if self.kind == FrameKind::Raw && self.value.fract() != 0.0 {
            return Err(FrameError::Fractional(self.value));
        }
        Ok(())
    }
}

/// Shortest decimal form that parses back to the same value.
pub fn encode_frame(f: &StreamFrame) -> Result<String, FrameError> {
    f.validate()?;
    Ok(format!("t={} ch={} v={} f={}", f.timestamp, f.channel, f.value, f.kind.as_str()))
}

pub fn decode_frame(line: &str) -> Result<StreamFrame, FrameError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [t, ch, v, kind] = fields[..] else {
        return Err(FrameError::Malformed(format!("expected 4 fields, got {}", fields.len())));
    };
    let field = |s: &'static str, tok: &str| -> Result<String, FrameError> {
        tok.strip_prefix(s)
            .map(str::to_string)
            .ok_or_else(|| FrameError::Malformed(format!("expected `{s}...`, got `{tok}`")))
    };
    let bad = |what: &str, s: &str| FrameError::Malformed(format!("bad {what} `{s}`"));
    let t = field("t=", t)?;
    let ch = field("ch=", ch)?;
    let v = field("v=", v)?;
    let kind = match field("f=", kind)?.as_str() {
        "raw" => FrameKind::Raw,
        "filtered" => FrameKind::Filtered,
        other => return Err(bad("flag", other)),
    };
    let frame = StreamFrame {
        timestamp: t.parse().map_err(|_| bad("timestamp", &t))?,
        channel: ch.parse().map_err(|_| bad("channel", &ch))?,
        value: v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad("value", &v))?,
        kind,
    };
    frame.validate()?;
    Ok(frame)
}

pub fn frames_to_text(frames: &[StreamFrame]) -> Result<String, FrameError> {
    let mut out = version_header(FRAME_KIND);
    out.push('\n');
    for f in frames {
        out.push_str(&encode_frame(f)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse a frame file; each frame comes with its 1-based line number.
/// Blank lines and `#` comments after the header are skipped.
pub fn frames_from_text(text: &str, context: &str) -> Result<Vec<(usize, StreamFrame)>, HarnessError> {
    let mut lines = text.lines();
    check_header(FRAME_KIND, context, lines.next())?;
    let mut frames = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f = decode_frame(trimmed).map_err(|e| HarnessError::parse(context, n, e.to_string()))?;
        frames.push((n, f));
    }
    Ok(frames)
}

pub fn read_frames(path: &Path) -> Result<Vec<(usize, StreamFrame)>, HarnessError> {
    frames_from_text(&read_text(path)?, &path.display().to_string())
}

pub fn write_frames(path: &Path, frames: &[StreamFrame]) -> Result<(), HarnessError> {
    let text = frames_to_text(frames).map_err(|e| HarnessError::Format(e.to_string()))?;
    super::write_atomic(path, text.as_bytes())
}
