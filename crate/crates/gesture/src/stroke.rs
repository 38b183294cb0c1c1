//! Flow samples, strokes, idle-gap segmentation and the JSON-lines stream
//! format.
//!
//! A stream file holds one sample per line, `{"dx":int,"dy":int,"t":int}`.
//! Strokes are separated by a blank line and may start with a header line
//! carrying `label`, `device` and `user`.

use serde::{Deserialize, Serialize};

use crate::{GestureError, GestureResult};

pub const DEFAULT_IDLE_MS: u64 = 250;
pub const MIN_STROKE_SAMPLES: usize = 4;
pub const MAX_STROKE_MS: u64 = 10_000;

/// One sensor report: displacement counts since the previous report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSample {
    pub dx: i32,
    pub dy: i32,
    /// Milliseconds since stream start.
    pub t: u64,
}

impl FlowSample {
    pub fn new(dx: i32, dy: i32, t: u64) -> Self {
        Self { dx, dy, t }
    }

    pub fn is_still(&self) -> bool {
        self.dx == 0 && self.dy == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub samples: Vec<FlowSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Sensor the stroke was captured on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    /// Person who drew it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
}

impl Stroke {
    pub fn new(samples: Vec<FlowSample>) -> GestureResult<Self> {
        let s = Stroke {
            samples,
            label: None,
            device: None,
            user: None,
        };
        s.check()?;
        Ok(s)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn check(&self) -> GestureResult<()> {
        if self.samples.len() < MIN_STROKE_SAMPLES {
            return Err(GestureError::InvalidStroke(format!(
                "{} samples, need at least {MIN_STROKE_SAMPLES}",
                self.samples.len()
            )));
        }
        if let Some(w) = self.samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(GestureError::InvalidStroke(format!("time does not increase at sample {}", w + 1)));
        }
        let d = self.duration_ms();
        if d > MAX_STROKE_MS {
            return Err(GestureError::InvalidStroke(format!("lasts {d} ms, limit {MAX_STROKE_MS} ms")));
        }
        Ok(())
    }

    pub fn duration_ms(&self) -> u64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0,
        }
    }

    /// Integrated path, starting at the origin.
    pub fn path(&self) -> Vec<[f64; 2]> {
        let mut p = [0.0, 0.0];
        let mut out = Vec::with_capacity(self.samples.len() + 1);
        out.push(p);
        for s in &self.samples {
            p = [p[0] + s.dx as f64, p[1] + s.dy as f64];
            out.push(p);
        }
        out
    }
}

/// Splits a stream at every stillness of at least `idle_ms`. Stillness runs
/// from the last moving sample to the next one, so it covers both zero
/// reports and silent gaps. Runs shorter than four samples or longer than
/// the stroke limit are dropped.
pub fn segment(stream: &[FlowSample], idle_ms: u64) -> Vec<Stroke> {
    let idle_ms = idle_ms.max(1);
    let mut out = Vec::new();
    let mut run: Vec<FlowSample> = Vec::new();
    let mut flush = |run: &mut Vec<FlowSample>| {
        while run.last().is_some_and(FlowSample::is_still) {
            run.pop();
        }
        if let Ok(s) = Stroke::new(std::mem::take(run)) {
            out.push(s);
        }
    };
    let mut last_motion: Option<u64> = None;
    for s in stream {
        if s.is_still() {
            if !run.is_empty() {
                run.push(*s);
            }
            continue;
        }
        if last_motion.is_some_and(|t| s.t.saturating_sub(t) >= idle_ms) {
            flush(&mut run);
        }
        run.push(*s);
        last_motion = Some(s.t);
    }
    flush(&mut run);
    out
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Header {
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    device: Option<String>,
    #[serde(default)]
    user: Option<String>,
}

/// Reads strokes from the JSON-lines stream format.
pub fn parse_strokes(text: &str) -> GestureResult<Vec<Stroke>> {
    let mut out = Vec::new();
    let mut samples = Vec::new();
    let mut header = Header::default();
    let mut start = 0;
    let mut finish = |samples: &mut Vec<FlowSample>, header: &mut Header, start: usize| -> GestureResult<()> {
        if samples.is_empty() {
            if header.label.is_some() {
                return Err(GestureError::Parse {
                    line: start,
                    message: "stroke header without samples".into(),
                });
            }
            return Ok(());
        }
        let h = std::mem::take(header);
        let mut s = Stroke::new(std::mem::take(samples)).map_err(|e| GestureError::Parse {
            line: start,
            message: e.to_string(),
        })?;
        s.label = h.label;
        s.device = h.device;
        s.user = h.user;
        out.push(s);
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() {
            finish(&mut samples, &mut header, start)?;
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| GestureError::Parse {
            line: n,
            message: e.to_string(),
        })?;
        if samples.is_empty() && header.label.is_none() && header.device.is_none() {
            start = n;
        }
        if value.get("dx").is_some() {
            let s: FlowSample = serde_json::from_value(value).map_err(|e| GestureError::Parse {
                line: n,
                message: e.to_string(),
            })?;
            samples.push(s);
        } else if samples.is_empty() {
            header = serde_json::from_value(value).map_err(|e| GestureError::Parse {
                line: n,
                message: e.to_string(),
            })?;
        } else {
            return Err(GestureError::Parse {
                line: n,
                message: "header line inside a stroke; separate strokes with a blank line".into(),
            });
        }
    }
    finish(&mut samples, &mut header, start)?;
    Ok(out)
}

/// Reads every sample of a JSON-lines file as one continuous stream,
/// skipping header and blank lines. Timestamps must keep increasing.
pub fn parse_stream(text: &str) -> GestureResult<Vec<FlowSample>> {
    let mut out: Vec<FlowSample> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| GestureError::Parse {
            line: i + 1,
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(line).map_err(parse_err)?;
        if value.get("dx").is_none() {
            continue;
        }
        let s: FlowSample = serde_json::from_value(value).map_err(parse_err)?;
        if out.last().is_some_and(|p| s.t <= p.t) {
            return Err(GestureError::Parse {
                line: i + 1,
                message: format!("timestamp {} does not increase", s.t),
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// Writes strokes in the JSON-lines stream format.
pub fn write_strokes(strokes: &[Stroke]) -> String {
    let mut out = String::new();
    for (i, s) in strokes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if s.label.is_some() || s.device.is_some() || s.user.is_some() {
            let h = Header {
                label: s.label.clone(),
                device: s.device.clone(),
                user: s.user.clone(),
            };
            out.push_str(&serde_json::to_string(&h).expect("header serializes"));
            out.push('\n');
        }
        for f in &s.samples {
            out.push_str(&format!("{{\"dx\":{},\"dy\":{},\"t\":{}}}\n", f.dx, f.dy, f.t));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moving(t0: u64, n: u64, step: u64) -> Vec<FlowSample> {
        (0..n).map(|k| FlowSample::new(3, 1, t0 + k * step)).collect()
    }

    #[test]
    fn continuous_motion_is_one_stroke() {
        let s = segment(&moving(10, 50, 10), DEFAULT_IDLE_MS);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].samples.len(), 50);
    }

    #[test]
    fn still_gap_splits() {
        let mut stream = moving(0, 20, 10);
        // 400 ms of zero reports
        stream.extend((1..=40).map(|k| FlowSample::new(0, 0, 190 + k * 10)));
        stream.extend(moving(600, 20, 10));
        let s = segment(&stream, 250);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|s| s.samples.iter().all(|f| !f.is_still())));
        // a silent gap counts the same
        let mut gap = moving(0, 20, 10);
        gap.extend(moving(600, 20, 10));
        assert_eq!(segment(&gap, 250).len(), 2);
        assert_eq!(segment(&gap, 500).len(), 1);
    }

    #[test]
    fn still_stream_is_empty() {
        let stream: Vec<_> = (0..100).map(|k| FlowSample::new(0, 0, k * 10)).collect();
        assert!(segment(&stream, 250).is_empty());
    }

    #[test]
    fn short_runs_dropped() {
        let mut stream = moving(0, 3, 10);
        stream.extend(moving(1000, 6, 10));
        let s = segment(&stream, 250);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].samples[0].t, 1000);
    }

    #[test]
    fn stroke_invariants() {
        assert!(Stroke::new(moving(0, 3, 10)).is_err());
        let mut bad = moving(0, 5, 10);
        bad[3].t = bad[2].t;
        assert!(Stroke::new(bad).is_err());
        assert!(Stroke::new(moving(0, 5, 3000)).is_err());
        assert!(Stroke::new(moving(0, 5, 2500)).is_ok());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut a = Stroke::new(moving(0, 5, 10)).unwrap().with_label("swipe-right");
        a.device = Some("pad-1".into());
        let b = Stroke::new(moving(100, 6, 7)).unwrap();
        let text = write_strokes(&[a.clone(), b.clone()]);
        assert_eq!(parse_strokes(&text).unwrap(), vec![a, b]);
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = "{\"dx\":1,\"dy\":0,\"t\":1}\n{\"dx\":1,\"dy\":0,\"t\":2}\n{\"dx\":1,\"dy\":0}\n";
        match parse_strokes(text) {
            Err(GestureError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
