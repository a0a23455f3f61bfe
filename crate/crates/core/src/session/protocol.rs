//! Newline-delimited JSON wire format for contact events and stimulus
//! commands.
//!
//! One object per line, compact, fields in the order
//! `seq, t_ms, kind, material, stimulus`; absent optionals are omitted.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::types::{Material, StimulusLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    ContactBegin,
    ContactEnd,
    StimulusCmd,
    Ack,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEvent {
    pub seq: u64,
    /// Sender-relative milliseconds since session start.
    pub t_ms: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<StimulusLabel>,
}

impl SessionEvent {
    pub fn new(seq: u64, t_ms: u64, kind: EventKind) -> Self {
        SessionEvent {
            seq,
            t_ms,
            kind,
            material: None,
            stimulus: None,
        }
    }

    pub fn contact_begin(seq: u64, t_ms: u64, material: Material) -> Self {
        Self::new(seq, t_ms, EventKind::ContactBegin).with_material(material)
    }

    pub fn contact_end(seq: u64, t_ms: u64) -> Self {
        Self::new(seq, t_ms, EventKind::ContactEnd)
    }

    pub fn command(seq: u64, t_ms: u64, stimulus: StimulusLabel) -> Self {
        Self::new(seq, t_ms, EventKind::StimulusCmd).with_stimulus(stimulus)
    }

    pub fn with_material(mut self, material: Material) -> Self {
        self.material = Some(material);
        self
    }

    pub fn with_stimulus(mut self, stimulus: StimulusLabel) -> Self {
        self.stimulus = Some(stimulus);
        self
    }

    /// A stop is a command for `N`.
    pub fn is_stop(&self) -> bool {
        self.kind == EventKind::StimulusCmd && self.stimulus == Some(StimulusLabel::N)
    }

    /// Kind-specific payload rules.
    pub fn check(&self) -> Result<(), ProtocolError> {
        match self.kind {
            EventKind::ContactBegin if self.material.is_none() => {
                Err(ProtocolError::MissingField("material"))
            }
            EventKind::StimulusCmd if self.stimulus.is_none() => {
                Err(ProtocolError::MissingField("stimulus"))
            }
            _ => Ok(()),
        }
    }

    /// Canonical single-line encoding without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

impl fmt::Display for SessionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("line is not valid UTF-8")]
    Utf8,
}

/// Decodes one line (a trailing `\n` / `\r\n` is ignored).
pub fn decode(line: &str) -> Result<SessionEvent, ProtocolError> {
    let line = line.trim_end_matches(['\n', '\r']);
    let ev: SessionEvent =
        serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    ev.check()?;
    Ok(ev)
}

/// Decodes raw bytes of one line.
pub fn decode_bytes(bytes: &[u8]) -> Result<SessionEvent, ProtocolError> {
    let s = std::str::from_utf8(bytes).map_err(|_| ProtocolError::Utf8)?;
    decode(s)
}

pub fn write_event<W: Write>(w: &mut W, ev: &SessionEvent) -> std::io::Result<()> {
    w.write_all(ev.encode().as_bytes())?;
    w.write_all(b"\n")
}

/// Line reader that never stops on bad input: every line yields either an
/// event or the decode error. Blank lines are skipped.
pub struct EventReader<R> {
    inner: R,
    buf: Vec<u8>,
    line_no: u64,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(inner: R) -> Self {
        EventReader {
            inner,
            buf: Vec::new(),
            line_no: 0,
        }
    }

    pub fn line_no(&self) -> u64 {
        self.line_no
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = std::io::Result<Result<SessionEvent, ProtocolError>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line_no += 1;
                    if self.buf.iter().all(|b| b.is_ascii_whitespace()) {
                        continue;
                    }
                    return Some(Ok(decode_bytes(&self.buf)));
                }
                Err(e) => return Some(Err(e)),
            }
        }
    }
}
