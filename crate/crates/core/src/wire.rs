//! Newline-delimited JSON codec for host/player traffic.
//!
//! Every message is one JSON object on one line. The first key is `"t"`,
//! the variant tag; ticks and seeds are decimal integers and nothing on the
//! wire is floating point. Decoding is strict: unknown tags, unknown or
//! missing fields, wrong types and out-of-domain values are all rejected
//! with the name of the offending field.

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{MeasurementTable, SettingLabel, SettingVector, Sign, StationRole, Tick};
use crate::schedule::Schedule;

pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on one encoded frame, LF included.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

/// One station's report for one coincidence round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct MeasurementRecord {
    pub role: StationRole,
    pub window_index: usize,
    pub round: u32,
    pub label: SettingLabel,
    pub value: Sign,
    pub tick: Tick,
}

/// How a player learns its table row at launch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LaunchTable {
    /// The addressed player's row, inline.
    #[serde(rename = "row")]
    Row(MeasurementTable),
    /// A table compiled into the player, looked up by name.
    #[serde(rename = "table_id")]
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum Message {
    Hello {
        role: StationRole,
        proto: u32,
    },
    Welcome {
        role: StationRole,
    },
    Launch {
        schedule: Schedule,
        #[serde(flatten)]
        table: LaunchTable,
    },
    Data(MeasurementRecord),
    Done {
        role: StationRole,
    },
    #[serde(rename = "error")]
    ProtocolError {
        text: String,
    },
}

impl Message {
    pub fn tag(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Welcome { .. } => "welcome",
            Message::Launch { .. } => "launch",
            Message::Data(_) => "data",
            Message::Done { .. } => "done",
            Message::ProtocolError { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame not terminated by LF")]
    Truncated,
    #[error("LF inside frame body")]
    EmbeddedNewline,
    #[error("frame exceeds {MAX_FRAME_BYTES} bytes")]
    TooLong,
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("frame is not a JSON object")]
    NotAnObject,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("invalid field {field:?}: {reason}")]
    Validation { field: String, reason: String },
}

impl WireError {
    pub fn is_frame(&self) -> bool {
        matches!(self, WireError::Frame(_))
    }

    /// Name of the offending field for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            WireError::Validation { field, .. } => Some(field),
            WireError::Frame(_) => None,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> WireError {
    WireError::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Encodes `m` as one LF-terminated JSON line.
pub fn encode_message(m: &Message) -> Vec<u8> {
    let mut out = serde_json::to_vec(m).expect("message serialization is infallible");
    out.push(b'\n');
    out
}

/// Decodes exactly one LF-terminated frame.
pub fn decode_message(bytes: &[u8]) -> Result<Message, WireError> {
    let body = bytes.strip_suffix(b"\n").ok_or(FrameError::Truncated)?;
    if bytes.len() > MAX_FRAME_BYTES {
        return Err(FrameError::TooLong.into());
    }
    if body.contains(&b'\n') {
        return Err(FrameError::EmbeddedNewline.into());
    }
    let value: Value =
        serde_json::from_slice(body).map_err(|e| FrameError::Malformed(e.to_string()))?;
    decode_value(&value)
}

/// Decodes a message already parsed into a JSON value.
pub fn decode_value(value: &Value) -> Result<Message, WireError> {
    let obj = value.as_object().ok_or(FrameError::NotAnObject)?;
    let tag = match obj.get("t") {
        None => return Err(invalid("t", "missing")),
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(invalid("t", "expected a string")),
    };
    let fields = Fields { obj };
    match tag {
        "hello" => {
            fields.only(&["role", "proto"])?;
            let proto = fields.u64("proto")?;
            let proto = u32::try_from(proto).map_err(|_| invalid("proto", "out of range"))?;
            Ok(Message::Hello {
                role: fields.role("role")?,
                proto,
            })
        }
        "welcome" => {
            fields.only(&["role"])?;
            Ok(Message::Welcome {
                role: fields.role("role")?,
            })
        }
        "done" => {
            fields.only(&["role"])?;
            Ok(Message::Done {
                role: fields.role("role")?,
            })
        }
        "error" => {
            fields.only(&["text"])?;
            Ok(Message::ProtocolError {
                text: fields.string("text")?.to_string(),
            })
        }
        "data" => {
            fields.only(&["role", "window_index", "round", "label", "value", "tick"])?;
            Ok(Message::Data(fields.record()?))
        }
        "launch" => {
            fields.only(&["schedule", "row", "table_id"])?;
            let schedule = Schedule::deserialize(fields.required("schedule")?)
                .map_err(|e| invalid("schedule", e.to_string()))?;
            let table = match (obj.get("row"), obj.get("table_id")) {
                (Some(row), None) => LaunchTable::Row(
                    MeasurementTable::deserialize(row).map_err(|e| invalid("row", e.to_string()))?,
                ),
                (None, Some(_)) => LaunchTable::Named(fields.string("table_id")?.to_string()),
                (Some(_), Some(_)) => {
                    return Err(invalid("table_id", "row and table_id are exclusive"))
                }
                (None, None) => return Err(invalid("row", "missing")),
            };
            Ok(Message::Launch { schedule, table })
        }
        other => Err(invalid("t", format!("unknown tag {other:?}"))),
    }
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn only(&self, allowed: &[&str]) -> Result<(), WireError> {
        match self
            .obj
            .keys()
            .find(|k| k.as_str() != "t" && !allowed.contains(&k.as_str()))
        {
            Some(k) => Err(invalid(k, "unexpected field")),
            None => Ok(()),
        }
    }

    fn required(&self, name: &str) -> Result<&'a Value, WireError> {
        self.obj.get(name).ok_or_else(|| invalid(name, "missing"))
    }

    fn u64(&self, name: &str) -> Result<u64, WireError> {
        self.required(name)?
            .as_u64()
            .ok_or_else(|| invalid(name, "expected a non-negative integer"))
    }

    fn i64(&self, name: &str) -> Result<i64, WireError> {
        self.required(name)?
            .as_i64()
            .ok_or_else(|| invalid(name, "expected an integer"))
    }

    fn string(&self, name: &str) -> Result<&'a str, WireError> {
        self.required(name)?
            .as_str()
            .ok_or_else(|| invalid(name, "expected a string"))
    }

    fn role(&self, name: &str) -> Result<StationRole, WireError> {
        StationRole::try_from(self.i64(name)?).map_err(|e| invalid(name, e.to_string()))
    }

    fn record(&self) -> Result<MeasurementRecord, WireError> {
        let role = self.role("role")?;
        let window_index = self.u64("window_index")?;
        let setting = usize::try_from(window_index)
            .ok()
            .and_then(|w| SettingVector::STANDARD_ORDER.get(w))
            .ok_or_else(|| invalid("window_index", "expected 0..=3"))?;
        let round = u32::try_from(self.u64("round")?)
            .map_err(|_| invalid("round", "out of range"))?;
        let label: SettingLabel = self
            .string("label")?
            .parse()
            .map_err(|e: crate::model::ModelError| invalid("label", e.to_string()))?;
        if label != setting.label_for(role) {
            return Err(invalid(
                "label",
                format!("station {role} measures {} in window {setting}", setting.label_for(role)),
            ));
        }
        let value = Sign::try_from(self.i64("value")?).map_err(|e| invalid("value", e.to_string()))?;
        let tick = Tick(self.u64("tick")?);
        Ok(MeasurementRecord {
            role,
            window_index: window_index as usize,
            round,
            label,
            value,
            tick,
        })
    }
}

impl<'de> Deserialize<'de> for Message {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        decode_value(&value).map_err(de::Error::custom)
    }
}

/// Incremental splitter of a byte stream into LF-terminated frames.
///
/// Bytes can arrive in arbitrary chunks; a frame is yielded only once its
/// terminating LF has been seen.
#[derive(Debug, Default)]
pub struct FrameBuffer {
    buf: Vec<u8>,
}

impl FrameBuffer {
    pub fn new() -> FrameBuffer {
        FrameBuffer::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete frame, LF included.
    pub fn next_frame(&mut self) -> Option<Vec<u8>> {
        let end = self.buf.iter().position(|&b| b == b'\n')?;
        Some(self.buf.drain(..=end).collect())
    }

    /// Decodes the next complete frame, if any.
    pub fn next_message(&mut self) -> Option<Result<Message, WireError>> {
        self.next_frame().map(|f| decode_message(&f))
    }

    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    /// Called at end of stream; leftover bytes are a truncated frame.
    pub fn finish(self) -> Result<(), FrameError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(FrameError::Truncated)
        }
    }
}

#[cfg(feature = "net")]
pub use self::io::{read_message, write_message, RecvError};

#[cfg(feature = "net")]
mod io {
    use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncReadExt, AsyncWrite, AsyncWriteExt};

    use super::{decode_message, encode_message, FrameError, Message, WireError, MAX_FRAME_BYTES};

    #[derive(Debug, thiserror::Error)]
    pub enum RecvError {
        #[error("transport: {0}")]
        Io(#[from] std::io::Error),
        #[error(transparent)]
        Wire(#[from] WireError),
    }

    /// Reads one message. `Ok(None)` is a clean end of stream.
    pub async fn read_message<R>(reader: &mut R) -> Result<Option<Message>, RecvError>
    where
        R: AsyncBufRead + Unpin,
    {
        let mut line = Vec::new();
        let n = reader
            .take(MAX_FRAME_BYTES as u64)
            .read_until(b'\n', &mut line)
            .await?;
        if n == 0 {
            return Ok(None);
        }
        if line.last() != Some(&b'\n') && line.len() >= MAX_FRAME_BYTES {
            return Err(WireError::from(FrameError::TooLong).into());
        }
        Ok(Some(decode_message(&line)?))
    }

    pub async fn write_message<W>(writer: &mut W, m: &Message) -> std::io::Result<()>
    where
        W: AsyncWrite + Unpin,
    {
        writer.write_all(&encode_message(m)).await?;
        writer.flush().await
    }
}
