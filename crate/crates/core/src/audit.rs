//! Message transcripts and the locality audit run over them.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::StationRole;
use crate::wire::Message;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "p2h")]
    PlayerToHost,
    #[serde(rename = "h2p")]
    HostToPlayer,
    /// Never produced by this system; representable so the audit can reject it.
    #[serde(rename = "p2p")]
    PlayerToPlayer,
}

/// One line of a transcript. `role` is the player end of the edge (the
/// sender for `p2p`, in which case `to` names the receiver).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptEntry {
    pub dir: Direction,
    pub role: StationRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<StationRole>,
    pub msg: Message,
}

impl TranscriptEntry {
    pub fn player_to_host(role: StationRole, msg: Message) -> TranscriptEntry {
        TranscriptEntry {
            dir: Direction::PlayerToHost,
            role,
            to: None,
            msg,
        }
    }

    pub fn host_to_player(role: StationRole, msg: Message) -> TranscriptEntry {
        TranscriptEntry {
            dir: Direction::HostToPlayer,
            role,
            to: None,
            msg,
        }
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("reading transcript: {0}")]
    Io(#[from] io::Error),
    #[error("transcript line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

pub fn write_transcript<W: Write>(out: W, entries: &[TranscriptEntry]) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_transcript(path: &Path, entries: &[TranscriptEntry]) -> io::Result<()> {
    write_transcript(File::create(path)?, entries)
}

/// Parses JSON lines; blank lines are skipped.
pub fn read_transcript<R: io::Read>(input: R) -> Result<Vec<TranscriptEntry>, TranscriptError> {
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| TranscriptError::Parse {
            line: i + 1,
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, TranscriptError> {
    read_transcript(File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A message travelled directly between two players.
    PlayerToPlayer {
        entry: usize,
        from: StationRole,
        to: Option<StationRole>,
    },
    /// The host sent measurement data.
    HostSentData { entry: usize, role: StationRole },
    /// A player sent a host-only message (welcome or launch).
    PlayerSentHostMessage {
        entry: usize,
        role: StationRole,
        tag: &'static str,
    },
    /// A player received something after its launch message.
    InboundAfterLaunch {
        entry: usize,
        role: StationRole,
        tag: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditResult {
    pub pass: bool,
    pub entries: usize,
    pub violations: Vec<Violation>,
}

/// Checks a transcript for locality violations. Entry indices are zero-based.
pub fn audit_transcript(entries: &[TranscriptEntry]) -> AuditResult {
    let mut launched = BTreeSet::new();
    let mut violations = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        match e.dir {
            Direction::PlayerToPlayer => violations.push(Violation::PlayerToPlayer {
                entry: i,
                from: e.role,
                to: e.to,
            }),
            Direction::PlayerToHost => {
                if matches!(e.msg, Message::Welcome { .. } | Message::Launch { .. }) {
                    violations.push(Violation::PlayerSentHostMessage {
                        entry: i,
                        role: e.role,
                        tag: e.msg.tag(),
                    });
                }
            }
            Direction::HostToPlayer => {
                if launched.contains(&e.role) {
                    violations.push(Violation::InboundAfterLaunch {
                        entry: i,
                        role: e.role,
                        tag: e.msg.tag(),
                    });
                }
                if matches!(e.msg, Message::Data(_)) {
                    violations.push(Violation::HostSentData {
                        entry: i,
                        role: e.role,
                    });
                }
                if matches!(e.msg, Message::Launch { .. }) {
                    launched.insert(e.role);
                }
            }
        }
    }
    AuditResult {
        pass: violations.is_empty(),
        entries: entries.len(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{standard_table, SettingLabel, Sign, Tick};
    use crate::schedule::build_default_schedule;
    use crate::wire::{LaunchTable, MeasurementRecord};

    fn launch(role: StationRole) -> Message {
        Message::Launch {
            schedule: build_default_schedule(1, 3).unwrap(),
            table: LaunchTable::Row(standard_table().row(role)),
        }
    }

    fn data(role: StationRole) -> Message {
        Message::Data(MeasurementRecord {
            role,
            window_index: 0,
            round: 0,
            label: SettingLabel::Y,
            value: Sign::Plus,
            tick: Tick(5),
        })
    }

    fn clean() -> Vec<TranscriptEntry> {
        let a = StationRole::Alice;
        vec![
            TranscriptEntry::player_to_host(a, Message::Hello { role: a, proto: 1 }),
            TranscriptEntry::host_to_player(a, Message::Welcome { role: a }),
            TranscriptEntry::host_to_player(a, launch(a)),
            TranscriptEntry::player_to_host(a, data(a)),
            TranscriptEntry::player_to_host(a, Message::Done { role: a }),
        ]
    }

    #[test]
    fn clean_transcript_passes() {
        let r = audit_transcript(&clean());
        assert!(r.pass, "{r:?}");
        assert_eq!(r.entries, 5);
    }

    #[test]
    fn empty_transcript_passes() {
        assert!(audit_transcript(&[]).pass);
    }

    #[test]
    fn post_launch_message_fails() {
        let a = StationRole::Alice;
        let mut t = clean();
        t.push(TranscriptEntry::host_to_player(a, Message::ProtocolError { text: "late".into() }));
        let r = audit_transcript(&t);
        assert!(!r.pass);
        assert_eq!(
            r.violations,
            vec![Violation::InboundAfterLaunch {
                entry: 5,
                role: a,
                tag: "error"
            }]
        );
    }

    #[test]
    fn player_to_player_and_host_data_fail() {
        let a = StationRole::Alice;
        let b = StationRole::Bob;
        let mut t = clean();
        t.insert(
            1,
            TranscriptEntry {
                dir: Direction::PlayerToPlayer,
                role: b,
                to: Some(a),
                msg: data(b),
            },
        );
        t.insert(1, TranscriptEntry::host_to_player(b, data(b)));
        t.insert(1, TranscriptEntry::player_to_host(b, Message::Welcome { role: b }));
        let r = audit_transcript(&t);
        assert_eq!(r.violations.len(), 3, "{r:?}");
    }

    #[test]
    fn transcript_file_round_trip() {
        let t = clean();
        let mut buf = Vec::new();
        write_transcript(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"dir\":\"p2h\",\"role\":1,\"msg\":{\"t\":\"hello\""));
        assert_eq!(read_transcript(&buf[..]).unwrap(), t);
        assert!(matches!(
            read_transcript(&b"{\"dir\":\"p2h\"}\n"[..]),
            Err(TranscriptError::Parse { line: 1, .. })
        ));
    }
}
