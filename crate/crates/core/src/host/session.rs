//! Networked host: registration, launch and collection over any byte stream.

use std::collections::BTreeMap;
use std::future::Future;
use std::io;
use std::time::Duration;

use thiserror::Error;
use tokio::io::{split, AsyncRead, AsyncWrite, BufReader, ReadHalf, WriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::{timeout, timeout_at, Instant};

use super::collector::{Collector, Rejection, RunReport};
use crate::audit::{audit_transcript, TranscriptEntry};
use crate::model::{MeasurementTable, ModelError, SettingVector, StationRole};
use crate::schedule::Schedule;
use crate::wire::{read_message, write_message, LaunchTable, Message, RecvError, PROTOCOL_VERSION};

/// Default idle timeout during collection.
pub const DEFAULT_COLLECT_TIMEOUT: Duration = Duration::from_secs(30);

/// Longest the host waits for a Hello on a fresh connection.
const HELLO_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum HostError {
    #[error("timed out waiting for players; missing roles {missing:?}")]
    MissingRoles { missing: Vec<StationRole> },
    #[error("session is not ready: registered roles {registered:?}")]
    NotReady { registered: Vec<StationRole> },
    #[error("measurement table: {0}")]
    Table(#[from] ModelError),
    #[error("transport failure talking to station {role}: {source}")]
    Transport { role: StationRole, source: io::Error },
}

/// Source of incoming player connections.
pub trait Acceptor {
    type Conn: AsyncRead + AsyncWrite + Send + Unpin + 'static;

    /// Next connection, or `None` once no more can arrive.
    fn accept(&mut self) -> impl Future<Output = io::Result<Option<Self::Conn>>> + Send;
}

impl Acceptor for TcpListener {
    type Conn = TcpStream;

    async fn accept(&mut self) -> io::Result<Option<TcpStream>> {
        let (stream, _) = TcpListener::accept(self).await?;
        stream.set_nodelay(true)?;
        Ok(Some(stream))
    }
}

impl<C> Acceptor for mpsc::Receiver<C>
where
    C: AsyncRead + AsyncWrite + Send + Unpin + 'static,
{
    type Conn = C;

    async fn accept(&mut self) -> io::Result<Option<C>> {
        Ok(self.recv().await)
    }
}

/// What the host sends at launch in place of each player's row.
#[derive(Debug, Clone)]
pub enum TableSource {
    /// Rows are split out and sent inline; the host drops the table afterwards.
    Inline(MeasurementTable),
    /// Players resolve a table they carry themselves.
    Named(String),
}

impl From<MeasurementTable> for TableSource {
    fn from(t: MeasurementTable) -> Self {
        TableSource::Inline(t)
    }
}

struct PlayerLink<C> {
    reader: BufReader<ReadHalf<C>>,
    writer: WriteHalf<C>,
}

/// Registered players awaiting launch.
pub struct Session<C> {
    links: BTreeMap<StationRole, PlayerLink<C>>,
    transcript: Vec<TranscriptEntry>,
    launched: bool,
}

impl<C> Session<C> {
    pub fn roles(&self) -> Vec<StationRole> {
        self.links.keys().copied().collect()
    }

    /// All three stations registered.
    pub fn is_ready(&self) -> bool {
        self.links.len() == StationRole::ALL.len()
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }
}

async fn send<W: AsyncWrite + Unpin>(
    writer: &mut W,
    role: StationRole,
    msg: Message,
    transcript: &mut Vec<TranscriptEntry>,
) -> Result<(), HostError> {
    write_message(writer, &msg)
        .await
        .map_err(|source| HostError::Transport { role, source })?;
    transcript.push(TranscriptEntry::host_to_player(role, msg));
    Ok(())
}

/// Waits until stations 1, 2 and 3 have each registered once.
///
/// Connections that send anything but a valid Hello, use another protocol
/// version, or claim a taken role get a ProtocolError and are dropped.
/// Handshake transcript entries are ordered by role so equal runs produce
/// equal transcripts regardless of connection order.
pub async fn accept_players<A: Acceptor>(
    acceptor: &mut A,
    wait: Duration,
) -> Result<Session<A::Conn>, HostError> {
    let deadline = Instant::now() + wait;
    let mut links = BTreeMap::new();
    let mut transcript = Vec::new();
    let missing = |links: &BTreeMap<StationRole, PlayerLink<A::Conn>>| HostError::MissingRoles {
        missing: StationRole::ALL
            .into_iter()
            .filter(|r| !links.contains_key(r))
            .collect(),
    };

    while links.len() < StationRole::ALL.len() {
        let conn = match timeout_at(deadline, acceptor.accept()).await {
            Err(_) | Ok(Ok(None)) => return Err(missing(&links)),
            Ok(Err(_)) => continue,
            Ok(Ok(Some(conn))) => conn,
        };
        let (read, mut writer) = split(conn);
        let mut reader = BufReader::new(read);
        let hello_wait = deadline
            .saturating_duration_since(Instant::now())
            .min(HELLO_TIMEOUT);
        let hello = match timeout(hello_wait, read_message(&mut reader)).await {
            Ok(Ok(Some(m))) => m,
            Ok(Ok(None)) | Err(_) | Ok(Err(RecvError::Io(_))) => continue,
            Ok(Err(RecvError::Wire(e))) => {
                let _ = write_message(&mut writer, &Message::ProtocolError { text: e.to_string() }).await;
                continue;
            }
        };
        let (role, refusal) = match hello {
            Message::Hello { role, proto } if proto != PROTOCOL_VERSION => (
                role,
                Some(format!(
                    "protocol version mismatch: host speaks {PROTOCOL_VERSION}, station {role} sent {proto}"
                )),
            ),
            Message::Hello { role, .. } if links.contains_key(&role) => {
                (role, Some(format!("role {role} already registered")))
            }
            Message::Hello { role, .. } => (role, None),
            other => {
                let text = format!("expected hello, got {}", other.tag());
                let _ = write_message(&mut writer, &Message::ProtocolError { text }).await;
                continue;
            }
        };
        transcript.push(TranscriptEntry::player_to_host(role, hello));
        match refusal {
            Some(text) => {
                // A refused connection is dropped; a failed write changes nothing.
                let _ = send(&mut writer, role, Message::ProtocolError { text }, &mut transcript).await;
            }
            None => {
                if send(&mut writer, role, Message::Welcome { role }, &mut transcript)
                    .await
                    .is_ok()
                {
                    links.insert(role, PlayerLink { reader, writer });
                }
            }
        }
    }

    transcript.sort_by_key(|e| e.role);
    Ok(Session {
        links,
        transcript,
        launched: false,
    })
}

/// Sends each station the schedule and its own row, then forgets the table.
pub async fn launch_run<C>(
    session: &mut Session<C>,
    schedule: &Schedule,
    table: TableSource,
) -> Result<(), HostError>
where
    C: AsyncRead + AsyncWrite + Send + Unpin + 'static,
{
    if !session.is_ready() {
        return Err(HostError::NotReady {
            registered: session.roles(),
        });
    }
    if let TableSource::Inline(t) = &table {
        t.check_covers(&SettingVector::STANDARD_ORDER)?;
    }
    for (&role, link) in session.links.iter_mut() {
        let table = match &table {
            TableSource::Inline(t) => LaunchTable::Row(t.row(role)),
            TableSource::Named(name) => LaunchTable::Named(name.clone()),
        };
        let msg = Message::Launch {
            schedule: schedule.clone(),
            table,
        };
        send(&mut link.writer, role, msg, &mut session.transcript).await?;
    }
    drop(table);
    session.launched = true;
    Ok(())
}

enum Inbound {
    Msg(Message),
    Bad(String),
    Closed,
}

fn spawn_reader<C>(role: StationRole, mut reader: BufReader<ReadHalf<C>>) -> (mpsc::Receiver<Inbound>, JoinHandle<()>)
where
    C: AsyncRead + Send + 'static,
{
    let (tx, rx) = mpsc::channel(256);
    let handle = tokio::spawn(async move {
        loop {
            let event = match read_message(&mut reader).await {
                Ok(Some(m)) => Inbound::Msg(m),
                Ok(None) => Inbound::Closed,
                Err(RecvError::Wire(e)) if !e.is_frame() => {
                    Inbound::Bad(format!("station {role}: {e}"))
                }
                Err(e) => {
                    let _ = tx.send(Inbound::Bad(format!("station {role}: {e}"))).await;
                    Inbound::Closed
                }
            };
            let last = matches!(event, Inbound::Closed);
            if tx.send(event).await.is_err() || last {
                break;
            }
        }
    });
    (rx, handle)
}

/// Transcript and report of a finished run.
#[derive(Debug, Clone)]
pub struct HostOutcome {
    pub report: RunReport,
    pub transcript: Vec<TranscriptEntry>,
}

/// Collects records until every station sent Done or closed, or nothing
/// arrives for `idle`.
///
/// Three reader tasks decode concurrently; this task is the only writer of
/// run state and takes one message per station in turn, so the transcript
/// order is reproducible.
pub async fn collect<C>(
    session: Session<C>,
    schedule: &Schedule,
    idle: Duration,
) -> HostOutcome
where
    C: AsyncRead + AsyncWrite + Send + Unpin + 'static,
{
    let Session {
        links,
        mut transcript,
        ..
    } = session;
    let mut collector = Collector::new(schedule.clone());
    let mut active = Vec::new();
    let mut handles = Vec::new();
    let mut writers = Vec::new();
    for (role, link) in links {
        let (rx, handle) = spawn_reader(role, link.reader);
        active.push((role, rx));
        handles.push(handle);
        writers.push(link.writer);
    }

    let mut turn = 0;
    'collect: while !active.is_empty() {
        turn %= active.len();
        let (role, rx) = &mut active[turn];
        let role = *role;
        let event = match timeout(idle, rx.recv()).await {
            Err(_) => {
                collector.protocol_error(format!(
                    "collection idle for {}s waiting on station {role}",
                    idle.as_secs_f64()
                ));
                break 'collect;
            }
            Ok(None) => Inbound::Closed,
            Ok(Some(ev)) => ev,
        };
        match event {
            Inbound::Msg(msg) => {
                let done = matches!(msg, Message::Done { .. });
                transcript.push(TranscriptEntry::player_to_host(role, msg.clone()));
                match msg {
                    Message::Data(rec) if rec.role != role => collector.reject(Rejection::WrongConnection {
                        connection: role,
                        claimed: rec.role,
                    }),
                    Message::Data(rec) => {
                        // Rejections are kept in the collector and surface in the report.
                        let _ = collector.ingest_record(rec);
                    }
                    Message::Done { .. } => {}
                    other => collector.protocol_error(format!(
                        "station {role}: unexpected {} after launch",
                        other.tag()
                    )),
                }
                if done {
                    active.remove(turn);
                    continue;
                }
                turn += 1;
            }
            Inbound::Bad(text) => {
                collector.protocol_error(text);
                turn += 1;
            }
            Inbound::Closed => {
                active.remove(turn);
            }
        }
    }

    for h in handles {
        h.abort();
    }
    drop(writers);

    let mut report = collector.finalize_report();
    report.locality_audit = Some(audit_transcript(&transcript));
    HostOutcome { report, transcript }
}

#[derive(Debug, Clone)]
pub struct HostConfig {
    pub schedule: Schedule,
    pub table: TableSource,
    pub accept_timeout: Duration,
    pub collect_timeout: Duration,
}

/// Registration, launch and collection in sequence.
pub async fn run_host<A: Acceptor>(acceptor: &mut A, config: HostConfig) -> Result<HostOutcome, HostError> {
    let mut session = accept_players(acceptor, config.accept_timeout).await?;
    launch_run(&mut session, &config.schedule, config.table).await?;
    Ok(collect(session, &config.schedule, config.collect_timeout).await)
}
