//! A single station: registers with the host, receives its row and the
//! schedule, then streams its outcomes without reading anything further.

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    eval_signed_product, standard_table, MeasurementTable, ModelError, StationRole,
};
use crate::schedule::Schedule;
use crate::wire::{LaunchTable, MeasurementRecord};

/// Table name players resolve without an inline row.
pub const STANDARD_TABLE_ID: &str = "standard";

#[derive(Debug, Error)]
pub enum PlayerError {
    #[error("host refused registration: {0}")]
    Refused(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("launch payload rejected: {0}")]
    InvalidLaunch(String),
    #[error("transport: {0}")]
    Transport(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Everything a station knows once launched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlayerState {
    role: StationRole,
    row: MeasurementTable,
    schedule: Schedule,
}

impl PlayerState {
    /// Validates that `row` holds exactly this station's four entries.
    pub fn new(
        role: StationRole,
        row: MeasurementTable,
        schedule: Schedule,
    ) -> Result<PlayerState, PlayerError> {
        if let Some(other) = row.stations().into_iter().find(|r| *r != role) {
            return Err(PlayerError::InvalidLaunch(format!(
                "row for station {role} carries entries of station {other}"
            )));
        }
        let settings: Vec<_> = schedule.windows().iter().map(|w| w.setting).collect();
        for s in &settings {
            if row.entry(role, *s).is_none() {
                return Err(PlayerError::InvalidLaunch(format!(
                    "row for station {role} lacks setting {s}"
                )));
            }
        }
        if row.len() != settings.len() {
            return Err(PlayerError::InvalidLaunch(format!(
                "row for station {role} has {} entries, schedule uses {}",
                row.len(),
                settings.len()
            )));
        }
        Ok(PlayerState {
            role,
            row,
            schedule,
        })
    }

    /// Builds state from a Launch payload.
    pub fn from_launch(
        role: StationRole,
        schedule: Schedule,
        table: LaunchTable,
    ) -> Result<PlayerState, PlayerError> {
        let row = match table {
            LaunchTable::Row(row) => row,
            LaunchTable::Named(name) if name == STANDARD_TABLE_ID => standard_table().row(role),
            LaunchTable::Named(name) => {
                return Err(PlayerError::InvalidLaunch(format!("unknown table {name:?}")))
            }
        };
        PlayerState::new(role, row, schedule)
    }

    pub fn role(&self) -> StationRole {
        self.role
    }

    pub fn row(&self) -> &MeasurementTable {
        &self.row
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// This station's outcome for one round, computed on demand.
    pub fn measure(&self, window_index: usize, round: u32) -> Result<MeasurementRecord, PlayerError> {
        let window = self
            .schedule
            .window(window_index)
            .map_err(|e| PlayerError::Protocol(e.to_string()))?;
        let tick = self
            .schedule
            .measurement_tick(window_index, round)
            .map_err(|e| PlayerError::Protocol(e.to_string()))?;
        let entry = self.row.get(self.role, window.setting)?;
        Ok(MeasurementRecord {
            role: self.role,
            window_index,
            round,
            label: window.setting.label_for(self.role),
            value: eval_signed_product(entry, tick)?,
            tick,
        })
    }

    /// Records in transmission order: window by window, round by round.
    pub fn records(&self) -> impl Iterator<Item = Result<MeasurementRecord, PlayerError>> + '_ {
        let rounds = self.schedule.rounds_per_window();
        (0..self.schedule.windows().len())
            .flat_map(move |w| (0..rounds).map(move |n| self.measure(w, n)))
    }
}

#[cfg(feature = "net")]
pub use self::net::{connect_and_register, execute_schedule, run_player, RegisteredPlayer};

#[cfg(feature = "net")]
mod net {
    use tokio::io::{split, AsyncRead, AsyncWrite, AsyncWriteExt, BufReader, BufWriter, WriteHalf};

    use super::{PlayerError, PlayerState};
    use crate::audit::TranscriptEntry;
    use crate::model::StationRole;
    use crate::wire::{encode_message, read_message, write_message, Message, RecvError, PROTOCOL_VERSION};

    /// A launched station holding only the write half of its one connection.
    pub struct RegisteredPlayer<C> {
        pub state: PlayerState,
        pub writer: WriteHalf<C>,
        pub transcript: Vec<TranscriptEntry>,
    }

    async fn expect_message<R>(reader: &mut R) -> Result<Message, PlayerError>
    where
        R: tokio::io::AsyncBufRead + Unpin,
    {
        match read_message(reader).await {
            Ok(Some(Message::ProtocolError { text })) => Err(PlayerError::Refused(text)),
            Ok(Some(m)) => Ok(m),
            Ok(None) => Err(PlayerError::Protocol("host closed the connection".into())),
            Err(RecvError::Io(e)) => Err(e.into()),
            Err(RecvError::Wire(e)) => Err(PlayerError::Protocol(e.to_string())),
        }
    }

    /// Sends Hello, then waits for Welcome and Launch. The read half is
    /// dropped once Launch arrives.
    pub async fn connect_and_register<C>(
        conn: C,
        role: StationRole,
    ) -> Result<RegisteredPlayer<C>, PlayerError>
    where
        C: AsyncRead + AsyncWrite + Unpin,
    {
        let (read, mut writer) = split(conn);
        let mut reader = BufReader::new(read);
        let mut transcript = Vec::new();

        let hello = Message::Hello {
            role,
            proto: PROTOCOL_VERSION,
        };
        write_message(&mut writer, &hello).await?;
        transcript.push(TranscriptEntry::player_to_host(role, hello));

        let welcome = expect_message(&mut reader).await?;
        match &welcome {
            Message::Welcome { role: r } if *r == role => {}
            other => {
                return Err(PlayerError::Protocol(format!(
                    "expected welcome for station {role}, got {}",
                    other.tag()
                )))
            }
        }
        transcript.push(TranscriptEntry::host_to_player(role, welcome));

        let launch = expect_message(&mut reader).await?;
        drop(reader);
        let state = match launch.clone() {
            Message::Launch { schedule, table } => PlayerState::from_launch(role, schedule, table)?,
            other => {
                return Err(PlayerError::Protocol(format!(
                    "expected launch, got {}",
                    other.tag()
                )))
            }
        };
        transcript.push(TranscriptEntry::host_to_player(role, launch));
        Ok(RegisteredPlayer {
            state,
            writer,
            transcript,
        })
    }

    /// Streams every scheduled record, then Done. Returns the number of
    /// records sent.
    pub async fn execute_schedule<W>(
        state: &PlayerState,
        out: W,
        transcript: &mut Vec<TranscriptEntry>,
    ) -> Result<u64, PlayerError>
    where
        W: AsyncWrite + Unpin,
    {
        let role = state.role();
        let mut out = BufWriter::new(out);
        let mut sent = 0;
        for rec in state.records() {
            let msg = Message::Data(rec?);
            out.write_all(&encode_message(&msg)).await?;
            transcript.push(TranscriptEntry::player_to_host(role, msg));
            sent += 1;
        }
        let done = Message::Done { role };
        out.write_all(&encode_message(&done)).await?;
        out.flush().await?;
        out.shutdown().await?;
        transcript.push(TranscriptEntry::player_to_host(role, done));
        Ok(sent)
    }

    /// Full station lifecycle over one connection.
    pub async fn run_player<C>(
        conn: C,
        role: StationRole,
    ) -> Result<(PlayerState, Vec<TranscriptEntry>), PlayerError>
    where
        C: AsyncRead + AsyncWrite + Unpin,
    {
        let RegisteredPlayer {
            state,
            writer,
            mut transcript,
        } = connect_and_register(conn, role).await?;
        execute_schedule(&state, writer, &mut transcript).await?;
        Ok((state, transcript))
    }
}
