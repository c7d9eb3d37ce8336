//! Command-line entry point: `host`, `player`, `run-local`, `analyze`, `audit`.
//!
//! Every flag can also be set through an environment variable named
//! `GHZSIM_<FLAG>` (for example `GHZSIM_ROUNDS=500`).

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;

use crate::analysis::analyze;
use crate::audit::{audit_transcript, load_transcript, save_transcript, TranscriptEntry};
use crate::host::{run_host, HostConfig, HostOutcome, TableSource};
use crate::model::{standard_table, MeasurementTable, StationRole};
use crate::player::run_player;
use crate::schedule::{build_default_schedule, Schedule};

#[derive(Debug, Parser)]
#[command(name = "ghzsim", version, about = "Local three-station GHZ correlation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect data from three players over TCP.
    Host(HostArgs),
    /// Run one station against a host.
    Player(PlayerArgs),
    /// Host and three players in one process over in-memory streams.
    RunLocal(RunArgs),
    /// Enumeration, identification, product and balance checks as JSON.
    Analyze(AnalyzeArgs),
    /// Check a transcript for locality violations.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Coincidence rounds per experiment window.
    #[arg(long, env = "GHZSIM_ROUNDS", default_value_t = 1000)]
    pub rounds: u32,
    /// Seed for the common measurement times; random when omitted.
    #[arg(long, env = "GHZSIM_SEED")]
    pub seed: Option<u64>,
    /// Custom measurement table (JSON).
    #[arg(long, env = "GHZSIM_TABLE")]
    pub table: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, env = "GHZSIM_REPORT")]
    pub report: Option<PathBuf>,
    #[arg(long, env = "GHZSIM_TRANSCRIPT")]
    pub transcript: Option<PathBuf>,
    /// Per-round CSV of completed rounds.
    #[arg(long, env = "GHZSIM_CSV")]
    pub csv: Option<PathBuf>,
    /// Stop collecting after this long without a message.
    #[arg(long, env = "GHZSIM_TIMEOUT_SECS", default_value_t = 30)]
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, Args)]
pub struct HostArgs {
    #[arg(long, env = "GHZSIM_LISTEN", default_value = "0.0.0.0:6700")]
    pub listen: SocketAddr,
    /// How long to wait for all three players to register.
    #[arg(long, env = "GHZSIM_ACCEPT_TIMEOUT_SECS", default_value_t = 300)]
    pub accept_timeout_secs: u64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PlayerArgs {
    #[arg(long, env = "GHZSIM_CONNECT")]
    pub connect: SocketAddr,
    /// 1 = Alice, 2 = Bob, 3 = Claire.
    #[arg(long, env = "GHZSIM_ROLE", value_parser = parse_role)]
    pub role: StationRole,
    #[arg(long, env = "GHZSIM_TRANSCRIPT")]
    pub transcript: Option<PathBuf>,
    /// Keep retrying the connection for this long.
    #[arg(long, env = "GHZSIM_CONNECT_TIMEOUT_SECS", default_value_t = 10)]
    pub connect_timeout_secs: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long, env = "GHZSIM_TABLE")]
    pub table: Option<PathBuf>,
    /// Scheduled ticks per window for the balance statistics.
    #[arg(long, env = "GHZSIM_ROUNDS", default_value_t = 10_000)]
    pub rounds: u32,
    #[arg(long, env = "GHZSIM_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Write the JSON here instead of stdout.
    #[arg(long, env = "GHZSIM_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    pub path: PathBuf,
}

fn parse_role(s: &str) -> Result<StationRole, String> {
    s.parse().map_err(|_| format!("role must be 1, 2 or 3, got {s:?}"))
}

fn load_table(path: Option<&Path>) -> Result<MeasurementTable> {
    match path {
        None => Ok(standard_table()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            MeasurementTable::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn resolve_schedule(run: &RunArgs) -> Result<Schedule> {
    let seed = run.seed.unwrap_or_else(rand::random);
    eprintln!("seed: {seed}");
    Ok(build_default_schedule(run.rounds, seed)?)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn write_outputs(run: &RunArgs, outcome: &HostOutcome) -> Result<()> {
    write_or_print(run.report.as_deref(), &outcome.report.to_json())?;
    if let Some(p) = &run.transcript {
        save_transcript(p, &outcome.transcript).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &run.csv {
        let f = fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
        outcome.report.write_csv(f)?;
    }
    Ok(())
}

fn summarize(outcome: &HostOutcome) {
    let r = &outcome.report;
    for w in &r.windows {
        eprintln!(
            "window {} {}: {} rounds, +1 x{}, -1 x{}, {} violations",
            w.window_index, w.setting, w.rounds_completed, w.plus_count, w.minus_count, w.violations
        );
    }
    let audit = r.locality_audit.as_ref().is_none_or(|a| a.pass);
    eprintln!(
        "incomplete {}, invalid {}, rejected {}, locality audit {}",
        r.incomplete_rounds,
        r.invalid_rounds,
        r.rejected_records.len(),
        if audit { "pass" } else { "FAIL" }
    );
}

/// Result of an in-process run.
#[derive(Debug, Clone)]
pub struct LocalRun {
    pub outcome: HostOutcome,
    /// Each player's own transcript, in role order.
    pub player_transcripts: Vec<(StationRole, Vec<TranscriptEntry>)>,
}

/// In-memory stream capacity per player connection.
const LOCAL_PIPE_BYTES: usize = 64 * 1024;

/// Host and three players as concurrent tasks connected by in-memory
/// duplex streams speaking the same wire protocol as TCP.
pub async fn run_local(
    schedule: Schedule,
    table: TableSource,
    collect_timeout: Duration,
) -> Result<LocalRun> {
    let (conn_tx, mut conn_rx) = mpsc::channel(StationRole::ALL.len());
    let mut players = Vec::new();
    for role in StationRole::ALL {
        let (host_end, player_end) = tokio::io::duplex(LOCAL_PIPE_BYTES);
        conn_tx
            .send(host_end)
            .await
            .expect("receiver is alive until the host returns");
        players.push((role, tokio::spawn(run_player(player_end, role))));
    }
    drop(conn_tx);

    let config = HostConfig {
        schedule,
        table,
        accept_timeout: Duration::from_secs(10),
        collect_timeout,
    };
    let outcome = run_host(&mut conn_rx, config).await?;
    let mut player_transcripts = Vec::new();
    for (role, handle) in players {
        let (_, transcript) = handle
            .await
            .context("player task panicked")?
            .with_context(|| format!("station {role}"))?;
        player_transcripts.push((role, transcript));
    }
    Ok(LocalRun {
        outcome,
        player_transcripts,
    })
}

async fn cmd_host(args: HostArgs) -> Result<bool> {
    let table = load_table(args.run.table.as_deref())?;
    let schedule = resolve_schedule(&args.run)?;
    let mut listener = TcpListener::bind(args.listen)
        .await
        .with_context(|| format!("binding {}", args.listen))?;
    eprintln!("listening on {}", listener.local_addr()?);
    let config = HostConfig {
        schedule,
        table: TableSource::Inline(table),
        accept_timeout: Duration::from_secs(args.accept_timeout_secs),
        collect_timeout: Duration::from_secs(args.run.timeout_secs),
    };
    let outcome = run_host(&mut listener, config).await?;
    summarize(&outcome);
    write_outputs(&args.run, &outcome)?;
    Ok(outcome.report.is_success())
}

async fn connect_with_retry(addr: SocketAddr, wait: Duration) -> Result<TcpStream> {
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        match TcpStream::connect(addr).await {
            Ok(s) => {
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) if tokio::time::Instant::now() >= deadline => {
                return Err(e).with_context(|| format!("connecting to {addr}"))
            }
            Err(_) => tokio::time::sleep(Duration::from_millis(50)).await,
        }
    }
}

async fn cmd_player(args: PlayerArgs) -> Result<bool> {
    let stream = connect_with_retry(args.connect, Duration::from_secs(args.connect_timeout_secs)).await?;
    let (state, transcript) = run_player(stream, args.role).await?;
    eprintln!(
        "station {} ({}) sent {} records",
        args.role,
        args.role.name(),
        state.schedule().total_rounds()
    );
    if let Some(p) = &args.transcript {
        save_transcript(p, &transcript).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(true)
}

async fn cmd_run_local(args: RunArgs) -> Result<bool> {
    let table = load_table(args.table.as_deref())?;
    let schedule = resolve_schedule(&args)?;
    let run = run_local(
        schedule,
        TableSource::Inline(table),
        Duration::from_secs(args.timeout_secs),
    )
    .await?;
    summarize(&run.outcome);
    write_outputs(&args, &run.outcome)?;
    Ok(run.outcome.report.is_success())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<bool> {
    let table = load_table(args.table.as_deref())?;
    let schedule = build_default_schedule(args.rounds, args.seed)?;
    let report = analyze(&table, &schedule)?;
    write_or_print(args.output.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(true)
}

fn cmd_audit(args: AuditArgs) -> Result<bool> {
    let entries = load_transcript(&args.path)?;
    let result = audit_transcript(&entries);
    println!("{}", serde_json::to_string_pretty(&result)?);
    eprintln!(
        "audit {}: {} entries, {} violations",
        if result.pass { "pass" } else { "FAIL" },
        result.entries,
        result.violations.len()
    );
    Ok(result.pass)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

/// Runs a parsed command. `Ok(false)` means the command ran but the run or
/// audit did not pass.
pub fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Host(a) => runtime()?.block_on(cmd_host(a)),
        Command::Player(a) => runtime()?.block_on(cmd_player(a)),
        Command::RunLocal(a) => runtime()?.block_on(cmd_run_local(a)),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Audit(a) => cmd_audit(a),
    }
}

/// Exit status: 0 success, 1 failed run or audit, 2 error.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
