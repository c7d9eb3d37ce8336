//! The collecting node.
//!
//! Nothing under this module evaluates station functions: the host moves
//! table rows from its configuration to the players without reading them
//! and afterwards handles only ±1 values, labels and ticks.

mod collector;
#[cfg(feature = "net")]
mod session;

pub use collector::{
    CoincidenceRound, Collector, Ingested, Rejection, RoundRow, RunReport, WindowSummary,
};
#[cfg(feature = "net")]
pub use session::{
    accept_players, collect, launch_run, run_host, Acceptor, HostConfig, HostError, HostOutcome,
    Session, TableSource, DEFAULT_COLLECT_TIMEOUT,
};
