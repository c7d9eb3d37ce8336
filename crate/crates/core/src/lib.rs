//! Local hidden-variable simulation of three-station GHZ correlations.
//!
//! Three stations each evaluate their own row of a table of signed
//! Rademacher products at a common, seed-derived measurement time and
//! report ±1 outcomes to a collecting host that never sees the table.
//! The triple products come out exactly −1, −1, −1 and +1 in the yyx, yxy,
//! xyy and xxx windows.

pub mod analysis;
pub mod audit;
pub mod host;
pub mod model;
pub mod player;
pub mod schedule;
pub mod wire;

#[cfg(feature = "net")]
pub mod cli;
