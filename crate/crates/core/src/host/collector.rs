//! Coincidence assembly and run statistics.
//!
//! The collector sees only opaque ±1 values, labels and ticks. It never
//! learns which function produced a value.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;

use crate::audit::AuditResult;
use crate::model::{SettingVector, Sign, StationRole, Tick};
use crate::schedule::Schedule;
use crate::wire::MeasurementRecord;

/// Why a record was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    WindowOutOfRange { role: StationRole, window_index: usize, round: u32 },
    RoundOutOfRange { role: StationRole, window_index: usize, round: u32 },
    LabelMismatch { role: StationRole, window_index: usize, round: u32 },
    Duplicate { role: StationRole, window_index: usize, round: u32 },
    /// Arrived on a connection registered for a different role.
    WrongConnection { connection: StationRole, claimed: StationRole },
}

/// Result of a successful ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingested {
    /// Round still waiting for other stations.
    Pending,
    /// Third record arrived; the triple product and whether it matched.
    Completed { product: Sign, matches: bool },
    /// Third record arrived but the stations disagree on the tick.
    InvalidTicks,
}

/// One coincidence round: up to three records sharing window and round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoincidenceRound {
    records: [Option<MeasurementRecord>; 3],
}

impl CoincidenceRound {
    pub fn record(&self, role: StationRole) -> Option<&MeasurementRecord> {
        self.records[role.slot()].as_ref()
    }

    pub fn is_full(&self) -> bool {
        self.records.iter().all(Option::is_some)
    }

    fn full(&self) -> Option<[&MeasurementRecord; 3]> {
        match &self.records {
            [Some(a), Some(b), Some(c)] => Some([a, b, c]),
            _ => None,
        }
    }

    pub fn ticks_agree(&self) -> bool {
        self.full()
            .is_some_and(|[a, b, c]| a.tick == b.tick && b.tick == c.tick)
    }

    /// Product of the three values, defined once all three are present.
    pub fn product(&self) -> Option<Sign> {
        self.full().map(|rs| Sign::product(rs.iter().map(|r| r.value)))
    }
}

/// A completed round as written to the per-round CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundRow {
    pub window: usize,
    pub round: u32,
    pub tick: Tick,
    pub values: [Sign; 3],
    pub product: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub window_index: usize,
    pub setting: SettingVector,
    pub rounds_completed: u64,
    pub plus_count: u64,
    pub minus_count: u64,
    pub expected_product: Option<Sign>,
    pub violations: u64,
    pub invalid_rounds: u64,
    /// Fraction of +1 outcomes per station, indexed by station 1, 2, 3.
    pub plus_fraction: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub rounds_per_window: u32,
    pub windows: Vec<WindowSummary>,
    pub total_violations: u64,
    pub incomplete_rounds: u64,
    pub invalid_rounds: u64,
    pub rejected_records: Vec<Rejection>,
    pub protocol_errors: Vec<String>,
    pub locality_audit: Option<AuditResult>,
    #[serde(skip)]
    pub rounds: Vec<RoundRow>,
}

impl RunReport {
    /// True when every scheduled round completed with its expected product,
    /// nothing was rejected, and the locality audit (if run) passed.
    pub fn is_success(&self) -> bool {
        self.total_violations == 0
            && self.incomplete_rounds == 0
            && self.invalid_rounds == 0
            && self.rejected_records.is_empty()
            && self.protocol_errors.is_empty()
            && self.locality_audit.as_ref().is_none_or(|a| a.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// Writes `window,round,tick,v1,v2,v3,product` rows for completed rounds.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        writeln!(out, "window,round,tick,v1,v2,v3,product")?;
        for r in &self.rounds {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.window,
                r.round,
                r.tick,
                r.values[0].as_i8(),
                r.values[1].as_i8(),
                r.values[2].as_i8(),
                r.product.as_i8()
            )?;
        }
        out.flush()
    }
}

/// Single-writer run state owned by the host.
#[derive(Debug, Clone)]
pub struct Collector {
    schedule: Schedule,
    rounds: BTreeMap<(usize, u32), CoincidenceRound>,
    rejected: Vec<Rejection>,
    protocol_errors: Vec<String>,
}

impl Collector {
    pub fn new(schedule: Schedule) -> Collector {
        Collector {
            schedule,
            rounds: BTreeMap::new(),
            rejected: Vec::new(),
            protocol_errors: Vec::new(),
        }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Routes one record to its coincidence round.
    pub fn ingest_record(&mut self, rec: MeasurementRecord) -> Result<Ingested, Rejection> {
        let (role, window_index, round) = (rec.role, rec.window_index, rec.round);
        let rejection = match self.schedule.window(window_index) {
            Err(_) => Some(Rejection::WindowOutOfRange { role, window_index, round }),
            Ok(_) if round >= self.schedule.rounds_per_window() => {
                Some(Rejection::RoundOutOfRange { role, window_index, round })
            }
            Ok(w) if w.setting.label_for(role) != rec.label => {
                Some(Rejection::LabelMismatch { role, window_index, round })
            }
            Ok(_) => None,
        };
        if let Some(r) = rejection {
            self.rejected.push(r.clone());
            return Err(r);
        }
        let slot = self.rounds.entry((window_index, round)).or_default();
        if slot.records[role.slot()].is_some() {
            let r = Rejection::Duplicate { role, window_index, round };
            self.rejected.push(r.clone());
            return Err(r);
        }
        slot.records[role.slot()] = Some(rec);
        if !slot.is_full() {
            return Ok(Ingested::Pending);
        }
        if !slot.ticks_agree() {
            return Ok(Ingested::InvalidTicks);
        }
        let product = slot.product().expect("round is full");
        let expected = self.schedule.windows()[window_index].setting.ghz_prediction();
        Ok(Ingested::Completed {
            product,
            matches: expected == Some(product),
        })
    }

    /// Records a record that arrived on the wrong connection.
    pub fn reject(&mut self, r: Rejection) {
        self.rejected.push(r);
    }

    pub fn protocol_error(&mut self, text: String) {
        self.protocol_errors.push(text);
    }

    pub fn round(&self, window_index: usize, round: u32) -> Option<&CoincidenceRound> {
        self.rounds.get(&(window_index, round))
    }

    /// Builds the report from the accumulated state. The result depends
    /// only on the set of records ingested, not on their arrival order.
    pub fn finalize_report(&self) -> RunReport {
        let mut windows: Vec<WindowSummary> = self
            .schedule
            .windows()
            .iter()
            .map(|w| WindowSummary {
                window_index: w.index,
                setting: w.setting,
                rounds_completed: 0,
                plus_count: 0,
                minus_count: 0,
                expected_product: w.setting.ghz_prediction(),
                violations: 0,
                invalid_rounds: 0,
                plus_fraction: [None; 3],
            })
            .collect();
        let mut station_counts = vec![[(0u64, 0u64); 3]; windows.len()];
        let mut rows = Vec::new();

        for (&(w, n), slot) in &self.rounds {
            for rec in slot.records.iter().flatten() {
                let c = &mut station_counts[w][rec.role.slot()];
                c.1 += 1;
                if rec.value.is_plus() {
                    c.0 += 1;
                }
            }
            let summary = &mut windows[w];
            if !slot.is_full() {
                continue;
            }
            if !slot.ticks_agree() {
                summary.invalid_rounds += 1;
                continue;
            }
            let product = slot.product().expect("round is full");
            summary.rounds_completed += 1;
            match product {
                Sign::Plus => summary.plus_count += 1,
                Sign::Minus => summary.minus_count += 1,
            }
            if summary.expected_product != Some(product) {
                summary.violations += 1;
            }
            let values = StationRole::ALL.map(|r| slot.record(r).expect("round is full").value);
            rows.push(RoundRow {
                window: w,
                round: n,
                tick: slot.records[0].expect("round is full").tick,
                values,
                product,
            });
        }

        for (summary, counts) in windows.iter_mut().zip(&station_counts) {
            summary.plus_fraction =
                counts.map(|(plus, total)| (total > 0).then(|| plus as f64 / total as f64));
        }

        let completed: u64 = windows.iter().map(|w| w.rounds_completed).sum();
        let invalid: u64 = windows.iter().map(|w| w.invalid_rounds).sum();
        let mut rejected = self.rejected.clone();
        rejected.sort();
        let mut protocol_errors = self.protocol_errors.clone();
        protocol_errors.sort();
        RunReport {
            seed: self.schedule.seed(),
            rounds_per_window: self.schedule.rounds_per_window(),
            total_violations: windows.iter().map(|w| w.violations).sum(),
            incomplete_rounds: self.schedule.total_rounds() - completed - invalid,
            invalid_rounds: invalid,
            windows,
            rejected_records: rejected,
            protocol_errors,
            locality_audit: None,
            rounds: rows,
        }
    }
}
