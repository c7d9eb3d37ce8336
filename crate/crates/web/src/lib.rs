//! Browser bindings: waveform traces, an in-page simulated run, and the
//! table analysis. Each export takes plain values and returns JSON text.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ghzsim::analysis::analyze;
use ghzsim::host::Collector;
use ghzsim::model::{
    eval_signed_product, standard_table, MeasurementTable, SettingVector, Sign, StationRole, Tick,
    TICKS_PER_UNIT,
};
use ghzsim::player::PlayerState;
use ghzsim::schedule::build_default_schedule;

/// Largest run the page will simulate in one call.
pub const MAX_DEMO_ROUNDS: u32 = 20_000;

fn load(table_json: &str) -> Result<MeasurementTable, String> {
    if table_json.trim().is_empty() {
        return Ok(standard_table());
    }
    let t = MeasurementTable::from_json(table_json).map_err(|e| format!("table: {e}"))?;
    t.check_covers(&SettingVector::STANDARD_ORDER)
        .map_err(|e| e.to_string())?;
    Ok(t)
}

#[derive(Serialize)]
struct SettingTrace {
    setting: String,
    formulas: [String; 3],
    values: [Vec<i8>; 3],
    product: Vec<i8>,
}

#[derive(Serialize)]
struct Trace {
    samples: u32,
    settings: Vec<SettingTrace>,
}

/// Each station's value and the triple product at `samples` evenly spaced
/// times across one unit interval.
pub fn trace(table_json: &str, samples: u32) -> Result<String, String> {
    let table = load(table_json)?;
    if samples == 0 || samples > 4096 {
        return Err("samples must be in 1..=4096".into());
    }
    let ticks: Vec<Tick> = (0..samples)
        .map(|i| Tick(TICKS_PER_UNIT * i as u64 / samples as u64))
        .collect();
    let mut settings = Vec::new();
    for s in SettingVector::STANDARD_ORDER {
        let [a, b, c] = StationRole::ALL.map(|r| table.get(r, s));
        let (a, b, c) = (
            a.map_err(|e| e.to_string())?,
            b.map_err(|e| e.to_string())?,
            c.map_err(|e| e.to_string())?,
        );
        let values = [a, b, c].map(|p| {
            ticks
                .iter()
                .map(|&t| eval_signed_product(p, t).map(Sign::as_i8).unwrap_or(0))
                .collect::<Vec<_>>()
        });
        let product = (0..ticks.len())
            .map(|i| values[0][i] * values[1][i] * values[2][i])
            .collect();
        settings.push(SettingTrace {
            setting: s.to_string(),
            formulas: [a.to_string(), b.to_string(), c.to_string()],
            values,
            product,
        });
    }
    Ok(serde_json::to_string(&Trace { samples, settings }).expect("trace serializes"))
}

/// Runs three in-memory stations against the collector and returns the
/// run report.
pub fn simulate(table_json: &str, rounds: u32, seed: u32) -> Result<String, String> {
    let table = load(table_json)?;
    if rounds == 0 || rounds > MAX_DEMO_ROUNDS {
        return Err(format!("rounds must be in 1..={MAX_DEMO_ROUNDS}"));
    }
    let schedule = build_default_schedule(rounds, seed as u64).map_err(|e| e.to_string())?;
    let mut collector = Collector::new(schedule.clone());
    for role in StationRole::ALL {
        let player = PlayerState::new(role, table.row(role), schedule.clone()).map_err(|e| e.to_string())?;
        for rec in player.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            // Rejections are part of the report.
            let _ = collector.ingest_record(rec);
        }
    }
    Ok(collector.finalize_report().to_json())
}

/// Assignment counts, identification checks, symbolic products and balance.
pub fn analysis(table_json: &str, rounds: u32) -> Result<String, String> {
    let table = load(table_json)?;
    let schedule = build_default_schedule(rounds.clamp(1, MAX_DEMO_ROUNDS), 42).map_err(|e| e.to_string())?;
    let report = analyze(&table, &schedule).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

#[wasm_bindgen(js_name = standardTable)]
pub fn standard_table_json() -> String {
    standard_table().to_json()
}

#[wasm_bindgen(js_name = trace)]
pub fn trace_js(table_json: &str, samples: u32) -> Result<String, JsError> {
    trace(table_json, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(table_json: &str, rounds: u32, seed: u32) -> Result<String, JsError> {
    simulate(table_json, rounds, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = analyze)]
pub fn analysis_js(table_json: &str, rounds: u32) -> Result<String, JsError> {
    analysis(table_json, rounds).map_err(|e| JsError::new(&e))
}
