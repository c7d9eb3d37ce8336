#![allow(dead_code)]

use ghzsim::model::{
    MeasurementTable, SettingLabel, SettingVector, Sign, SignedProduct, StationRole, Tick,
};
use ghzsim::schedule::{build_default_schedule, Schedule};
use ghzsim::wire::{LaunchTable, MeasurementRecord, Message};
use proptest::prelude::*;

pub fn role() -> impl Strategy<Value = StationRole> {
    prop::sample::select(StationRole::ALL.to_vec())
}

pub fn sign() -> impl Strategy<Value = Sign> {
    prop::bool::ANY.prop_map(|b| if b { Sign::Plus } else { Sign::Minus })
}

pub fn signed_product() -> impl Strategy<Value = SignedProduct> {
    (sign(), prop::collection::btree_set(1u32..=32, 0..5))
        .prop_map(|(s, ks)| SignedProduct::new(s, ks.into_iter().collect()).unwrap())
}

pub fn record() -> impl Strategy<Value = MeasurementRecord> {
    (role(), 0usize..4, any::<u32>(), sign(), any::<u64>()).prop_map(|(role, w, round, value, tick)| {
        MeasurementRecord {
            role,
            window_index: w,
            round,
            label: SettingVector::STANDARD_ORDER[w].label_for(role),
            value,
            tick: Tick(tick),
        }
    })
}

pub fn schedule() -> impl Strategy<Value = Schedule> {
    (1u32..100_000, any::<u64>(), 1u64..1 << 40, 1u64..1 << 36).prop_map(|(n, seed, len, gap)| {
        Schedule::with_timing(n, seed, len, gap).unwrap_or_else(|_| build_default_schedule(n, seed).unwrap())
    })
}

pub fn row(station: StationRole) -> impl Strategy<Value = MeasurementTable> {
    prop::collection::vec(signed_product(), 4).prop_map(move |ps| {
        let mut t = MeasurementTable::new();
        for (s, p) in SettingVector::STANDARD_ORDER.into_iter().zip(ps) {
            t.insert(station, s, p);
        }
        t
    })
}

pub fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (role(), any::<u32>()).prop_map(|(role, proto)| Message::Hello { role, proto }),
        role().prop_map(|role| Message::Welcome { role }),
        role().prop_map(|role| Message::Done { role }),
        ".{0,40}".prop_map(|text| Message::ProtocolError { text }),
        record().prop_map(Message::Data),
        (schedule(), role().prop_flat_map(row)).prop_map(|(schedule, r)| Message::Launch {
            schedule,
            table: LaunchTable::Row(r),
        }),
        (schedule(), "[a-z]{1,12}").prop_map(|(schedule, id)| Message::Launch {
            schedule,
            table: LaunchTable::Named(id),
        }),
    ]
}

/// A full table with random entries.
pub fn table() -> impl Strategy<Value = MeasurementTable> {
    (row(StationRole::Alice), row(StationRole::Bob), row(StationRole::Claire)).prop_map(|(a, b, c)| {
        let mut t = MeasurementTable::new();
        for part in [a, b, c] {
            for (r, s, p) in part.iter() {
                t.insert(r, s, p.clone());
            }
        }
        t
    })
}

/// Edits to an encoded Data frame that must never decode to a message.
#[derive(Debug, Clone, Copy)]
pub enum Corruption {
    DropTerminator,
    TruncateBody(usize),
    RoleOutOfRange(i64),
    ValueOutOfRange(i64),
    WindowOutOfRange(u64),
    FlipLabel,
    NegativeTick,
    FloatTick,
    RemoveField(usize),
    UnknownField,
    UnknownTag,
    WrongTypeRound,
    InjectGarbage(usize),
    EmbeddedNewline(usize),
}

pub fn corruption() -> impl Strategy<Value = Corruption> {
    use Corruption::*;
    prop_oneof![
        Just(DropTerminator),
        (1usize..200).prop_map(TruncateBody),
        prop_oneof![Just(0i64), 4i64..1000, -1000i64..0].prop_map(RoleOutOfRange),
        prop_oneof![Just(0i64), 2i64..1000, -1000i64..-1].prop_map(ValueOutOfRange),
        (4u64..1 << 40).prop_map(WindowOutOfRange),
        Just(FlipLabel),
        Just(NegativeTick),
        Just(FloatTick),
        (0usize..6).prop_map(RemoveField),
        Just(UnknownField),
        Just(UnknownTag),
        Just(WrongTypeRound),
        (0usize..200).prop_map(InjectGarbage),
        (1usize..200).prop_map(EmbeddedNewline),
    ]
}

const DATA_FIELDS: [&str; 6] = ["role", "window_index", "round", "label", "value", "tick"];

/// Applies `c` to the encoding of `rec`.
pub fn corrupt(rec: &MeasurementRecord, c: Corruption) -> Vec<u8> {
    use serde_json::{json, Value};
    let encoded = ghzsim::wire::encode_message(&Message::Data(*rec));
    let body = &encoded[..encoded.len() - 1];
    let mut v: Value = serde_json::from_slice(body).unwrap();
    let edit = |v: Value| {
        let mut out = serde_json::to_vec(&v).unwrap();
        out.push(b'\n');
        out
    };
    match c {
        Corruption::DropTerminator => body.to_vec(),
        Corruption::TruncateBody(n) => {
            let mut out = body[..n % body.len()].to_vec();
            out.push(b'\n');
            out
        }
        Corruption::RoleOutOfRange(r) => {
            v["role"] = json!(r);
            edit(v)
        }
        Corruption::ValueOutOfRange(x) => {
            v["value"] = json!(x);
            edit(v)
        }
        Corruption::WindowOutOfRange(w) => {
            v["window_index"] = json!(w);
            edit(v)
        }
        Corruption::FlipLabel => {
            let flipped = match rec.label {
                SettingLabel::X => "y",
                SettingLabel::Y => "x",
            };
            v["label"] = json!(flipped);
            edit(v)
        }
        Corruption::NegativeTick => {
            v["tick"] = json!(-(rec.tick.0 as i128 % i64::MAX as i128) - 1);
            edit(v)
        }
        Corruption::FloatTick => {
            v["tick"] = json!(rec.tick.0 as f64 + 0.5);
            edit(v)
        }
        Corruption::RemoveField(i) => {
            v.as_object_mut().unwrap().remove(DATA_FIELDS[i]);
            edit(v)
        }
        Corruption::UnknownField => {
            v["checksum"] = json!(0);
            edit(v)
        }
        Corruption::UnknownTag => {
            v["t"] = json!("datum");
            edit(v)
        }
        Corruption::WrongTypeRound => {
            v["round"] = json!(rec.round.to_string());
            edit(v)
        }
        Corruption::InjectGarbage(at) => {
            let at = at % body.len();
            let mut out = body[..at].to_vec();
            out.extend_from_slice(b"}{\x00");
            out.extend_from_slice(&body[at..]);
            out.push(b'\n');
            out
        }
        Corruption::EmbeddedNewline(at) => {
            let at = 1 + at % (body.len() - 1);
            let mut out = body[..at].to_vec();
            out.push(b'\n');
            out.extend_from_slice(&body[at..]);
            out.push(b'\n');
            out
        }
    }
}
