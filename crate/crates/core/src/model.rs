//! Rademacher functions, signed Rademacher products and the per-station
//! measurement table.
//!
//! Time is kept as an exact dyadic value: a [`Tick`] counts units of
//! 2⁻³² of one abstract time unit, so every Rademacher function with
//! index `k <= MAX_RADEMACHER_INDEX` is evaluated with a shift and a mask.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Mul, Neg};
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of fractional bits in a [`Tick`].
pub const TICK_BITS: u32 = 32;

/// Ticks in one abstract time unit.
pub const TICKS_PER_UNIT: u64 = 1 << TICK_BITS;

/// Largest Rademacher index resolvable at tick resolution.
pub const MAX_RADEMACHER_INDEX: u32 = TICK_BITS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("rademacher index {0} outside 1..={MAX_RADEMACHER_INDEX}")]
    IndexOutOfRange(u32),
    #[error("no table entry for station {station} under setting {setting}")]
    MissingEntry {
        station: StationRole,
        setting: SettingVector,
    },
    #[error("invalid station role {0}")]
    InvalidRole(i64),
    #[error("invalid sign {0}")]
    InvalidSign(i64),
    #[error("invalid setting label {0:?}")]
    InvalidLabel(String),
    #[error("invalid setting vector {0:?}")]
    InvalidSettingVector(String),
    #[error("invalid table key {0:?}")]
    InvalidTableKey(String),
    #[error("indices {0:?} are not strictly increasing")]
    UnsortedIndices(Vec<u32>),
}

/// Exact dyadic time point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    pub fn from_units(units: u64) -> Tick {
        Tick(units << TICK_BITS)
    }

    /// Nearest tick to a real time value. Negative inputs clamp to zero.
    pub fn from_units_f64(units: f64) -> Tick {
        Tick((units.max(0.0) * TICKS_PER_UNIT as f64).round() as u64)
    }

    pub fn as_units_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_UNIT as f64
    }

    pub fn ticks(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A measurement outcome, +1 or -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn is_plus(self) -> bool {
        self == Sign::Plus
    }

    pub fn product<I: IntoIterator<Item = Sign>>(signs: I) -> Sign {
        signs.into_iter().fold(Sign::Plus, |acc, s| acc * s)
    }
}

impl TryFrom<i64> for Sign {
    type Error = ModelError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(ModelError::InvalidSign(other)),
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        self * Sign::Minus
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Sign::try_from(v).map_err(de::Error::custom)
    }
}

/// One of the three stations. 1 = Alice, 2 = Bob, 3 = Claire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StationRole {
    Alice,
    Bob,
    Claire,
}

impl StationRole {
    pub const ALL: [StationRole; 3] = [StationRole::Alice, StationRole::Bob, StationRole::Claire];

    pub fn number(self) -> u8 {
        match self {
            StationRole::Alice => 1,
            StationRole::Bob => 2,
            StationRole::Claire => 3,
        }
    }

    /// Zero-based position, used to pick this station's component of a setting vector.
    pub fn slot(self) -> usize {
        self.number() as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            StationRole::Alice => "Alice",
            StationRole::Bob => "Bob",
            StationRole::Claire => "Claire",
        }
    }
}

impl TryFrom<i64> for StationRole {
    type Error = ModelError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(StationRole::Alice),
            2 => Ok(StationRole::Bob),
            3 => Ok(StationRole::Claire),
            other => Err(ModelError::InvalidRole(other)),
        }
    }
}

impl fmt::Display for StationRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for StationRole {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n: i64 = s
            .trim()
            .parse()
            .map_err(|_| ModelError::InvalidRole(-1))?;
        StationRole::try_from(n)
    }
}

impl Serialize for StationRole {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for StationRole {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        StationRole::try_from(v).map_err(de::Error::custom)
    }
}

/// Per-station measurement choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SettingLabel {
    X,
    Y,
}

impl SettingLabel {
    pub fn as_char(self) -> char {
        match self {
            SettingLabel::X => 'x',
            SettingLabel::Y => 'y',
        }
    }

    fn from_char(c: char) -> Option<SettingLabel> {
        match c {
            'x' => Some(SettingLabel::X),
            'y' => Some(SettingLabel::Y),
            _ => None,
        }
    }
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for SettingLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next().and_then(SettingLabel::from_char), chars.next()) {
            (Some(l), None) => Ok(l),
            _ => Err(ModelError::InvalidLabel(s.to_string())),
        }
    }
}

impl Serialize for SettingLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SettingLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// The joint setting of all three stations, written station 1 first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SettingVector(pub [SettingLabel; 3]);

impl SettingVector {
    pub const YYX: SettingVector = SettingVector([SettingLabel::Y, SettingLabel::Y, SettingLabel::X]);
    pub const YXY: SettingVector = SettingVector([SettingLabel::Y, SettingLabel::X, SettingLabel::Y]);
    pub const XYY: SettingVector = SettingVector([SettingLabel::X, SettingLabel::Y, SettingLabel::Y]);
    pub const XXX: SettingVector = SettingVector([SettingLabel::X, SettingLabel::X, SettingLabel::X]);

    /// The four experiments in the order they are run.
    pub const STANDARD_ORDER: [SettingVector; 4] = [
        SettingVector::YYX,
        SettingVector::YXY,
        SettingVector::XYY,
        SettingVector::XXX,
    ];

    pub fn label_for(self, station: StationRole) -> SettingLabel {
        self.0[station.slot()]
    }

    /// Product of the three outcomes that quantum mechanics predicts for a
    /// GHZ state: -1 with exactly one `x`, +1 with three. Other settings
    /// carry no definite prediction.
    pub fn ghz_prediction(self) -> Option<Sign> {
        match self.0.iter().filter(|l| **l == SettingLabel::X).count() {
            1 => Some(Sign::Minus),
            3 => Some(Sign::Plus),
            _ => None,
        }
    }
}

impl fmt::Display for SettingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for SettingVector {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let labels: Vec<SettingLabel> = s.chars().filter_map(SettingLabel::from_char).collect();
        if s.chars().count() != 3 || labels.len() != 3 {
            return Err(ModelError::InvalidSettingVector(s.to_string()));
        }
        Ok(SettingVector([labels[0], labels[1], labels[2]]))
    }
}

impl Serialize for SettingVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SettingVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

fn check_index(k: u32) -> Result<(), ModelError> {
    if (1..=MAX_RADEMACHER_INDEX).contains(&k) {
        Ok(())
    } else {
        Err(ModelError::IndexOutOfRange(k))
    }
}

/// The k-th Rademacher function, `sign(sin(2^k π t))`.
///
/// The value is +1 when the fractional part of `2^(k-1) t` lies in
/// `[0, 1/2)` and -1 on `[1/2, 1)`, so the zeros of the sine take +1 at
/// integer multiples of the period and -1 at half periods.
pub fn rademacher(k: u32, t: Tick) -> Result<Sign, ModelError> {
    check_index(k)?;
    let frac = (t.0 << (k - 1)) & (TICKS_PER_UNIT - 1);
    Ok(if frac < TICKS_PER_UNIT / 2 {
        Sign::Plus
    } else {
        Sign::Minus
    })
}

/// A sign times a product of distinct Rademacher functions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SignedProduct {
    sign: Sign,
    indices: Vec<u32>,
}

impl SignedProduct {
    /// Builds a product from strictly increasing indices.
    pub fn new(sign: Sign, indices: Vec<u32>) -> Result<SignedProduct, ModelError> {
        for &k in &indices {
            check_index(k)?;
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::UnsortedIndices(indices));
        }
        Ok(SignedProduct { sign, indices })
    }

    pub fn constant(sign: Sign) -> SignedProduct {
        SignedProduct {
            sign,
            indices: Vec::new(),
        }
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// The constant value, when no Rademacher factor remains.
    pub fn as_constant(&self) -> Option<Sign> {
        self.indices.is_empty().then_some(self.sign)
    }
}

impl fmt::Display for SignedProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.indices.is_empty() {
            return write!(f, "{}", self.sign);
        }
        if self.sign == Sign::Minus {
            f.write_str("-")?;
        }
        let factors: Vec<String> = self.indices.iter().map(|k| format!("r{k}")).collect();
        f.write_str(&factors.join("*"))
    }
}

impl<'de> Deserialize<'de> for SignedProduct {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            sign: Sign,
            indices: Vec<u32>,
        }
        let raw = Raw::deserialize(d)?;
        SignedProduct::new(raw.sign, raw.indices).map_err(de::Error::custom)
    }
}

/// Evaluates `p` at `t`.
pub fn eval_signed_product(p: &SignedProduct, t: Tick) -> Result<Sign, ModelError> {
    p.indices
        .iter()
        .try_fold(p.sign, |acc, &k| Ok(acc * rademacher(k, t)?))
}

/// Cancels repeated factors using `r_k * r_k = 1`.
pub fn normalize_product<I: IntoIterator<Item = u32>>(sign: Sign, ks: I) -> SignedProduct {
    let mut odd = BTreeSet::new();
    for k in ks {
        if !odd.remove(&k) {
            odd.insert(k);
        }
    }
    SignedProduct {
        sign,
        indices: odd.into_iter().collect(),
    }
}

/// Symbolic product of three station functions.
pub fn symbolic_triple_product(
    a: &SignedProduct,
    b: &SignedProduct,
    c: &SignedProduct,
) -> SignedProduct {
    let sign = a.sign * b.sign * c.sign;
    let ks = [a, b, c]
        .into_iter()
        .flat_map(|p| p.indices.iter().copied());
    normalize_product(sign, ks)
}

/// Map from (station, setting) to the function that station outputs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MeasurementTable {
    entries: BTreeMap<(StationRole, SettingVector), SignedProduct>,
}

impl MeasurementTable {
    pub fn new() -> MeasurementTable {
        MeasurementTable::default()
    }

    pub fn insert(&mut self, station: StationRole, setting: SettingVector, p: SignedProduct) {
        self.entries.insert((station, setting), p);
    }

    pub fn entry(&self, station: StationRole, setting: SettingVector) -> Option<&SignedProduct> {
        self.entries.get(&(station, setting))
    }

    pub fn get(
        &self,
        station: StationRole,
        setting: SettingVector,
    ) -> Result<&SignedProduct, ModelError> {
        self.entry(station, setting)
            .ok_or(ModelError::MissingEntry { station, setting })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StationRole, SettingVector, &SignedProduct)> {
        self.entries.iter().map(|((r, s), p)| (*r, *s, p))
    }

    /// Stations that have at least one entry.
    pub fn stations(&self) -> BTreeSet<StationRole> {
        self.entries.keys().map(|(r, _)| *r).collect()
    }

    /// The sub-table holding only `station`'s entries.
    pub fn row(&self, station: StationRole) -> MeasurementTable {
        MeasurementTable {
            entries: self
                .entries
                .iter()
                .filter(|((r, _), _)| *r == station)
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }

    /// Fails on the first (station, setting) pair among `settings` with no entry.
    pub fn check_covers(&self, settings: &[SettingVector]) -> Result<(), ModelError> {
        for station in StationRole::ALL {
            for &setting in settings {
                self.get(station, setting)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<MeasurementTable, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn table_key(station: StationRole, setting: SettingVector) -> String {
    format!("{station}/{setting}")
}

fn parse_table_key(key: &str) -> Result<(StationRole, SettingVector), ModelError> {
    let bad = || ModelError::InvalidTableKey(key.to_string());
    let (role, setting) = key.split_once('/').ok_or_else(bad)?;
    let role = role.parse().map_err(|_| bad())?;
    let setting = setting.parse().map_err(|_| bad())?;
    Ok((role, setting))
}

impl Serialize for MeasurementTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.entries.len()))?;
        for ((r, sv), p) in &self.entries {
            map.serialize_entry(&table_key(*r, *sv), p)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for MeasurementTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, SignedProduct>::deserialize(d)?;
        let mut table = MeasurementTable::new();
        for (key, p) in raw {
            let (r, sv) = parse_table_key(&key).map_err(de::Error::custom)?;
            table.insert(r, sv, p);
        }
        Ok(table)
    }
}

/// Evaluates `station`'s entry for `sv` at `t`.
pub fn table_outcome(
    table: &MeasurementTable,
    station: StationRole,
    sv: SettingVector,
    t: Tick,
) -> Result<Sign, ModelError> {
    eval_signed_product(table.get(station, sv)?, t)
}

fn p(sign: Sign, ks: &[u32]) -> SignedProduct {
    SignedProduct::new(sign, ks.to_vec()).expect("standard entries are valid")
}

/// The twelve-entry table run by the three stations.
///
/// | station | yyx     | yxy     | xyy     | xxx     |
/// |---------|---------|---------|---------|---------|
/// | 1       | -r1     | -r1     | r2 r3   | r2 r3   |
/// | 2       | r2      | r1 r3   | r2      | r1 r3   |
/// | 3       | r1 r2   | r3      | -r3     | r1 r2   |
pub fn standard_table() -> MeasurementTable {
    use Sign::{Minus, Plus};
    use StationRole::{Alice, Bob, Claire};
    let rows: [(StationRole, [SignedProduct; 4]); 3] = [
        (
            Alice,
            [p(Minus, &[1]), p(Minus, &[1]), p(Plus, &[2, 3]), p(Plus, &[2, 3])],
        ),
        (
            Bob,
            [p(Plus, &[2]), p(Plus, &[1, 3]), p(Plus, &[2]), p(Plus, &[1, 3])],
        ),
        (
            Claire,
            [p(Plus, &[1, 2]), p(Plus, &[3]), p(Minus, &[3]), p(Plus, &[1, 2])],
        ),
    ];
    let mut table = MeasurementTable::new();
    for (station, entries) in rows {
        for (setting, entry) in SettingVector::STANDARD_ORDER.into_iter().zip(entries) {
            table.insert(station, setting, entry);
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    // 0.3 units, rounded to the nearest tick.
    const T_0_3: Tick = Tick(1_288_490_189);
    const T_0_25: Tick = Tick(1 << 30);

    fn sine_oracle(k: u32, t: Tick) -> Option<Sign> {
        let s = (2f64.powi(k as i32) * std::f64::consts::PI * t.as_units_f64()).sin();
        if s.abs() < 1e-9 {
            None
        } else if s > 0.0 {
            Some(Sign::Plus)
        } else {
            Some(Sign::Minus)
        }
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(sine_oracle(1, T_0_25), Some(Sign::Plus));
        assert_eq!(rademacher(1, T_0_25), Ok(Sign::Plus));
        assert_eq!(sine_oracle(2, T_0_3), Some(Sign::Minus));
        assert_eq!(rademacher(2, T_0_3), Ok(Sign::Minus));
        assert_eq!(rademacher(1, Tick::ZERO), Ok(Sign::Plus));
        let t = Tick(987_654_321);
        assert_eq!(rademacher(3, t), rademacher(3, Tick(t.0 + (1 << 30))));
    }

    #[test]
    fn rademacher_rejects_unresolvable_indices() {
        assert_eq!(rademacher(0, T_0_3), Err(ModelError::IndexOutOfRange(0)));
        assert_eq!(rademacher(33, T_0_3), Err(ModelError::IndexOutOfRange(33)));
        assert!(rademacher(32, T_0_3).is_ok());
    }

    #[test]
    fn half_period_boundary_is_minus() {
        // frac(2 * 0.25) = 1/2 exactly
        assert_eq!(rademacher(2, T_0_25), Ok(Sign::Minus));
        assert_eq!(rademacher(1, Tick(1 << 31)), Ok(Sign::Minus));
    }

    #[test]
    fn eval_examples() {
        let minus_r1 = p(Sign::Minus, &[1]);
        assert_eq!(eval_signed_product(&minus_r1, T_0_3), Ok(Sign::Minus));
        let one = SignedProduct::constant(Sign::Plus);
        assert_eq!(eval_signed_product(&one, Tick(12345)), Ok(Sign::Plus));
        let r1r2 = p(Sign::Plus, &[1, 2]);
        assert_eq!(eval_signed_product(&r1r2, T_0_3), Ok(Sign::Minus));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_product(Sign::Plus, [1, 1, 2]), p(Sign::Plus, &[2]));
        assert_eq!(normalize_product(Sign::Minus, [2, 3]), p(Sign::Minus, &[2, 3]));
        assert_eq!(
            normalize_product(Sign::Minus, [1, 2, 1, 2, 3, 3]),
            SignedProduct::constant(Sign::Minus)
        );
    }

    #[test]
    fn triple_product_examples() {
        let t = symbolic_triple_product(
            &p(Sign::Minus, &[1]),
            &p(Sign::Plus, &[2]),
            &p(Sign::Plus, &[1, 2]),
        );
        assert_eq!(t.as_constant(), Some(Sign::Minus));
        let t = symbolic_triple_product(
            &p(Sign::Plus, &[2, 3]),
            &p(Sign::Plus, &[1, 3]),
            &p(Sign::Plus, &[1, 2]),
        );
        assert_eq!(t.as_constant(), Some(Sign::Plus));
        let t = symbolic_triple_product(
            &p(Sign::Minus, &[1]),
            &p(Sign::Plus, &[1, 3]),
            &p(Sign::Plus, &[3]),
        );
        assert_eq!(t.as_constant(), Some(Sign::Minus));
    }

    #[test]
    fn table_outcome_examples() {
        let table = standard_table();
        use StationRole::*;
        assert_eq!(
            table_outcome(&table, Claire, SettingVector::YYX, T_0_3),
            Ok(Sign::Minus)
        );
        assert_eq!(
            table_outcome(&table, Alice, SettingVector::XXX, T_0_3),
            Ok(Sign::Minus)
        );
        // r2 at exactly 0.25 sits on a half-period boundary.
        assert_eq!(
            table_outcome(&table, Bob, SettingVector::XYY, T_0_25),
            Ok(Sign::Minus)
        );
        let yyy = SettingVector([SettingLabel::Y; 3]);
        assert_eq!(
            table_outcome(&table, Bob, yyy, T_0_25),
            Err(ModelError::MissingEntry {
                station: Bob,
                setting: yyy
            })
        );
    }

    #[test]
    fn standard_table_entries() {
        let table = standard_table();
        assert_eq!(table.len(), 12);
        use StationRole::*;
        assert_eq!(table.entry(Alice, SettingVector::YYX), Some(&p(Sign::Minus, &[1])));
        assert_eq!(table.entry(Bob, SettingVector::YXY), Some(&p(Sign::Plus, &[1, 3])));
        assert_eq!(table.entry(Claire, SettingVector::XYY), Some(&p(Sign::Minus, &[3])));
    }

    #[test]
    fn table_json_format() {
        let table = standard_table();
        let json = serde_json::to_value(&table).unwrap();
        assert_eq!(json["1/yyx"], serde_json::json!({"sign": -1, "indices": [1]}));
        assert_eq!(json["3/xxx"], serde_json::json!({"sign": 1, "indices": [1, 2]}));
        let back = MeasurementTable::from_json(&table.to_json()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn table_json_rejects_bad_input() {
        assert!(MeasurementTable::from_json(r#"{"4/yyx":{"sign":1,"indices":[]}}"#).is_err());
        assert!(MeasurementTable::from_json(r#"{"1/yyz":{"sign":1,"indices":[]}}"#).is_err());
        assert!(MeasurementTable::from_json(r#"{"1/yyx":{"sign":0,"indices":[]}}"#).is_err());
        assert!(MeasurementTable::from_json(r#"{"1/yyx":{"sign":1,"indices":[2,1]}}"#).is_err());
        assert!(MeasurementTable::from_json(r#"{"1/yyx":{"sign":1,"indices":[33]}}"#).is_err());
    }

    #[test]
    fn row_keeps_one_station() {
        let row = standard_table().row(StationRole::Bob);
        assert_eq!(row.len(), 4);
        assert_eq!(row.stations(), BTreeSet::from([StationRole::Bob]));
    }

    #[test]
    fn ghz_predictions() {
        assert_eq!(SettingVector::YYX.ghz_prediction(), Some(Sign::Minus));
        assert_eq!(SettingVector::XXX.ghz_prediction(), Some(Sign::Plus));
        assert_eq!(SettingVector([SettingLabel::Y; 3]).ghz_prediction(), None);
    }
}
