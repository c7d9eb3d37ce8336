//! Offline checks of the logical structure behind the simulation.
//!
//! * Exhaustive search over the 64 joint ±1 assignments of the six
//!   variables X1..X3, Y1..Y3, with a GF(2) rank count as a second route.
//! * The six identification equalities that would put the four
//!   experiments on one probability space, decided symbolically.
//! * Symbolic triple products per setting, and empirical balance.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::Serializer;
use serde::Serialize;

use crate::model::{
    eval_signed_product, normalize_product, symbolic_triple_product, MeasurementTable,
    ModelError, SettingVector, Sign, SignedProduct, StationRole, Tick,
};
use crate::schedule::Schedule;

/// One of the six element-of-reality variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    X1,
    X2,
    X3,
    Y1,
    Y2,
    Y3,
}

impl Variable {
    /// Lexicographic order used for enumeration output.
    pub const ALL: [Variable; 6] = [
        Variable::X1,
        Variable::X2,
        Variable::X3,
        Variable::Y1,
        Variable::Y2,
        Variable::Y3,
    ];

    fn position(self) -> usize {
        self as usize
    }

    /// Bit of this variable in a parity row; X1 is the most significant.
    fn bit(self) -> u8 {
        1 << (5 - self.position())
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for Variable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `∏ variables = target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParityConstraint {
    pub variables: Vec<Variable>,
    pub target: Sign,
}

impl ParityConstraint {
    /// Panics if a variable repeats.
    pub fn new(variables: &[Variable], target: Sign) -> ParityConstraint {
        let mut seen = 0u8;
        for v in variables {
            assert!(seen & v.bit() == 0, "variable {v} repeated in constraint");
            seen |= v.bit();
        }
        ParityConstraint {
            variables: variables.to_vec(),
            target,
        }
    }

    fn mask(&self) -> u8 {
        self.variables.iter().fold(0, |m, v| m | v.bit())
    }

    pub fn holds(&self, a: &Assignment) -> bool {
        Sign::product(self.variables.iter().map(|v| a.get(*v))) == self.target
    }
}

/// The three relations derived from the yyx, yxy and xyy experiments.
pub fn three_experiment_constraints() -> Vec<ParityConstraint> {
    use Variable::*;
    vec![
        ParityConstraint::new(&[Y1, Y2, X3], Sign::Minus),
        ParityConstraint::new(&[Y1, X2, Y3], Sign::Minus),
        ParityConstraint::new(&[X1, Y2, Y3], Sign::Minus),
    ]
}

/// `X1 X2 X3 = target`.
pub fn xxx_constraint(target: Sign) -> ParityConstraint {
    use Variable::*;
    ParityConstraint::new(&[X1, X2, X3], target)
}

/// A total ±1 assignment of the six variables, stored as a bitmask with a
/// set bit meaning -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(u8);

impl Assignment {
    pub fn get(self, v: Variable) -> Sign {
        if self.0 & v.bit() == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn values(self) -> [Sign; 6] {
        Variable::ALL.map(|v| self.get(v))
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, i8> = Variable::ALL
            .iter()
            .map(|v| (v.to_string(), self.get(*v).as_i8()))
            .collect();
        map.serialize(s)
    }
}

/// All 64 assignments checked against every constraint, returned in
/// lexicographic order of (X1, X2, X3, Y1, Y2, Y3) with +1 before -1.
pub fn enumerate_assignments(constraints: &[ParityConstraint]) -> Vec<Assignment> {
    (0u8..64)
        .map(Assignment)
        .filter(|a| constraints.iter().all(|c| c.holds(a)))
        .collect()
}

/// Rank and consistency of a constraint system over GF(2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gf2Summary {
    pub rank: u32,
    pub consistent: bool,
}

impl Gf2Summary {
    /// Number of satisfying assignments: 2^(6 - rank), or 0 if inconsistent.
    pub fn solution_count(self) -> usize {
        if self.consistent {
            1 << (Variable::ALL.len() as u32 - self.rank)
        } else {
            0
        }
    }
}

/// Gaussian elimination on the augmented parity matrix. A -1 target is the
/// right-hand side 1.
pub fn gf2_summary(constraints: &[ParityConstraint]) -> Gf2Summary {
    let mut rows: Vec<(u8, bool)> = constraints
        .iter()
        .map(|c| (c.mask(), c.target == Sign::Minus))
        .collect();
    let mut rank = 0;
    for bit in (0..6).rev().map(|b| 1u8 << b) {
        let Some(pivot) = (rank..rows.len()).find(|&i| rows[i].0 & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let (pmask, prhs) = rows[rank];
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row.0 & bit != 0 {
                row.0 ^= pmask;
                row.1 ^= prhs;
            }
        }
        rank += 1;
    }
    let consistent = rows[rank..].iter().all(|(_, rhs)| !rhs);
    Gf2Summary {
        rank: rank as u32,
        consistent,
    }
}

/// A cell of the measurement table, named by station and setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub station: StationRole,
    pub setting: SettingVector,
}

const fn cell(station: StationRole, setting: SettingVector) -> Cell {
    Cell { station, setting }
}

/// The six equalities that identify variables across experiments, e.g.
/// station 1's y outcome in yyx with its y outcome in yxy.
pub const IDENTIFICATIONS: [(&str, Cell, Cell); 6] = {
    use StationRole::{Alice, Bob, Claire};
    const YYX: SettingVector = SettingVector::YYX;
    const YXY: SettingVector = SettingVector::YXY;
    const XYY: SettingVector = SettingVector::XYY;
    const XXX: SettingVector = SettingVector::XXX;
    [
        ("Y1'=Y1''", cell(Alice, YYX), cell(Alice, YXY)),
        ("Y2'=Y2'''", cell(Bob, YYX), cell(Bob, XYY)),
        ("Y3''=Y3'''", cell(Claire, YXY), cell(Claire, XYY)),
        ("X1'''=X1*", cell(Alice, XYY), cell(Alice, XXX)),
        ("X2''=X2*", cell(Bob, YXY), cell(Bob, XXX)),
        ("X3'=X3*", cell(Claire, YYX), cell(Claire, XXX)),
    ]
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationStatus {
    HoldsEverywhere,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Identification {
    pub name: &'static str,
    pub left: Cell,
    pub right: Cell,
    pub left_fn: String,
    pub right_fn: String,
    pub status: IdentificationStatus,
    /// A tick where the two sides differ, when they are not identical.
    pub counterexample: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentificationReport {
    pub equalities: Vec<Identification>,
}

impl IdentificationReport {
    pub fn failing(&self) -> Vec<&'static str> {
        self.equalities
            .iter()
            .filter(|e| e.status == IdentificationStatus::Fails)
            .map(|e| e.name)
            .collect()
    }
}

/// Smallest tick where `q` evaluates to -1, if `q` is not identically +1.
///
/// `r_k(t) = -1` exactly when bit `32 - k` of the tick is set, so setting
/// one such bit flips a single factor.
fn minus_witness(q: &SignedProduct) -> Option<Tick> {
    match (q.sign(), q.indices().last()) {
        (Sign::Minus, _) => Some(Tick::ZERO),
        (Sign::Plus, None) => None,
        (Sign::Plus, Some(&k)) => Some(Tick(1u64 << (crate::model::TICK_BITS - k))),
    }
}

/// Decides each identification by comparing normalized products.
pub fn check_identifications(table: &MeasurementTable) -> Result<IdentificationReport, ModelError> {
    let mut equalities = Vec::with_capacity(IDENTIFICATIONS.len());
    for (name, left, right) in IDENTIFICATIONS {
        let a = table.get(left.station, left.setting)?;
        let b = table.get(right.station, right.setting)?;
        let status = if a == b {
            IdentificationStatus::HoldsEverywhere
        } else {
            IdentificationStatus::Fails
        };
        // a(t) != b(t) exactly where the quotient a*b is -1.
        let quotient = normalize_product(
            a.sign() * b.sign(),
            a.indices().iter().chain(b.indices()).copied(),
        );
        let counterexample = match status {
            IdentificationStatus::HoldsEverywhere => None,
            IdentificationStatus::Fails => minus_witness(&quotient),
        };
        equalities.push(Identification {
            name,
            left,
            right,
            left_fn: a.to_string(),
            right_fn: b.to_string(),
            status,
            counterexample,
        });
    }
    Ok(IdentificationReport { equalities })
}

/// Symbolic triple product of the three stations' entries per setting.
pub fn verify_table_products(
    table: &MeasurementTable,
) -> Result<BTreeMap<SettingVector, SignedProduct>, ModelError> {
    SettingVector::STANDARD_ORDER
        .into_iter()
        .map(|s| {
            let [a, b, c] = StationRole::ALL.map(|r| table.get(r, s));
            Ok((s, symbolic_triple_product(a?, b?, c?)))
        })
        .collect()
}

/// Fraction of +1 outcomes for one (station, window) over scheduled ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceEntry {
    pub station: StationRole,
    pub window_index: usize,
    pub setting: SettingVector,
    pub samples: u32,
    pub plus_fraction: f64,
}

/// Evaluates every station's entry at every scheduled tick.
pub fn balance_statistics(
    table: &MeasurementTable,
    schedule: &Schedule,
) -> Result<Vec<BalanceEntry>, ModelError> {
    let mut out = Vec::new();
    for w in schedule.windows() {
        let ticks: Vec<Tick> = (0..schedule.rounds_per_window())
            .map(|n| schedule.measurement_tick(w.index, n).expect("in range"))
            .collect();
        for station in StationRole::ALL {
            let entry = table.get(station, w.setting)?;
            let mut plus = 0u32;
            for &t in &ticks {
                if eval_signed_product(entry, t)?.is_plus() {
                    plus += 1;
                }
            }
            out.push(BalanceEntry {
                station,
                window_index: w.index,
                setting: w.setting,
                samples: ticks.len() as u32,
                plus_fraction: plus as f64 / ticks.len() as f64,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumerationCase {
    pub name: &'static str,
    pub constraints: Vec<ParityConstraint>,
    pub satisfying: usize,
    pub gf2: Gf2Summary,
    pub assignments: Vec<Assignment>,
}

fn enumeration_case(name: &'static str, constraints: Vec<ParityConstraint>) -> EnumerationCase {
    let assignments = enumerate_assignments(&constraints);
    EnumerationCase {
        name,
        satisfying: assignments.len(),
        gf2: gf2_summary(&constraints),
        constraints,
        assignments,
    }
}

/// The three constraint systems of interest: the three single-x
/// experiments alone, with the quantum xxx = +1, and with xxx = -1.
pub fn standard_enumerations() -> Vec<EnumerationCase> {
    let base = three_experiment_constraints();
    let with = |target| {
        let mut c = base.clone();
        c.push(xxx_constraint(target));
        c
    };
    vec![
        enumeration_case("three_experiments", base.clone()),
        enumeration_case("three_experiments_plus_quantum_xxx", with(Sign::Plus)),
        enumeration_case("three_experiments_plus_local_xxx", with(Sign::Minus)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub assignments: Vec<EnumerationCase>,
    pub identification_report: IdentificationReport,
    pub table_products: BTreeMap<String, SignedProduct>,
    pub balance: Vec<BalanceEntry>,
}

pub fn analyze(table: &MeasurementTable, schedule: &Schedule) -> Result<AnalysisReport, ModelError> {
    Ok(AnalysisReport {
        assignments: standard_enumerations(),
        identification_report: check_identifications(table)?,
        table_products: verify_table_products(table)?
            .into_iter()
            .map(|(s, p)| (s.to_string(), p))
            .collect(),
        balance: balance_statistics(table, schedule)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{standard_table, TICKS_PER_UNIT};
    use crate::schedule::build_default_schedule;

    fn sp(sign: Sign, ks: &[u32]) -> SignedProduct {
        SignedProduct::new(sign, ks.to_vec()).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        // Counts frozen from an independent brute-force enumeration.
        let base = three_experiment_constraints();
        assert_eq!(enumerate_assignments(&base).len(), 8);
        let mut q = base.clone();
        q.push(xxx_constraint(Sign::Plus));
        assert!(enumerate_assignments(&q).is_empty());
        let mut l = base.clone();
        l.push(xxx_constraint(Sign::Minus));
        assert_eq!(enumerate_assignments(&l).len(), 8);
        assert_eq!(enumerate_assignments(&[]).len(), 64);
    }

    #[test]
    fn enumeration_order_is_lexicographic() {
        let all = enumerate_assignments(&[]);
        assert_eq!(all[0].values(), [Sign::Plus; 6]);
        assert_eq!(all[63].values(), [Sign::Minus; 6]);
        // Y3 varies fastest, X1 slowest.
        let mut second = [Sign::Plus; 6];
        second[5] = Sign::Minus;
        assert_eq!(all[1].values(), second);
        let mut middle = [Sign::Plus; 6];
        middle[0] = Sign::Minus;
        assert_eq!(all[32].values(), middle);
    }

    #[test]
    fn gf2_examples() {
        let base = three_experiment_constraints();
        assert_eq!(gf2_summary(&base), Gf2Summary { rank: 3, consistent: true });
        let mut q = base.clone();
        q.push(xxx_constraint(Sign::Plus));
        assert_eq!(gf2_summary(&q), Gf2Summary { rank: 3, consistent: false });
        assert_eq!(gf2_summary(&[]).solution_count(), 64);
    }

    #[test]
    fn standard_identifications() {
        let report = check_identifications(&standard_table()).unwrap();
        assert_eq!(report.failing(), vec!["Y3''=Y3'''"]);
        let failing = &report.equalities[2];
        assert_eq!((failing.left_fn.as_str(), failing.right_fn.as_str()), ("r3", "-r3"));
        assert_eq!(failing.counterexample, Some(Tick::ZERO));
    }

    #[test]
    fn uniform_rows_identify() {
        let mut t = MeasurementTable::new();
        for r in StationRole::ALL {
            for s in SettingVector::STANDARD_ORDER {
                t.insert(r, s, sp(Sign::Plus, &[r.number() as u32]));
            }
        }
        assert!(check_identifications(&t).unwrap().failing().is_empty());
    }

    #[test]
    fn patched_table_identifies_but_breaks_xyy() {
        let mut t = standard_table();
        t.insert(StationRole::Claire, SettingVector::XYY, sp(Sign::Plus, &[3]));
        assert!(check_identifications(&t).unwrap().failing().is_empty());
        let products = verify_table_products(&t).unwrap();
        assert_eq!(products[&SettingVector::XYY].as_constant(), Some(Sign::Plus));
    }

    #[test]
    fn standard_products() {
        let products = verify_table_products(&standard_table()).unwrap();
        let consts: Vec<_> = SettingVector::STANDARD_ORDER
            .iter()
            .map(|s| products[s].clone())
            .collect();
        assert_eq!(
            consts,
            vec![
                SignedProduct::constant(Sign::Minus),
                SignedProduct::constant(Sign::Minus),
                SignedProduct::constant(Sign::Minus),
                SignedProduct::constant(Sign::Plus),
            ]
        );
    }

    #[test]
    fn wrong_sign_row_gives_wrong_constant() {
        let mut t = standard_table();
        t.insert(StationRole::Alice, SettingVector::YYX, sp(Sign::Plus, &[1]));
        let products = verify_table_products(&t).unwrap();
        assert_eq!(products[&SettingVector::YYX], SignedProduct::constant(Sign::Plus));
    }

    #[test]
    fn witness_flips_value() {
        let q = sp(Sign::Plus, &[2, 5]);
        let t = minus_witness(&q).unwrap();
        assert_eq!(eval_signed_product(&q, t).unwrap(), Sign::Minus);
        assert!(t.0 < TICKS_PER_UNIT);
        assert_eq!(minus_witness(&SignedProduct::constant(Sign::Plus)), None);
    }

    #[test]
    fn balance_examples() {
        let schedule = build_default_schedule(10_000, 42).unwrap();
        for b in balance_statistics(&standard_table(), &schedule).unwrap() {
            assert!((b.plus_fraction - 0.5).abs() <= 0.025, "{b:?}");
        }
        let mut constant = MeasurementTable::new();
        for r in StationRole::ALL {
            for s in SettingVector::STANDARD_ORDER {
                constant.insert(r, s, SignedProduct::constant(Sign::Plus));
            }
        }
        let small = build_default_schedule(100, 1).unwrap();
        for b in balance_statistics(&constant, &small).unwrap() {
            assert_eq!(b.plus_fraction, 1.0);
        }
    }

    #[test]
    fn minus_r1_over_full_period_is_half() {
        // Uniform grid over one period of r1.
        let p = sp(Sign::Minus, &[1]);
        let n = 1024u64;
        let plus = (0..n)
            .filter(|i| eval_signed_product(&p, Tick(i * (TICKS_PER_UNIT / n))).unwrap().is_plus())
            .count();
        assert_eq!(plus as u64, n / 2);
    }
}
