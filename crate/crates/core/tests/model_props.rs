use ghzsim::model::{
    eval_signed_product, normalize_product, rademacher, standard_table, symbolic_triple_product,
    SettingVector, Sign, StationRole, Tick, MAX_RADEMACHER_INDEX, TICKS_PER_UNIT,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sine_sign(k: u32, t: Tick) -> Sign {
    let s = (2f64.powi(k as i32) * std::f64::consts::PI * t.as_units_f64()).sin();
    if s > 0.0 {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Fractional part of 2^(k-1) t in ticks, computed with 128-bit arithmetic.
fn frac_ticks(k: u32, t: Tick) -> u128 {
    ((t.0 as u128) << (k - 1)) % TICKS_PER_UNIT as u128
}

#[test]
fn agrees_with_sine_away_from_zeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 100_000 {
        // Stay within a few units so f64 keeps enough fractional precision.
        let t = Tick(rng.random_range(0..8 * TICKS_PER_UNIT));
        let k = rng.random_range(1..=16);
        let f = frac_ticks(k, t);
        // Skip points within float resolution of a sine zero.
        let margin = 1u128 << 12;
        let half = TICKS_PER_UNIT as u128 / 2;
        if f < margin || f.abs_diff(half) < margin || TICKS_PER_UNIT as u128 - f < margin {
            continue;
        }
        assert_eq!(rademacher(k, t).unwrap(), sine_sign(k, t), "k={k} t={t}");
        checked += 1;
    }
}

#[test]
fn standard_products_constant_numerically() {
    let table = standard_table();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for setting in SettingVector::STANDARD_ORDER {
        let expected = setting.ghz_prediction().unwrap();
        for _ in 0..10_000 {
            let t = Tick(rng.random());
            let product = Sign::product(StationRole::ALL.map(|r| {
                eval_signed_product(table.get(r, setting).unwrap(), t).unwrap()
            }));
            assert_eq!(product, expected, "{setting} at {t}");
        }
        let [a, b, c] = StationRole::ALL.map(|r| table.get(r, setting).unwrap());
        assert_eq!(symbolic_triple_product(a, b, c).as_constant(), Some(expected));
    }
}

#[test]
fn single_entries_are_balanced() {
    let n = 40_000u32;
    let band = 5.0 * (0.25 / n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ticks: Vec<Tick> = (0..n).map(|_| Tick(rng.random())).collect();
    for (_, _, p) in standard_table().iter() {
        let plus = ticks
            .iter()
            .filter(|&&t| eval_signed_product(p, t).unwrap().is_plus())
            .count();
        let frac = plus as f64 / n as f64;
        assert!((frac - 0.5).abs() <= band, "{p}: {frac}");
    }
}

proptest! {
    #[test]
    fn values_square_to_one(k in 1..=MAX_RADEMACHER_INDEX, t in any::<u64>()) {
        let v = rademacher(k, Tick(t)).unwrap();
        prop_assert_eq!(v * v, Sign::Plus);
    }

    #[test]
    fn period_is_two_to_one_minus_k(k in 1..=MAX_RADEMACHER_INDEX, t in 0u64..u64::MAX / 2) {
        let period = 1u64 << (32 - (k - 1));
        prop_assert_eq!(rademacher(k, Tick(t)), rademacher(k, Tick(t + period)));
    }

    #[test]
    fn half_period_shift_flips(k in 1..=MAX_RADEMACHER_INDEX, t in 0u64..u64::MAX / 2) {
        let half = 1u64 << (32 - k);
        prop_assert_eq!(rademacher(k, Tick(t)).unwrap(), -rademacher(k, Tick(t + half)).unwrap());
    }

    #[test]
    fn normalize_is_idempotent_and_order_free(
        ks in prop::collection::vec(1u32..=32, 0..20),
        neg in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let sign = if neg { Sign::Minus } else { Sign::Plus };
        let once = normalize_product(sign, ks.clone());
        let twice = normalize_product(once.sign(), once.indices().to_vec());
        prop_assert_eq!(&once, &twice);
        let mut shuffled = ks.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(&once, &normalize_product(sign, shuffled));
        for w in once.indices().windows(2) {
            prop_assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn symbolic_product_matches_pointwise(
        a in prop::collection::btree_set(1u32..=32, 0..4),
        b in prop::collection::btree_set(1u32..=32, 0..4),
        t in any::<u64>(),
    ) {
        use ghzsim::model::SignedProduct;
        let pa = SignedProduct::new(Sign::Minus, a.into_iter().collect()).unwrap();
        let pb = SignedProduct::new(Sign::Plus, b.into_iter().collect()).unwrap();
        let one = SignedProduct::constant(Sign::Plus);
        let sym = symbolic_triple_product(&pa, &pb, &one);
        let t = Tick(t);
        prop_assert_eq!(
            eval_signed_product(&sym, t).unwrap(),
            eval_signed_product(&pa, t).unwrap() * eval_signed_product(&pb, t).unwrap()
        );
    }
}
