mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rnkit::ec::{self, EcOracle, EnFormat, EnName};
use rnkit::Error;

/// Entries listing `set` in a shuffled order, with dummies sprinkled in.
fn arb_entries() -> impl Strategy<Value = (BTreeSet<u64>, Vec<u64>)> {
    arb_finite_set(40, 12)
        .prop_flat_map(|set| {
            let members: Vec<u64> = set.iter().map(|n| n + 1).collect();
            let len = members.len();
            (Just(set), Just(members).prop_shuffle(), prop::collection::vec(0usize..=len, 0..6))
        })
        .prop_map(|(set, mut entries, dummies)| {
            for at in dummies {
                entries.insert(at.min(entries.len()), 0);
            }
            (set, entries)
        })
}

/// Where each member is listed, the modulus a truthful caller would supply.
fn true_modulus(entries: &[u64]) -> ec::Modulus {
    let entries = entries.to_vec();
    Arc::new(move |x| Ok(entries.iter().position(|&v| v == x + 1).map_or(0, |p| p + 1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn encoding_round_trips(set in arb_finite_set(60, 15)) {
        let name = ec::en_encode(&set);
        prop_assert_eq!(ec::en_decode_prefix(&name, set.len() + 3).unwrap(), set);
    }

    #[test]
    fn text_formats_round_trip((_, entries) in arb_entries()) {
        let word = ec::render_word(&entries);
        prop_assert_eq!(ec::parse_word(&word).unwrap(), entries.clone());
        if !entries.is_empty() {
            prop_assert_eq!(ec::detect_format(&word), EnFormat::Word);
            prop_assert_eq!(ec::parse_en(&word, None).unwrap(), entries.clone());
        }
        let numeric = ec::render_numeric(&entries);
        prop_assert_eq!(ec::parse_en(&numeric, Some(EnFormat::Numeric)).unwrap(), entries);
    }

    #[test]
    fn budgets_are_monotone((set, entries) in arb_entries(), b1 in 0usize..20, extra in 0usize..20) {
        let name = EnName::from_entries(entries.clone());
        let small = ec::ec_apply(&EcOracle::Budgeted { budget: b1 }, &name);
        let large = ec::ec_apply(&EcOracle::Budgeted { budget: b1 + extra }, &name);
        let full = ec::ec_apply(&EcOracle::Budgeted { budget: entries.len() }, &name);
        for x in 0..45u64 {
            let (s, l) = (small.bit(x).unwrap(), large.bit(x).unwrap());
            prop_assert!(!s || l);
            prop_assert!(!l || set.contains(&x));
            prop_assert_eq!(full.bit(x).unwrap(), set.contains(&x));
        }
    }

    #[test]
    fn certified_and_cheat_agree((set, entries) in arb_entries()) {
        let name = EnName::from_entries(entries.clone());
        let certified = ec::ec_apply(&EcOracle::Certified { modulus: true_modulus(&entries) }, &name);
        let cheat = ec::ec_apply(&EcOracle::cheat_from_set(set.clone()), &name);
        for x in 0..45u64 {
            prop_assert_eq!(certified.bit(x).unwrap(), set.contains(&x));
            prop_assert_eq!(cheat.bit(x).unwrap(), set.contains(&x));
        }
        certified.recheck().unwrap();
    }

    #[test]
    fn pairing_round_trips(n in 0u64..100_000, k in 0u64..100_000) {
        prop_assert_eq!(ec::unpair(ec::pair(n, k)), (n, k));
    }
}

#[test]
fn lying_modulus_is_caught() {
    let entries = vec![0, 4, 0, 0, 8, 0];
    let modulus: ec::Modulus = Arc::new(|x| Ok(if x == 7 { 0 } else { 6 }));
    let cf = ec::ec_apply(&EcOracle::Certified { modulus }, &EnName::from_entries(entries));
    assert!(!cf.bit(7).unwrap());
    assert_eq!(cf.bit(3), Err(Error::ContractViolation(7)));
}

#[test]
fn one_application_only() {
    let guard = ec::single_use_guard(EcOracle::Budgeted { budget: 3 });
    let name = EnName::all_dummies();
    assert!(ec::ec_apply_guarded(&guard, &name).is_ok());
    assert!(matches!(ec::ec_apply_guarded(&guard, &name), Err(Error::DisciplineViolation(_))));
    assert_eq!(guard.applications(), 2);
}

#[test]
fn late_failure_does_not_hide_early_entries() {
    let source = vec![Ok(5), Ok(0), Err(Error::NameExhausted(2))].into_iter();
    let name = EnName::from_source(source);
    assert_eq!(name.position_of(4, 1000).unwrap(), Some(0));
    assert!(name.position_of(9, 1000).is_err());
}

#[test]
fn repeated_entries_are_rejected() {
    assert!(matches!(ec::parse_word("0101001"), Err(Error::MalformedName { .. })));
    let name = EnName::from_entries(vec![3, 0, 3]);
    assert!(matches!(name.prefix(3), Err(Error::MalformedName { .. })));
}
