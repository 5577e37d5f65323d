mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rnkit::dyadic::{self, RingSet};
use rnkit::ec;
use rnkit::l1::{self, L1Name};
use rnkit::lowerbound::{self, EncodedMeasure};
use rnkit::measures::{self, Measure, MeasureOracle};
use rnkit::stepfn::{self, StepFunction};

/// `h_p(x)` straight from the definition: on the band of `n = n_k - 1`,
/// `+1/2` on the left half and `-1/2` on the right half of each width
/// `2^-(n+1+k)` cell, over the constant `1/2`.
fn h_at(set: &BTreeSet<u64>, x: &Q) -> Q {
    let mut value = q(1, 2);
    for (k, &n) in set.iter().enumerate() {
        let (lo, hi) = (p2(-(n as i64) - 1), p2(-(n as i64)));
        if *x >= lo && *x < hi {
            let w = p2(-((n + 1 + k as u64) as i64));
            let offset = (x - &lo) / &w;
            let frac = &offset - offset.floor();
            value += if frac < q(1, 2) { q(1, 2) } else { q(-1, 2) };
        }
    }
    value
}

fn arb_point() -> impl Strategy<Value = Q> {
    (0i64..(1 << 30)).prop_map(|n| q(n, 1 << 30))
}

fn half_name(s: StepFunction) -> L1Name {
    l1::embed_rsf(measures::lebesgue_oracle(), s)
}

/// Valid names of `h_p` that differ from the constant one.
fn perturbed_names(set: &BTreeSet<u64>, noise: &RingSet) -> Vec<L1Name> {
    let lam: Measure = measures::lebesgue_oracle();
    let h = lowerbound::density_of_set(set).unwrap();
    let truncated = {
        let set = set.clone();
        move |i: usize| {
            let kept: BTreeSet<u64> = set.iter().copied().filter(|&n| (n as usize) < i + 2).collect();
            // Keep the original k of each band: drop only a tail.
            let prefix: Vec<u64> = set.iter().take(kept.len()).map(|n| n + 1).collect();
            lowerbound::encoded_density(&ec::EnName::from_entries(prefix)).resolved_prefix(kept.len())
        }
    };
    let noise = StepFunction::indicator(noise);
    let h2 = h.clone();
    let noisy = move |i: usize| Ok(h2.add(&noise.scale(&p2(-(i as i64) - 1))));
    let t2 = truncated.clone();
    let noise2 = StepFunction::indicator(&RingSet::from_interval(dyadic::interval(3, 5).unwrap()));
    let both = move |i: usize| Ok(t2(i + 1)?.add(&noise2.scale(&p2(-(i as i64) - 2))));
    vec![
        half_name(h),
        L1Name::from_fn(lam.clone(), truncated),
        L1Name::from_fn(lam.clone(), noisy),
        L1Name::from_fn(lam, both),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn density_matches_definition(set in arb_finite_set(10, 6), xs in prop::collection::vec(arb_point(), 20)) {
        let h = lowerbound::density_of_set(&set).unwrap();
        for x in &xs {
            prop_assert_eq!(h.evaluate(x).unwrap(), h_at(&set, x));
        }
        for v in h.range() {
            prop_assert!(v == qi(0) || v == q(1, 2) || v == qi(1));
        }
    }

    #[test]
    fn bands_never_touch(set in arb_finite_set(12, 8)) {
        let ts: Vec<StepFunction> = set.iter().enumerate().map(|(k, &n)| lowerbound::band_sum(k as u64, n + 1).unwrap()).collect();
        for (i, a) in ts.iter().enumerate() {
            prop_assert!(a.support().is_subset(&RingSet::from_interval(lowerbound::band(set.iter().nth(i).copied().unwrap()).unwrap())));
            for b in &ts[i + 1..] {
                prop_assert!(a.support().is_disjoint(&b.support()));
            }
        }
    }

    #[test]
    fn encoded_measure_is_below_lebesgue(set in arb_finite_set(10, 6), e in arb_set()) {
        let m = EncodedMeasure::from_set(set.iter().copied()).unwrap();
        let h = lowerbound::density_of_set(&set).unwrap();
        let exact = m.exact(&e).unwrap();
        prop_assert_eq!(&exact, &stepfn::integral_lebesgue(&h, &e));
        prop_assert!(exact <= lebesgue(&e));
        let b = m.query(&e, &p2(-10)).unwrap();
        prop_assert!(b.contains(&exact));
    }

    #[test]
    fn band_integrals(set in arb_finite_set(10, 11)) {
        let h = lowerbound::density_of_set(&set).unwrap();
        let gap = h.sub(&StepFunction::constant(q(1, 2))).abs();
        for n in 0..=10u64 {
            let band = RingSet::from_interval(lowerbound::band(n).unwrap());
            let expected = if set.contains(&n) { p2(-(n as i64) - 2) } else { qi(0) };
            prop_assert_eq!(stepfn::integral_lebesgue(&gap, &band), expected);
        }
        prop_assert_eq!(stepfn::l1_distance_lebesgue(&h, &StepFunction::constant(q(1, 2))), lowerbound::expected_distance(&set));
    }

    #[test]
    fn decoding_ignores_the_choice_of_name(set in arb_finite_set(10, 6), noise in arb_set()) {
        let names = perturbed_names(&set, &noise);
        let h = lowerbound::density_of_set(&set).unwrap();
        for name in &names {
            for i in 0..8 {
                prop_assert!(stepfn::l1_distance_lebesgue(&name.approximant(i).unwrap(), &h) <= p2(-(i as i64)));
            }
            let bits: BTreeSet<u64> = (0..=10).filter(|&n| lowerbound::decode(name, n).unwrap().bit).collect();
            prop_assert_eq!(&bits, &set);
        }
    }
}
