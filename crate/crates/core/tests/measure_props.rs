mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use num_bigint::BigUint;
use proptest::prelude::*;
use rnkit::dyadic::{self, RingSet};
use rnkit::l1::{self, L1Name};
use rnkit::measures::{self, FiniteMeasure, Measure, MeasureOracle, QueryOutcome, Scaled};
use rnkit::stepfn::{self, StepFunction};

/// `∫_E s·h dλ₀` on the grid.
fn weighted_integral(s: &StepFunction, h: &StepFunction, e: &RingSet) -> Q {
    let (sv, hv, c) = (values(s), values(h), cells(e));
    (0..CELLS).filter(|&i| c[i]).map(|i| &sv[i] * &hv[i]).sum::<Q>() * cell_len()
}

fn arb_linear() -> impl Strategy<Value = (Q, Q)> {
    (arb_nonneg_value(), arb_value()).prop_filter("non-negative", |(c0, c1)| c0 + c1 >= qi(0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn density_queries_are_sound(h in arb_density(), e in arb_set(), p in arb_precision()) {
        let mu = measures::density_measure(h.clone()).unwrap();
        let exact = integral(&h, &e);
        let b = mu.query(&e, &p).unwrap();
        prop_assert!(b.contains(&exact));
        prop_assert!(b.width() <= p);
    }

    #[test]
    fn linear_queries_are_sound((c0, c1) in arb_linear(), e in arb_set(), p in arb_precision()) {
        let mu = measures::linear_density_measure(c0.clone(), c1.clone()).unwrap();
        let b = mu.query(&e, &p).unwrap();
        prop_assert!(b.contains(&linear_integral(&c0, &c1, &e)));
        prop_assert!(b.width() <= p);
        let total = mu.total_mass(&p).unwrap();
        prop_assert!(total.contains(&linear_integral(&c0, &c1, &RingSet::whole())));
    }

    #[test]
    fn bounds_are_additive(h in arb_density(), a in arb_set(), b in arb_set(), p in arb_precision()) {
        let mu = measures::density_measure(h).unwrap();
        let b = b.difference(&a);
        let joint = mu.query(&a.union(&b), &p).unwrap();
        let sum = mu.query(&a, &p).unwrap().add(&mu.query(&b, &p).unwrap());
        prop_assert!(joint.low <= sum.high && sum.low <= joint.high);
    }

    #[test]
    fn scaling_scales(h in arb_density(), e in arb_set(), c in arb_nonneg_value()) {
        let inner = measures::density_measure(h.clone()).unwrap();
        let scaled = Scaled::new(c.clone(), inner).unwrap();
        let b = scaled.query(&e, &p2(-6)).unwrap();
        prop_assert!(b.contains(&(c * integral(&h, &e))));
        prop_assert!(b.width() <= p2(-6));
    }

    #[test]
    fn streams_list_every_code(h in arb_density(), stages in 1u64..12) {
        let mu: Measure = measures::density_measure(h.clone()).unwrap();
        let count = ((stages + 1) * (stages + 2) / 2) as usize;
        let triples: Vec<_> = measures::oracle_to_stream(mu).take(count).collect::<Result<_, _>>().unwrap();
        let codes: BTreeSet<u64> = triples.iter().map(|t| u64::try_from(&t.code).unwrap()).collect();
        prop_assert_eq!(codes, (0..=stages).collect::<BTreeSet<_>>());
        for t in &triples {
            let exact = integral(&h, &dyadic::alpha(&t.code).unwrap());
            prop_assert!(t.low < exact && exact < t.high);
        }
        for c in 0..=stages {
            let narrowest = triples.iter().filter(|t| t.code == BigUint::from(c)).map(|t| &t.high - &t.low).min().unwrap();
            prop_assert!(narrowest <= p2(-((stages - c) as i64)));
        }
    }

    #[test]
    fn integration_is_linear(h in arb_density(), s in arb_step(), t in arb_step(), a in arb_value(), b in arb_value()) {
        let mu = measures::density_measure(h.clone()).unwrap();
        let p = p2(-8);
        let combo = stepfn::linear_combine(&a, &s, &b, &t);
        let lhs = l1::integrate_rsf(mu.as_ref(), &combo, &p).unwrap();
        let rhs = l1::integrate_rsf(mu.as_ref(), &s, &p).unwrap().scale(&a).add(&l1::integrate_rsf(mu.as_ref(), &t, &p).unwrap().scale(&b));
        let exact = weighted_integral(&combo, &h, &RingSet::whole());
        prop_assert!(lhs.contains(&exact) && rhs.contains(&exact));
        prop_assert!(lhs.width() <= p);
    }

    #[test]
    fn integral_is_bounded_by_norm(h in arb_density(), s in arb_step(), e in 0i64..10) {
        let mu: FiniteMeasure = measures::density_measure(h.clone()).unwrap();
        let f = l1::embed_rsf(mu.clone(), s.clone());
        let p = p2(-e);
        let i = l1::integrate(mu.as_ref(), &f, &p).unwrap();
        let n = l1::norm(mu.as_ref(), &f, &p).unwrap();
        prop_assert!(i.contains(&weighted_integral(&s, &h, &RingSet::whole())));
        prop_assert!(n.contains(&weighted_integral(&s.abs(), &h, &RingSet::whole())));
        prop_assert!(abs(&i.midpoint()) <= n.high.clone() + &p);
        prop_assert!(n.low >= qi(0));
    }

    #[test]
    fn linear_distance_matches_quadrature(s in arb_step(), (c0, c1) in arb_linear()) {
        // |s - (c0 + c1 x)| on one grid cell, integrated by splitting at the root.
        let sv = values(&s);
        let mut expected = qi(0);
        for (i, v) in sv.iter().enumerate() {
            let (a, z) = (q(i as i64, CELLS as i64), q(i as i64 + 1, CELLS as i64));
            let g = |x: &Q| v - &c0 - &c1 * x;
            let prim = |x: &Q| v * x - &c0 * x - &c1 * x * x / qi(2);
            let seg = |lo: &Q, hi: &Q| abs(&(prim(hi) - prim(lo)));
            if c1 != qi(0) {
                let root = (v - &c0) / &c1;
                if root > a && root < z && g(&a) * g(&z) < qi(0) {
                    expected += seg(&a, &root) + seg(&root, &z);
                    continue;
                }
            }
            expected += seg(&a, &z);
        }
        prop_assert_eq!(measures::l1_distance_to_linear(&s, &c0, &c1), expected);
    }
}

#[test]
fn stream_oracle_reads_back_a_name() {
    let h = StepFunction::indicator(&RingSet::from_interval(dyadic::interval(2, 1).unwrap()));
    let mu: Measure = measures::density_measure(h.clone()).unwrap();
    let oracle = measures::stream_to_oracle(measures::oracle_to_stream(mu), 400);
    let e = dyadic::alpha_u64(7).unwrap();
    match oracle.try_query(&e, &p2(-3)).unwrap() {
        QueryOutcome::Bounds(b) => assert!(b.contains(&integral(&h, &e))),
        QueryOutcome::Unknown => panic!("code 7 should appear early"),
    }
    assert_eq!(oracle.try_query(&e, &p2(-40)).unwrap(), QueryOutcome::Unknown);
    assert_eq!(oracle.consumed(), 400);
}

#[test]
fn names_carry_their_measure() {
    let lam = measures::lebesgue_oracle();
    let other = measures::density_measure(StepFunction::constant(qi(2))).unwrap();
    let f: L1Name = l1::embed_rsf(Arc::clone(&lam) as Measure, StepFunction::constant(qi(1)));
    assert!(l1::integrate(lam.as_ref(), &f, &p2(-3)).is_ok());
    assert!(l1::integrate(other.as_ref(), &f, &p2(-3)).is_err());
}
