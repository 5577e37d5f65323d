//! Brute-force oracles and proptest strategies shared by the integration
//! tests.
//!
//! The oracles never touch the library's set algebra or integration: sets
//! become bit vectors over the level-`GRID` cells and functions become
//! vectors of cell values, and everything is computed from those.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rnkit::dyadic::{self, DyadicInterval, RingSet};
use rnkit::stepfn::StepFunction;

pub type Q = BigRational;

/// Finest level the strategies generate.
pub const GRID: u32 = 7;
pub const CELLS: usize = 1 << GRID;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    q(n, 1)
}

pub fn p2(e: i64) -> Q {
    if e >= 0 {
        BigRational::from_integer(BigInt::from(1) << e as usize)
    } else {
        BigRational::new(BigInt::from(1), BigInt::from(1) << (-e) as usize)
    }
}

pub fn cell_len() -> Q {
    q(1, CELLS as i64)
}

/// Cells covered by the stored pieces of `e`.
pub fn cells(e: &RingSet) -> Vec<bool> {
    let mut bits = vec![false; CELLS];
    for piece in e.pieces() {
        assert!(piece.level() <= GRID, "piece finer than the grid");
        let shift = GRID - piece.level();
        let from = (piece.index() as usize) << shift;
        let to = (piece.index() as usize + 1) << shift;
        bits[from..to].iter_mut().for_each(|b| *b = true);
    }
    bits
}

pub fn from_cells(bits: &[bool]) -> RingSet {
    RingSet::from_intervals(
        bits.iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| DyadicInterval::new(GRID, i as u64).unwrap()),
    )
}

pub fn cell_count(e: &RingSet) -> usize {
    cells(e).iter().filter(|&&b| b).count()
}

pub fn lebesgue(e: &RingSet) -> Q {
    q(cell_count(e) as i64, CELLS as i64)
}

/// Cell values of a step function, read off its stored pieces.
pub fn values(s: &StepFunction) -> Vec<Q> {
    let mut out = vec![qi(0); CELLS];
    for p in s.pieces() {
        for (i, b) in cells(&p.support).into_iter().enumerate() {
            if b {
                out[i] += &p.value;
            }
        }
    }
    out
}

pub fn integral(s: &StepFunction, e: &RingSet) -> Q {
    let v = values(s);
    let c = cells(e);
    (0..CELLS).filter(|&i| c[i]).map(|i| v[i].clone()).sum::<Q>() * cell_len()
}

pub fn l1_distance(s: &StepFunction, t: &StepFunction) -> Q {
    let (a, b) = (values(s), values(t));
    (0..CELLS).map(|i| abs(&(&a[i] - &b[i]))).sum::<Q>() * cell_len()
}

pub fn abs(x: &Q) -> Q {
    if *x < qi(0) {
        -x.clone()
    } else {
        x.clone()
    }
}

/// `∫_E (c0 + c1·x) dx` over the cells of `e`, by the antiderivative.
pub fn linear_integral(c0: &Q, c1: &Q, e: &RingSet) -> Q {
    let c = cells(e);
    let mut total = qi(0);
    for (i, &b) in c.iter().enumerate() {
        if b {
            let a = q(i as i64, CELLS as i64);
            let z = q(i as i64 + 1, CELLS as i64);
            total += c0 * (&z - &a) + c1 * (&z * &z - &a * &a) / qi(2);
        }
    }
    total
}

pub fn arb_interval(max_level: u32) -> impl Strategy<Value = DyadicInterval> {
    (0..=max_level).prop_flat_map(|l| (Just(l), 0..(1u64 << l))).prop_map(|(l, i)| dyadic::interval(l, i).unwrap())
}

pub fn arb_set() -> impl Strategy<Value = RingSet> {
    prop::collection::vec(arb_interval(GRID), 0..6).prop_map(RingSet::from_intervals)
}

pub fn arb_value() -> impl Strategy<Value = Q> {
    (-12i64..=12, 1i64..=8).prop_map(|(n, d)| q(n, d))
}

pub fn arb_nonneg_value() -> impl Strategy<Value = Q> {
    (0i64..=12, 1i64..=8).prop_map(|(n, d)| q(n, d))
}

pub fn arb_raw_step() -> impl Strategy<Value = Vec<(RingSet, Q)>> {
    prop::collection::vec((arb_set(), arb_value()), 0..5)
}

pub fn arb_step() -> impl Strategy<Value = StepFunction> {
    arb_raw_step().prop_map(rnkit::stepfn::normalize)
}

pub fn arb_density() -> impl Strategy<Value = StepFunction> {
    prop::collection::vec((arb_set(), arb_nonneg_value()), 0..5).prop_map(rnkit::stepfn::normalize)
}

pub fn arb_precision() -> impl Strategy<Value = Q> {
    (0i64..12, 1i64..4).prop_map(|(e, m)| p2(-e) * qi(m))
}

pub fn arb_finite_set(max: u64, max_len: usize) -> impl Strategy<Value = BTreeSet<u64>> {
    prop::collection::btree_set(0..=max, 0..=max_len)
}
