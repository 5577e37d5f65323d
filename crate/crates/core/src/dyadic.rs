//! Dyadic intervals `J(n,k) = [k/2^n, (k+1)/2^n)` on `[0,1)` and the ring of
//! their finite unions.
//!
//! A [`RingSet`] is kept in canonical form: its pieces are exactly the maximal
//! dyadic intervals contained in the set, sorted by left endpoint. Two ring
//! sets are equal as values iff they denote the same subset of `[0,1)`.
//!
//! Internally every endpoint is an integer multiple ("tick") of `2^-64`, so
//! set algebra reduces to merging sorted integer runs.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub const MAX_LEVEL: u32 = 64;

/// Endpoint position in units of `2^-64`.
pub type Tick = u128;

/// The tick count of the whole space `[0,1)`.
pub const UNIT_TICKS: Tick = 1 << MAX_LEVEL;

/// Bitmask codes are only materialized while their highest bit stays below
/// this serial number (a code with bit `j` set needs `j` bits of storage).
const MAX_BITMASK_SERIAL: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct DyadicInterval {
    level: u32,
    index: u64,
}

#[derive(Deserialize)]
struct RawInterval {
    level: u64,
    index: u64,
}

impl TryFrom<RawInterval> for DyadicInterval {
    type Error = Error;

    fn try_from(raw: RawInterval) -> Result<Self> {
        let level = u32::try_from(raw.level).map_err(|_| Error::LevelOverflow(raw.level))?;
        DyadicInterval::new(level, raw.index)
    }
}

impl DyadicInterval {
    pub const UNIT: DyadicInterval = DyadicInterval { level: 0, index: 0 };

    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelOverflow(level.into()));
        }
        if level < 64 && index >> level != 0 {
            return Err(Error::IndexOutOfRange { level, index });
        }
        Ok(DyadicInterval { level, index })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Width in ticks.
    pub fn span(&self) -> Tick {
        1u128 << (MAX_LEVEL - self.level)
    }

    pub fn start_tick(&self) -> Tick {
        u128::from(self.index) * self.span()
    }

    pub fn end_tick(&self) -> Tick {
        self.start_tick() + self.span()
    }

    pub fn left(&self) -> Rational {
        Rational::new(self.index.into(), (num_bigint::BigInt::one() << self.level).into())
    }

    pub fn right(&self) -> Rational {
        Rational::new(
            (u128::from(self.index) + 1).into(),
            (num_bigint::BigInt::one() << self.level).into(),
        )
    }

    pub fn length(&self) -> Rational {
        rational::pow2(-i64::from(self.level))
    }

    pub fn midpoint_tick(&self) -> Tick {
        self.start_tick() + self.span() / 2
    }

    /// The left and right halves, one level down.
    pub fn children(&self) -> Result<(DyadicInterval, DyadicInterval)> {
        let level = self.level + 1;
        let left = DyadicInterval::new(level, self.index.checked_mul(2).ok_or(Error::LevelOverflow(level.into()))?)?;
        let right = DyadicInterval::new(level, left.index + 1)?;
        Ok((left, right))
    }

    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.level >= self.level && other.index >> (other.level - self.level) == self.index
    }

    pub fn contains_tick(&self, t: Tick) -> bool {
        self.start_tick() <= t && t < self.end_tick()
    }

    /// Position in the level-then-index enumeration `J00, J10, J11, J20, ...`.
    pub fn serial(&self) -> u128 {
        (1u128 << self.level) - 1 + u128::from(self.index)
    }

    pub fn from_serial(serial: u128) -> Result<Self> {
        // level = floor(log2(serial + 1))
        let shifted = serial
            .checked_add(1)
            .ok_or(Error::LevelOverflow(u64::from(MAX_LEVEL) + 1))?;
        let level = 127 - shifted.leading_zeros();
        if level > MAX_LEVEL {
            return Err(Error::LevelOverflow(level.into()));
        }
        let index = shifted - (1u128 << level);
        DyadicInterval::new(level, index as u64)
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.left(), self.right())
    }
}

pub fn interval(level: u32, index: u64) -> Result<DyadicInterval> {
    DyadicInterval::new(level, index)
}

/// A finite union of dyadic intervals in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "RawRingSet")]
pub struct RingSet {
    pieces: Vec<DyadicInterval>,
}

#[derive(Deserialize)]
struct RawRingSet {
    pieces: Vec<DyadicInterval>,
}

impl From<RawRingSet> for RingSet {
    fn from(raw: RawRingSet) -> Self {
        RingSet::from_intervals(raw.pieces)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

impl RingSet {
    pub fn empty() -> Self {
        RingSet::default()
    }

    /// `Ω = [0,1)`.
    pub fn whole() -> Self {
        RingSet { pieces: vec![DyadicInterval::UNIT] }
    }

    pub fn from_interval(i: DyadicInterval) -> Self {
        RingSet { pieces: vec![i] }
    }

    /// Canonical union of arbitrary, possibly overlapping, intervals.
    pub fn from_intervals(intervals: impl IntoIterator<Item = DyadicInterval>) -> Self {
        let mut runs: Vec<(Tick, Tick)> = intervals.into_iter().map(|i| (i.start_tick(), i.end_tick())).collect();
        runs.sort_unstable();
        RingSet::from_runs(&merge_sorted_runs(runs))
    }

    /// Builds the canonical set from sorted, disjoint, non-adjacent tick runs.
    pub(crate) fn from_runs(runs: &[(Tick, Tick)]) -> Self {
        let mut pieces = Vec::new();
        for &(start, end) in runs {
            decompose_run(start, end, &mut pieces);
        }
        RingSet { pieces }
    }

    /// Maximal runs `[start, end)` of the set, sorted and non-touching.
    pub fn runs(&self) -> Vec<(Tick, Tick)> {
        let mut runs: Vec<(Tick, Tick)> = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let (s, e) = (p.start_tick(), p.end_tick());
            match runs.last_mut() {
                Some(last) if last.1 == s => last.1 = e,
                _ => runs.push((s, e)),
            }
        }
        runs
    }

    pub fn pieces(&self) -> &[DyadicInterval] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn is_whole(&self) -> bool {
        self.pieces == [DyadicInterval::UNIT]
    }

    pub fn union(&self, other: &RingSet) -> RingSet {
        self.apply(SetOp::Union, other)
    }

    pub fn intersection(&self, other: &RingSet) -> RingSet {
        self.apply(SetOp::Intersection, other)
    }

    pub fn difference(&self, other: &RingSet) -> RingSet {
        self.apply(SetOp::Difference, other)
    }

    pub fn complement(&self) -> RingSet {
        RingSet::whole().difference(self)
    }

    pub fn apply(&self, op: SetOp, other: &RingSet) -> RingSet {
        // Fast paths keep the hot loops in the partition search cheap.
        match op {
            SetOp::Union if other.is_empty() => return self.clone(),
            SetOp::Union if self.is_empty() => return other.clone(),
            SetOp::Intersection if self.is_empty() || other.is_empty() => return RingSet::empty(),
            SetOp::Intersection if self.is_whole() => return other.clone(),
            SetOp::Intersection if other.is_whole() => return self.clone(),
            SetOp::Difference if self.is_empty() || other.is_whole() => return RingSet::empty(),
            SetOp::Difference if other.is_empty() => return self.clone(),
            _ => {}
        }
        let keep = |a: bool, b: bool| match op {
            SetOp::Union => a || b,
            SetOp::Intersection => a && b,
            SetOp::Difference => a && !b,
        };
        RingSet::from_runs(&combine_runs(&self.runs(), &other.runs(), keep))
    }

    pub fn is_subset(&self, other: &RingSet) -> bool {
        self.difference(other).is_empty()
    }

    pub fn is_disjoint(&self, other: &RingSet) -> bool {
        self.intersection(other).is_empty()
    }

    pub fn contains_tick(&self, t: Tick) -> bool {
        let idx = self.pieces.partition_point(|p| p.end_tick() <= t);
        self.pieces.get(idx).is_some_and(|p| p.contains_tick(t))
    }

    /// Lebesgue measure in ticks.
    pub fn measure_ticks(&self) -> Tick {
        self.pieces.iter().map(DyadicInterval::span).sum()
    }

    pub fn lebesgue(&self) -> Rational {
        ticks_to_rational(self.measure_ticks())
    }

    pub fn max_level(&self) -> u32 {
        self.pieces.iter().map(DyadicInterval::level).max().unwrap_or(0)
    }

    pub fn least_left_tick(&self) -> Option<Tick> {
        self.pieces.first().map(DyadicInterval::start_tick)
    }

    /// True when no two adjacent pieces could be merged and the pieces are
    /// sorted and disjoint.
    pub fn is_canonical(pieces: &[DyadicInterval]) -> bool {
        let runs: Vec<(Tick, Tick)> = pieces.iter().map(|p| (p.start_tick(), p.end_tick())).collect();
        if runs.windows(2).any(|w| w[0].1 > w[1].0) {
            return false;
        }
        RingSet::from_intervals(pieces.iter().copied()).pieces == pieces
    }
}

impl fmt::Display for RingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.is_empty() {
            return f.write_str("∅");
        }
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∪ ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

pub fn ticks_to_rational(ticks: Tick) -> Rational {
    Rational::new(ticks.into(), UNIT_TICKS.into())
}

pub fn set_op(op: SetOp, a: &RingSet, b: &RingSet) -> RingSet {
    a.apply(op, b)
}

pub fn lebesgue(e: &RingSet) -> Rational {
    e.lebesgue()
}

fn merge_sorted_runs(runs: Vec<(Tick, Tick)>) -> Vec<(Tick, Tick)> {
    let mut merged: Vec<(Tick, Tick)> = Vec::with_capacity(runs.len());
    for (s, e) in runs {
        if s >= e {
            continue;
        }
        match merged.last_mut() {
            Some(last) if last.1 >= s => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

fn combine_runs(a: &[(Tick, Tick)], b: &[(Tick, Tick)], keep: impl Fn(bool, bool) -> bool) -> Vec<(Tick, Tick)> {
    let mut bounds: Vec<Tick> = a.iter().chain(b).flat_map(|&(s, e)| [s, e]).collect();
    bounds.sort_unstable();
    bounds.dedup();
    let (mut i, mut j) = (0, 0);
    let mut out: Vec<(Tick, Tick)> = Vec::new();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        while i < a.len() && a[i].1 <= lo {
            i += 1;
        }
        while j < b.len() && b[j].1 <= lo {
            j += 1;
        }
        let in_a = i < a.len() && a[i].0 <= lo;
        let in_b = j < b.len() && b[j].0 <= lo;
        if keep(in_a, in_b) {
            match out.last_mut() {
                Some(last) if last.1 == lo => last.1 = hi,
                _ => out.push((lo, hi)),
            }
        }
    }
    out
}

/// Greedy split of `[start, end)` into maximal aligned dyadic blocks.
fn decompose_run(mut start: Tick, end: Tick, out: &mut Vec<DyadicInterval>) {
    while start < end {
        let align = if start == 0 { UNIT_TICKS } else { 1u128 << start.trailing_zeros() };
        let room = end - start;
        let fit = 1u128 << (127 - room.leading_zeros());
        let span = align.min(fit).min(UNIT_TICKS);
        let level = MAX_LEVEL - span.trailing_zeros();
        out.push(DyadicInterval { level, index: (start / span) as u64 });
        start += span;
    }
}

/// Union of `ι(j)` over the set bits `j` of `mask`.
pub fn bitmask_set(mask: &BigUint) -> Result<RingSet> {
    let bits = mask.bits();
    let mut intervals = Vec::with_capacity(mask.count_ones() as usize);
    for j in 0..bits {
        if mask.bit(j) {
            intervals.push(DyadicInterval::from_serial(u128::from(j))?);
        }
    }
    Ok(RingSet::from_intervals(intervals))
}

/// Least bitmask whose selected intervals union to `e`: the bits of its
/// canonical pieces.
pub fn bitmask_code(e: &RingSet) -> Result<BigUint> {
    let mut code = BigUint::zero();
    for p in e.pieces() {
        let serial = p.serial();
        if serial >= u128::from(MAX_BITMASK_SERIAL) {
            return Err(Error::CodeTooLarge(format!("bitmask bit {serial} for piece {p}")));
        }
        code.set_bit(serial as u64, true);
    }
    Ok(code)
}

/// The numbering `α` of the ring.
///
/// Odd codes `2m+1` name the single interval `ι(m)`; even codes `2m` name the
/// bitmask union of `m`. Every ring element is reached, and single intervals
/// get small codes, so `α(0), ..., α(n)` refine down to level `~log2(n)`.
pub fn alpha(code: &BigUint) -> Result<RingSet> {
    let (half, odd) = code.div_rem(&BigUint::from(2u8));
    if odd.is_zero() {
        bitmask_set(&half)
    } else {
        let serial = half
            .to_u128()
            .ok_or_else(|| Error::LevelOverflow(half.bits()))?;
        Ok(RingSet::from_interval(DyadicInterval::from_serial(serial)?))
    }
}

pub fn alpha_u64(code: u64) -> Result<RingSet> {
    alpha(&BigUint::from(code))
}

/// Least code `c` with `alpha(c) == e`.
pub fn alpha_inverse(e: &RingSet) -> Result<BigUint> {
    match e.pieces() {
        [] => Ok(BigUint::zero()),
        // 2m+1 < 2^(m+1) for every m, so the odd code always wins.
        [single] => Ok(BigUint::from(single.serial()) * 2u8 + 1u8),
        _ => Ok(bitmask_code(e)? * 2u8),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn iv(level: u32, index: u64) -> DyadicInterval {
        interval(level, index).unwrap()
    }

    fn set(ivs: &[(u32, u64)]) -> RingSet {
        RingSet::from_intervals(ivs.iter().map(|&(l, k)| iv(l, k)))
    }

    #[test]
    fn interval_endpoints() {
        let unit = iv(0, 0);
        assert_eq!((unit.left(), unit.right()), (int(0), int(1)));
        let j11 = iv(1, 1);
        assert_eq!((j11.left(), j11.right()), (ratio(1, 2), int(1)));
        let j32 = iv(3, 2);
        assert_eq!((j32.left(), j32.right()), (ratio(2, 8), ratio(3, 8)));
    }

    #[test]
    fn interval_index_out_of_range() {
        assert_eq!(interval(2, 4), Err(Error::IndexOutOfRange { level: 2, index: 4 }));
        assert!(interval(0, 1).is_err());
        assert!(interval(65, 0).is_err());
        assert!(interval(64, u64::MAX).is_ok());
    }

    #[test]
    fn sibling_union_merges() {
        let u = set(&[(1, 0)]).union(&set(&[(1, 1)]));
        assert_eq!(u.pieces(), &[iv(0, 0)]);
    }

    #[test]
    fn interval_overlap() {
        let a = set(&[(1, 0)]);
        let b = set(&[(2, 1), (1, 1)]);
        assert_eq!(a.intersection(&b), set(&[(2, 1)]));
    }

    #[test]
    fn self_difference_is_empty() {
        let a = set(&[(3, 1), (2, 3), (5, 0)]);
        assert!(a.difference(&a).is_empty());
    }

    #[test]
    fn non_sibling_neighbours_stay_apart() {
        // [1/4,1/2) and [1/2,3/4) touch but are not siblings.
        let s = set(&[(2, 1), (2, 2)]);
        assert_eq!(s.pieces(), &[iv(2, 1), iv(2, 2)]);
        assert!(RingSet::is_canonical(s.pieces()));
        assert!(!RingSet::is_canonical(&[iv(2, 0), iv(2, 1)]));
    }

    #[test]
    fn alpha_examples() {
        assert!(alpha_u64(0).unwrap().is_empty());
        assert_eq!(alpha_u64(1).unwrap(), RingSet::whole());
        // 6 = 2*3: bitmask 0b11 selects J00 and J10.
        let brute = RingSet::from_intervals([DyadicInterval::from_serial(0).unwrap(), DyadicInterval::from_serial(1).unwrap()]);
        assert_eq!(alpha_u64(6).unwrap(), brute);
        assert_eq!(alpha_u64(6).unwrap(), RingSet::whole());
        assert_eq!(alpha_u64(3).unwrap(), set(&[(1, 0)]));
        assert_eq!(alpha_u64(5).unwrap(), set(&[(1, 1)]));
    }

    #[test]
    fn alpha_inverse_is_least() {
        // Brute force over all codes below 2^12.
        let mut least: std::collections::HashMap<RingSet, u64> = std::collections::HashMap::new();
        for c in 0..4096u64 {
            least.entry(alpha_u64(c).unwrap()).or_insert(c);
        }
        for (e, c) in least {
            assert_eq!(alpha_inverse(&e).unwrap(), BigUint::from(c), "{e}");
        }
    }

    #[test]
    fn lebesgue_examples() {
        assert_eq!(lebesgue(&RingSet::whole()), int(1));
        for (n, k) in [(0, 0), (3, 5), (10, 1023), (64, 7)] {
            assert_eq!(lebesgue(&set(&[(n, k)])), rational::pow2(-i64::from(n)));
        }
        assert_eq!(lebesgue(&set(&[(1, 0), (2, 3)])), ratio(3, 4));
    }

    #[test]
    fn serial_round_trip() {
        for s in [0u128, 1, 2, 3, 14, 15, 1000, (1u128 << 65) - 2] {
            assert_eq!(DyadicInterval::from_serial(s).unwrap().serial(), s);
        }
        assert!(DyadicInterval::from_serial((1u128 << 65) - 1).is_err());
    }

    #[test]
    fn deepest_level_is_representable() {
        let deep = iv(64, 12345);
        let s = RingSet::from_interval(deep);
        assert_eq!(s.measure_ticks(), 1);
        assert_eq!(s.complement().measure_ticks(), UNIT_TICKS - 1);
        assert_eq!(s.complement().union(&s), RingSet::whole());
    }

    #[test]
    fn json_shape() {
        let s = set(&[(1, 0), (2, 3)]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"pieces":[{"level":1,"index":0},{"level":2,"index":3}]}"#);
        let back: RingSet = serde_json::from_str(r#"{"pieces":[{"level":1,"index":1},{"level":1,"index":0}]}"#).unwrap();
        assert_eq!(back, RingSet::whole());
        assert!(serde_json::from_str::<RingSet>(r#"{"pieces":[{"level":1,"index":2}]}"#).is_err());
    }
}
