//! Rational step functions over the dyadic ring.
//!
//! A [`StepFunction`] stores one piece per distinct non-zero value; the
//! supports are pairwise disjoint ring sets and the function vanishes off
//! their union. Every constructor normalizes, so structural equality is
//! pointwise equality.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, RingSet, Tick, UNIT_TICKS};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepPiece {
    pub support: RingSet,
    #[serde(with = "rational::serde_pq")]
    pub value: Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "RawStepFunction")]
pub struct StepFunction {
    pieces: Vec<StepPiece>,
}

#[derive(Deserialize)]
struct RawStepFunction {
    pieces: Vec<StepPiece>,
}

impl From<RawStepFunction> for StepFunction {
    fn from(raw: RawStepFunction) -> Self {
        normalize(raw.pieces.into_iter().map(|p| (p.support, p.value)))
    }
}

/// A maximal constant stretch `[start, end)` in ticks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Segment {
    pub start: Tick,
    pub end: Tick,
    pub value: Rational,
}

impl StepFunction {
    pub fn zero() -> Self {
        StepFunction::default()
    }

    pub fn constant(value: Rational) -> Self {
        normalize([(RingSet::whole(), value)])
    }

    pub fn indicator(e: &RingSet) -> Self {
        normalize([(e.clone(), Rational::one())])
    }

    pub fn pieces(&self) -> &[StepPiece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Union of all supports.
    pub fn support(&self) -> RingSet {
        self.pieces.iter().fold(RingSet::empty(), |acc, p| acc.union(&p.support))
    }

    pub fn max_level(&self) -> u32 {
        self.pieces.iter().map(|p| p.support.max_level()).max().unwrap_or(0)
    }

    pub fn evaluate_tick(&self, t: Tick) -> Rational {
        self.pieces
            .iter()
            .find(|p| p.support.contains_tick(t))
            .map_or_else(Rational::zero, |p| p.value.clone())
    }

    /// Value at a point of `[0,1)`.
    pub fn evaluate(&self, x: &Rational) -> Result<Rational> {
        if x.is_negative() || *x >= Rational::one() {
            return Err(Error::Domain(format!("{} lies outside [0,1)", rational::format(x))));
        }
        // floor(x * 2^64) lands in the same tick cell as x, and every piece
        // boundary is a whole tick.
        let scaled = (x * Rational::from_integer(BigInt::from(UNIT_TICKS))).floor().to_integer();
        let t = scaled.to_u128().expect("x in [0,1)");
        Ok(self.evaluate_tick(t))
    }

    pub fn scale(&self, c: &Rational) -> StepFunction {
        normalize(self.pieces.iter().map(|p| (p.support.clone(), &p.value * c)))
    }

    pub fn add(&self, other: &StepFunction) -> StepFunction {
        linear_combine(&Rational::one(), self, &Rational::one(), other)
    }

    pub fn sub(&self, other: &StepFunction) -> StepFunction {
        linear_combine(&Rational::one(), self, &-Rational::one(), other)
    }

    pub fn abs(&self) -> StepFunction {
        normalize(self.pieces.iter().map(|p| (p.support.clone(), p.value.abs())))
    }

    pub fn min_value(&self) -> Rational {
        let mut min = self.pieces.iter().map(|p| p.value.clone()).min().unwrap_or_else(Rational::zero);
        if !self.support().is_whole() && min.is_positive() {
            min = Rational::zero();
        }
        min
    }

    pub fn max_value(&self) -> Rational {
        let mut max = self.pieces.iter().map(|p| p.value.clone()).max().unwrap_or_else(Rational::zero);
        if !self.support().is_whole() && max.is_negative() {
            max = Rational::zero();
        }
        max
    }

    /// Distinct values taken on `[0,1)`, including 0 when the support is
    /// not everything.
    pub fn range(&self) -> Vec<Rational> {
        let mut values: Vec<Rational> = self.pieces.iter().map(|p| p.value.clone()).collect();
        if !self.support().is_whole() {
            values.push(Rational::zero());
        }
        values.sort();
        values
    }

    pub(crate) fn segments(&self) -> Vec<Segment> {
        let mut segs: Vec<Segment> = self
            .pieces
            .iter()
            .flat_map(|p| {
                p.support.runs().into_iter().map(move |(start, end)| Segment { start, end, value: p.value.clone() })
            })
            .collect();
        segs.sort_by_key(|s| s.start);
        segs
    }

    pub(crate) fn from_segments(segs: impl IntoIterator<Item = Segment>) -> StepFunction {
        let mut by_value: BTreeMap<Rational, Vec<(Tick, Tick)>> = BTreeMap::new();
        for s in segs {
            if s.value.is_zero() || s.start >= s.end {
                continue;
            }
            let runs = by_value.entry(s.value).or_default();
            match runs.last_mut() {
                Some(last) if last.1 == s.start => last.1 = s.end,
                _ => runs.push((s.start, s.end)),
            }
        }
        let mut pieces: Vec<StepPiece> = by_value
            .into_iter()
            .map(|(value, mut runs)| {
                runs.sort_unstable();
                let mut merged: Vec<(Tick, Tick)> = Vec::with_capacity(runs.len());
                for (s, e) in runs {
                    match merged.last_mut() {
                        Some(last) if last.1 == s => last.1 = e,
                        _ => merged.push((s, e)),
                    }
                }
                StepPiece { support: RingSet::from_runs(&merged), value }
            })
            .collect();
        pieces.sort_by_key(|p| p.support.least_left_tick());
        StepFunction { pieces }
    }

    /// Samples `(k/2^level, s(k/2^level))` for `k < 2^level`.
    pub fn sample_grid(&self, level: u32) -> Result<Vec<(Rational, Rational)>> {
        if level > 24 {
            return Err(Error::Domain(format!("grid level {level} is too fine to export")));
        }
        let segs = self.segments();
        let step = UNIT_TICKS >> level;
        let mut out = Vec::with_capacity(1 << level);
        let mut cursor = 0;
        for k in 0..(1u64 << level) {
            let t = u128::from(k) * step;
            while cursor < segs.len() && segs[cursor].end <= t {
                cursor += 1;
            }
            let v = match segs.get(cursor) {
                Some(s) if s.start <= t => s.value.clone(),
                _ => Rational::zero(),
            };
            out.push((Rational::new(k.into(), (BigInt::one() << level).into()), v));
        }
        Ok(out)
    }
}

/// Pointwise sum of possibly overlapping `(support, value)` terms.
pub fn normalize(raw: impl IntoIterator<Item = (RingSet, Rational)>) -> StepFunction {
    let mut deltas: BTreeMap<Tick, Rational> = BTreeMap::new();
    for (support, value) in raw {
        if value.is_zero() {
            continue;
        }
        for (s, e) in support.runs() {
            *deltas.entry(s).or_insert_with(Rational::zero) += &value;
            *deltas.entry(e).or_insert_with(Rational::zero) -= &value;
        }
    }
    let mut running = Rational::zero();
    let mut segs = Vec::new();
    let mut prev: Option<Tick> = None;
    for (t, d) in deltas {
        if let Some(p) = prev {
            if !running.is_zero() && p < t {
                segs.push(Segment { start: p, end: t, value: running.clone() });
            }
        }
        running += d;
        prev = Some(t);
    }
    StepFunction::from_segments(segs)
}

pub fn linear_combine(c1: &Rational, s1: &StepFunction, c2: &Rational, s2: &StepFunction) -> StepFunction {
    let left = s1.pieces.iter().map(|p| (p.support.clone(), c1 * &p.value));
    let right = s2.pieces.iter().map(|p| (p.support.clone(), c2 * &p.value));
    normalize(left.chain(right))
}

pub fn abs(s: &StepFunction) -> StepFunction {
    s.abs()
}

/// `∫_e s dλ₀`, exactly.
pub fn integral_lebesgue(s: &StepFunction, e: &RingSet) -> Rational {
    let mut total = Rational::zero();
    for p in &s.pieces {
        let ticks = if e.is_whole() { p.support.measure_ticks() } else { p.support.intersection(e).measure_ticks() };
        if ticks != 0 {
            total += &p.value * Rational::from_integer(BigInt::from(ticks));
        }
    }
    total / Rational::from_integer(BigInt::from(UNIT_TICKS))
}

/// `‖s1 - s2‖` in `L¹(λ₀)`, exactly.
pub fn l1_distance_lebesgue(s1: &StepFunction, s2: &StepFunction) -> Rational {
    integral_lebesgue(&s1.sub(s2).abs(), &RingSet::whole())
}

// Cantor pairing on naturals.

pub fn pair(a: &BigUint, b: &BigUint) -> BigUint {
    let w = a + b;
    (&w * (&w + 1u8)) / 2u8 + b
}

pub fn unpair(z: &BigUint) -> (BigUint, BigUint) {
    let w = ((z * 8u8 + 1u8).sqrt() - 1u8) / 2u8;
    let t = (&w * (&w + 1u8)) / 2u8;
    let b = z - t;
    let a = w - &b;
    (a, b)
}

fn zigzag(n: &BigInt) -> BigUint {
    match n.sign() {
        Sign::Minus => n.magnitude() * 2u8 - 1u8,
        _ => n.magnitude() * 2u8,
    }
}

fn unzigzag(z: &BigUint) -> BigInt {
    if z.bit(0) {
        -BigInt::from((z + 1u8) / 2u8)
    } else {
        BigInt::from(z / 2u8)
    }
}

fn value_code(v: &Rational) -> BigUint {
    pair(&zigzag(v.numer()), &(v.denom().magnitude() - 1u8))
}

/// The numbering `α̂` of rational step functions.
///
/// `0` is the zero function; otherwise `1 + ⟨count-1, ⟨p_1, ⟨p_2, ...⟩⟩⟩`
/// where each piece code is `⟨α⁻¹(support), ⟨zigzag(numer), denom-1⟩⟩`.
pub fn rsf_code(s: &StepFunction) -> Result<BigUint> {
    if s.is_zero() {
        return Ok(BigUint::zero());
    }
    let codes: Vec<BigUint> = s
        .pieces
        .iter()
        .map(|p| Ok(pair(&dyadic::alpha_inverse(&p.support)?, &value_code(&p.value))))
        .collect::<Result<_>>()?;
    let mut nested = codes.last().cloned().expect("non-empty");
    for c in codes.iter().rev().skip(1) {
        nested = pair(c, &nested);
    }
    Ok(pair(&BigUint::from(codes.len() - 1), &nested) + 1u8)
}

pub fn rsf_decode(code: &BigUint) -> Result<StepFunction> {
    if code.is_zero() {
        return Ok(StepFunction::zero());
    }
    let (count_minus_one, mut rest) = unpair(&(code - 1u8));
    let count = count_minus_one
        .to_usize()
        .and_then(|c| c.checked_add(1))
        .ok_or_else(|| Error::MalformedCode("piece count overflows".into()))?;
    let mut pieces = Vec::new();
    for i in 0..count {
        let piece_code = if i + 1 == count {
            std::mem::take(&mut rest)
        } else {
            let (head, tail) = unpair(&rest);
            rest = tail;
            head
        };
        let (support_code, vcode) = unpair(&piece_code);
        let support = dyadic::alpha(&support_code)?;
        let (znum, den_minus_one) = unpair(&vcode);
        let numer = unzigzag(&znum);
        let denom = BigInt::from(den_minus_one + 1u8);
        if support.is_empty()
            || numer.is_zero()
            || !rational::is_lowest_terms(&numer, &denom)
            || dyadic::alpha_inverse(&support)? != support_code
        {
            return Err(Error::MalformedCode(format!("piece {i} is not canonical")));
        }
        if let Some(prev) = pieces.last() {
            let prev: &StepPiece = prev;
            if prev.support.least_left_tick() >= support.least_left_tick() {
                return Err(Error::MalformedCode(format!("piece {i} is out of order")));
            }
        }
        pieces.push(StepPiece { support, value: Rational::new(numer, denom) });
    }
    let candidate = StepFunction { pieces };
    let canonical = normalize(candidate.pieces.iter().map(|p| (p.support.clone(), p.value.clone())));
    if canonical != candidate {
        return Err(Error::MalformedCode("pieces overlap or repeat a value".into()));
    }
    Ok(candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{interval, DyadicInterval};
    use crate::rational::{half, int, ratio};

    fn iv(level: u32, index: u64) -> RingSet {
        RingSet::from_interval(interval(level, index).unwrap())
    }

    #[test]
    fn overlapping_terms_sum() {
        let s = normalize([(RingSet::whole(), half()), (iv(1, 0), half())]);
        assert_eq!(s.pieces().len(), 2);
        assert_eq!(s.evaluate(&ratio(1, 4)).unwrap(), int(1));
        assert_eq!(s.evaluate(&ratio(3, 4)).unwrap(), half());
        assert_eq!(s.pieces()[0], StepPiece { support: iv(1, 0), value: int(1) });
    }

    #[test]
    fn empty_input_is_zero() {
        assert!(normalize(std::iter::empty()).is_zero());
    }

    #[test]
    fn equal_values_merge() {
        let s = normalize([(iv(1, 0), int(1)), (iv(1, 1), int(1))]);
        assert_eq!(s, StepFunction::constant(int(1)));
        assert_eq!(s.pieces().len(), 1);
    }

    #[test]
    fn abs_of_double_jump_is_half() {
        let r = normalize([(iv(1, 0), half()), (iv(1, 1), -half())]);
        // Pointwise oracle on the level-1 atoms.
        for k in 0..2u64 {
            let x = Rational::new(k.into(), 2.into());
            assert_eq!(r.abs().evaluate(&x).unwrap(), half());
        }
        assert_eq!(r.abs(), StepFunction::constant(half()));
    }

    #[test]
    fn self_difference_vanishes() {
        let s = normalize([(iv(2, 1), ratio(7, 3)), (iv(3, 7), int(-2))]);
        assert!(linear_combine(&int(1), &s, &int(-1), &s).is_zero());
    }

    #[test]
    fn integrals() {
        assert_eq!(integral_lebesgue(&StepFunction::indicator(&iv(1, 0)), &RingSet::whole()), half());
        let s = normalize([(iv(2, 0), int(4)), (iv(1, 1), int(-1))]);
        assert_eq!(integral_lebesgue(&s, &iv(1, 0)), int(1));
        assert_eq!(integral_lebesgue(&s, &RingSet::whole()), half());
    }

    #[test]
    fn distances() {
        let s = normalize([(iv(2, 0), int(4))]);
        assert!(l1_distance_lebesgue(&s, &s).is_zero());
        let a = StepFunction::indicator(&iv(1, 0));
        let b = StepFunction::indicator(&iv(1, 1));
        assert_eq!(l1_distance_lebesgue(&a, &b), int(1));
    }

    #[test]
    fn rsf_code_examples() {
        assert_eq!(rsf_code(&StepFunction::zero()).unwrap(), BigUint::zero());
        let chi = StepFunction::indicator(&iv(1, 0));
        let code = rsf_code(&chi).unwrap();
        assert_eq!(rsf_decode(&code).unwrap(), chi);
    }

    #[test]
    fn rsf_decode_rejects_non_canonical() {
        let mut rejected = 0;
        for c in 1..5000u32 {
            match rsf_decode(&BigUint::from(c)) {
                Ok(s) => assert_eq!(rsf_code(&s).unwrap(), BigUint::from(c)),
                Err(_) => rejected += 1,
            }
        }
        assert!(rejected > 0);
    }

    #[test]
    fn pairing_inverts() {
        for a in 0..40u32 {
            for b in 0..40u32 {
                let (x, y) = unpair(&pair(&a.into(), &b.into()));
                assert_eq!((x, y), (a.into(), b.into()));
            }
        }
    }

    #[test]
    fn evaluation_rejects_points_outside() {
        let s = StepFunction::constant(int(1));
        assert!(s.evaluate(&int(1)).is_err());
        assert!(s.evaluate(&ratio(-1, 3)).is_err());
        assert_eq!(s.evaluate(&ratio(1, 3)).unwrap(), int(1));
    }

    #[test]
    fn evaluation_at_non_dyadic_points() {
        let s = StepFunction::indicator(&RingSet::from_interval(DyadicInterval::new(2, 1).unwrap()));
        assert_eq!(s.evaluate(&ratio(1, 3)).unwrap(), int(1));
        assert_eq!(s.evaluate(&ratio(1, 5)).unwrap(), int(0));
    }

    #[test]
    fn json_round_trip() {
        let s = normalize([(iv(2, 1), ratio(-3, 4)), (iv(1, 1), int(2))]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"pieces":[{"support":{"pieces":[{"level":2,"index":1}]},"value":"-3/4"},{"support":{"pieces":[{"level":1,"index":1}]},"value":"2/1"}]}"#
        );
        assert_eq!(serde_json::from_str::<StepFunction>(&json).unwrap(), s);
    }

    #[test]
    fn grid_samples() {
        let s = normalize([(iv(1, 1), int(3))]);
        let grid = s.sample_grid(2).unwrap();
        let values: Vec<Rational> = grid.into_iter().map(|(_, v)| v).collect();
        assert_eq!(values, vec![int(0), int(0), int(3), int(3)]);
    }
}
