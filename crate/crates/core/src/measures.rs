//! Measures on the dyadic ring, realized as query oracles.
//!
//! A name of a measure lists every `(u, n, v)` with `u < μ(α(n)) < v`. Each
//! use of such a name only ever needs finitely many of those triples, so the
//! primary realization here is an oracle answering `(E, precision)` queries
//! with closed bounds. [`oracle_to_stream`] and [`StreamOracle`] convert
//! between the two views.

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, RingSet};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::stepfn::{self, StepFunction};

/// Closed bounds `[low, high]` on a measure value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasureBounds {
    #[serde(with = "rational::serde_pq")]
    pub low: Rational,
    #[serde(with = "rational::serde_pq")]
    pub high: Rational,
}

impl MeasureBounds {
    pub fn new(low: Rational, high: Rational) -> Self {
        debug_assert!(low <= high);
        MeasureBounds { low, high }
    }

    /// `[v - p/2, v + p/2]`, so that the strict name triple `(low, n, high)`
    /// still holds.
    pub fn around(value: &Rational, precision: &Rational) -> Self {
        let r = precision / rational::int(2);
        MeasureBounds { low: value - &r, high: value + r }
    }

    pub fn width(&self) -> Rational {
        &self.high - &self.low
    }

    pub fn midpoint(&self) -> Rational {
        rational::midpoint(&self.low, &self.high)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.low <= *x && *x <= self.high
    }

    /// Strict containment, as required of a name triple.
    pub fn strictly_contains(&self, x: &Rational) -> bool {
        self.low < *x && *x < self.high
    }

    pub fn widen(&self, by: &Rational) -> Self {
        MeasureBounds { low: &self.low - by, high: &self.high + by }
    }

    pub fn add(&self, other: &MeasureBounds) -> Self {
        MeasureBounds { low: &self.low + &other.low, high: &self.high + &other.high }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let (a, b) = (&self.low * c, &self.high * c);
        if c.is_negative() {
            MeasureBounds { low: b, high: a }
        } else {
            MeasureBounds { low: a, high: b }
        }
    }

    /// Bounds on `|x|` for `x` in `self`.
    pub fn abs(&self) -> Self {
        if !self.low.is_negative() {
            self.clone()
        } else if !self.high.is_positive() {
            MeasureBounds { low: -&self.high, high: -&self.low }
        } else {
            MeasureBounds { low: Rational::zero(), high: self.high.clone().max(-&self.low) }
        }
    }
}

impl fmt::Display for MeasureBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", rational::format(&self.low), rational::format(&self.high))
    }
}

/// Query access to a measure on the ring.
///
/// Answers must contain the true value, have width at most `precision`, and
/// be a deterministic function of the query.
pub trait MeasureOracle: Send + Sync {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds>;

    /// A serializable description, when the measure has one.
    fn spec(&self) -> Option<MeasureSpec> {
        None
    }
}

pub trait FiniteMeasureOracle: MeasureOracle {
    fn total_mass(&self, precision: &Rational) -> Result<MeasureBounds>;
}

pub type Measure = Arc<dyn MeasureOracle>;
pub type FiniteMeasure = Arc<dyn FiniteMeasureOracle>;

pub(crate) fn check_precision(precision: &Rational) -> Result<()> {
    if precision.is_positive() {
        Ok(())
    } else {
        Err(Error::Domain(format!("precision {} is not positive", rational::format(precision))))
    }
}

/// True when two oracles stand for the same measure: the same object, or
/// equal specs.
pub fn same_context(a: &dyn MeasureOracle, b: &dyn MeasureOracle) -> bool {
    if std::ptr::addr_eq(a as *const dyn MeasureOracle, b as *const dyn MeasureOracle) {
        return true;
    }
    matches!((a.spec(), b.spec()), (Some(x), Some(y)) if x == y)
}

/// Restriction of Lebesgue measure to `[0,1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Lebesgue;

impl MeasureOracle for Lebesgue {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        Ok(MeasureBounds::around(&e.lebesgue(), precision))
    }

    fn spec(&self) -> Option<MeasureSpec> {
        Some(MeasureSpec::Lebesgue)
    }
}

impl FiniteMeasureOracle for Lebesgue {
    fn total_mass(&self, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        Ok(MeasureBounds::around(&Rational::one(), precision))
    }
}

pub fn lebesgue_oracle() -> FiniteMeasure {
    Arc::new(Lebesgue)
}

/// `μ(E) = ∫_E h dλ₀` for a non-negative step function `h`.
#[derive(Clone, Debug)]
pub struct StepDensity {
    h: StepFunction,
}

impl StepDensity {
    pub fn new(h: StepFunction) -> Result<Self> {
        if let Some(p) = h.pieces().iter().find(|p| p.value.is_negative()) {
            return Err(Error::NegativeDensity(rational::format(&p.value)));
        }
        Ok(StepDensity { h })
    }

    pub fn density(&self) -> &StepFunction {
        &self.h
    }

    pub fn exact(&self, e: &RingSet) -> Rational {
        stepfn::integral_lebesgue(&self.h, e)
    }
}

impl MeasureOracle for StepDensity {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        Ok(MeasureBounds::around(&self.exact(e), precision))
    }

    fn spec(&self) -> Option<MeasureSpec> {
        Some(MeasureSpec::DensityStep { h: self.h.clone() })
    }
}

impl FiniteMeasureOracle for StepDensity {
    fn total_mass(&self, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        Ok(MeasureBounds::around(&self.exact(&RingSet::whole()), precision))
    }
}

pub fn density_measure(h: StepFunction) -> Result<FiniteMeasure> {
    Ok(Arc::new(StepDensity::new(h)?))
}

/// Density `h(x) = c0 + c1·x`.
#[derive(Clone, Debug)]
pub struct LinearDensity {
    c0: Rational,
    c1: Rational,
}

impl LinearDensity {
    pub fn new(c0: Rational, c1: Rational) -> Result<Self> {
        for end in [&c0, &(&c0 + &c1)] {
            if end.is_negative() {
                return Err(Error::NegativeDensity(rational::format(end)));
            }
        }
        Ok(LinearDensity { c0, c1 })
    }

    pub fn coefficients(&self) -> (&Rational, &Rational) {
        (&self.c0, &self.c1)
    }

    pub fn exact(&self, e: &RingSet) -> Rational {
        e.pieces()
            .iter()
            .map(|j| {
                // ∫ over [k/2^n, (k+1)/2^n) of c0 + c1·x.
                let len = j.length();
                let mid = (j.left() + j.right()) / rational::int(2);
                &len * (&self.c0 + &self.c1 * mid)
            })
            .sum()
    }
}

impl MeasureOracle for LinearDensity {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        Ok(MeasureBounds::around(&self.exact(e), precision))
    }

    fn spec(&self) -> Option<MeasureSpec> {
        Some(MeasureSpec::DensityLinear { c0: self.c0.clone(), c1: self.c1.clone() })
    }
}

impl FiniteMeasureOracle for LinearDensity {
    fn total_mass(&self, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        Ok(MeasureBounds::around(&self.exact(&RingSet::whole()), precision))
    }
}

pub fn linear_density_measure(c0: Rational, c1: Rational) -> Result<FiniteMeasure> {
    Ok(Arc::new(LinearDensity::new(c0, c1)?))
}

/// JSON description of a measure, as accepted by the CLI.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MeasureSpec {
    Lebesgue,
    DensityStep {
        h: StepFunction,
    },
    DensityLinear {
        #[serde(with = "rational::serde_pq")]
        c0: Rational,
        #[serde(with = "rational::serde_pq")]
        c1: Rational,
    },
    EncodedSet {
        set: Vec<u64>,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<FiniteMeasure> {
        match self {
            MeasureSpec::Lebesgue => Ok(lebesgue_oracle()),
            MeasureSpec::DensityStep { h } => density_measure(h.clone()),
            MeasureSpec::DensityLinear { c0, c1 } => linear_density_measure(c0.clone(), c1.clone()),
            MeasureSpec::EncodedSet { set } => {
                Ok(Arc::new(crate::lowerbound::EncodedMeasure::from_set(set.iter().copied())?))
            }
        }
    }

    /// Accepts either JSON or the bare word `lebesgue`.
    pub fn parse(s: &str) -> Result<MeasureSpec> {
        let s = s.trim();
        if s == "lebesgue" {
            return Ok(MeasureSpec::Lebesgue);
        }
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("measure spec: {e}")))
    }
}

/// One entry `(u, n, v)` of a measure name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NameTriple {
    pub low: Rational,
    pub code: BigUint,
    pub high: Rational,
}

impl NameTriple {
    pub fn parse(line: &str) -> Result<NameTriple> {
        let mut fields = line.split_whitespace();
        let (Some(u), Some(n), Some(v), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse(format!("expected `u n v`, got {line:?}")));
        };
        let code: BigUint = n.parse().map_err(|_| Error::Parse(format!("bad code {n:?}")))?;
        let (low, high) = (rational::parse(u)?, rational::parse(v)?);
        if low >= high {
            return Err(Error::Parse(format!("empty interval in {line:?}")));
        }
        Ok(NameTriple { low, code, high })
    }
}

impl fmt::Display for NameTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", rational::format(&self.low), self.code, rational::format(&self.high))
    }
}

/// One entry `(u, v)` of the total-mass half of a finite-measure name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MassPair {
    pub low: Rational,
    pub high: Rational,
}

impl MassPair {
    pub fn parse(line: &str) -> Result<MassPair> {
        let mut fields = line.split_whitespace();
        let (Some(u), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse(format!("expected `u v`, got {line:?}")));
        };
        let (low, high) = (rational::parse(u)?, rational::parse(v)?);
        if low >= high {
            return Err(Error::Parse(format!("empty interval in {line:?}")));
        }
        Ok(MassPair { low, high })
    }
}

impl fmt::Display for MassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", rational::format(&self.low), rational::format(&self.high))
    }
}

/// Query at `p/2` and widen by `p/4`: width at most `p`, and the true value
/// lies strictly inside.
fn strict_bounds(m: &dyn MeasureOracle, e: &RingSet, p: &Rational) -> Result<MeasureBounds> {
    let b = m.query(e, &(p / rational::int(2)))?;
    Ok(b.widen(&(p / rational::int(4))))
}

/// Lazily emits the triples of a name of `m`.
///
/// Stage `s` covers codes `0..=s`, code `c` at precision `2^-(s-c)`, so every
/// code is eventually listed with arbitrarily narrow bounds.
pub struct TripleStream {
    measure: Measure,
    stage: u64,
    code: u64,
}

pub fn oracle_to_stream(measure: Measure) -> TripleStream {
    TripleStream { measure, stage: 0, code: 0 }
}

impl Iterator for TripleStream {
    type Item = Result<NameTriple>;

    fn next(&mut self) -> Option<Self::Item> {
        let (stage, code) = (self.stage, self.code);
        if self.code == self.stage {
            self.stage += 1;
            self.code = 0;
        } else {
            self.code += 1;
        }
        let p = rational::pow2(-((stage - code) as i64));
        let item = dyadic::alpha_u64(code)
            .and_then(|e| strict_bounds(self.measure.as_ref(), &e, &p))
            .map(|b| NameTriple { low: b.low, code: BigUint::from(code), high: b.high });
        Some(item)
    }
}

/// Total-mass pairs at precisions `1, 1/2, 1/4, …`.
pub struct MassStream {
    measure: FiniteMeasure,
    stage: u64,
}

pub fn mass_stream(measure: FiniteMeasure) -> MassStream {
    MassStream { measure, stage: 0 }
}

impl Iterator for MassStream {
    type Item = Result<MassPair>;

    fn next(&mut self) -> Option<Self::Item> {
        let p = rational::pow2(-(self.stage as i64));
        self.stage += 1;
        let item = self
            .measure
            .total_mass(&(&p / rational::int(2)))
            .map(|b| b.widen(&(&p / rational::int(4))))
            .map(|b| MassPair { low: b.low, high: b.high });
        Some(item)
    }
}

/// Renders the first `count` triples, one per line.
pub fn render_triples(measure: Measure, count: usize) -> Result<String> {
    let mut out = String::new();
    for t in oracle_to_stream(measure).take(count) {
        out.push_str(&t?.to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn render_mass_pairs(measure: FiniteMeasure, count: usize) -> Result<String> {
    let mut out = String::new();
    for t in mass_stream(measure).take(count) {
        out.push_str(&t?.to_string());
        out.push('\n');
    }
    Ok(out)
}

/// Parses a name-stream text, skipping blank lines.
pub fn parse_triples(text: &str) -> Result<Vec<NameTriple>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(NameTriple::parse).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryOutcome {
    Bounds(MeasureBounds),
    /// The budget ran out before a narrow enough triple appeared.
    Unknown,
}

type TripleSource = Box<dyn Iterator<Item = Result<NameTriple>> + Send>;

struct StreamState {
    source: TripleSource,
    consumed: usize,
    seen: VecDeque<(RingSet, MeasureBounds)>,
}

/// A partial oracle reading a literal name, never more than `budget` triples.
pub struct StreamOracle {
    budget: usize,
    state: Mutex<StreamState>,
}

pub fn stream_to_oracle(source: impl Iterator<Item = Result<NameTriple>> + Send + 'static, budget: usize) -> StreamOracle {
    StreamOracle {
        budget,
        state: Mutex::new(StreamState { source: Box::new(source), consumed: 0, seen: VecDeque::new() }),
    }
}

impl StreamOracle {
    pub fn try_query(&self, e: &RingSet, precision: &Rational) -> Result<QueryOutcome> {
        check_precision(precision)?;
        let mut state = self.state.lock().expect("stream oracle poisoned");
        let hit = |entry: &(RingSet, MeasureBounds)| entry.0 == *e && entry.1.width() <= *precision;
        if let Some((_, b)) = state.seen.iter().find(|entry| hit(entry)) {
            return Ok(QueryOutcome::Bounds(b.clone()));
        }
        while state.consumed < self.budget {
            let Some(next) = state.source.next() else { break };
            state.consumed += 1;
            let t = next?;
            let entry = (dyadic::alpha(&t.code)?, MeasureBounds::new(t.low, t.high));
            let found = hit(&entry);
            state.seen.push_back(entry);
            if found {
                return Ok(QueryOutcome::Bounds(state.seen.back().expect("just pushed").1.clone()));
            }
        }
        Ok(QueryOutcome::Unknown)
    }

    pub fn consumed(&self) -> usize {
        self.state.lock().expect("stream oracle poisoned").consumed
    }
}

impl MeasureOracle for StreamOracle {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
        match self.try_query(e, precision)? {
            QueryOutcome::Bounds(b) => Ok(b),
            QueryOutcome::Unknown => Err(Error::NameExhausted(self.budget)),
        }
    }
}

/// `c·μ` for `c ≥ 0`.
pub struct Scaled<M: ?Sized> {
    factor: Rational,
    inner: Arc<M>,
}

impl<M: ?Sized> Scaled<M> {
    pub fn new(factor: Rational, inner: Arc<M>) -> Result<Self> {
        if factor.is_negative() {
            return Err(Error::Domain("negative scale factor".into()));
        }
        Ok(Scaled { factor, inner })
    }
}

impl<M: MeasureOracle + ?Sized> MeasureOracle for Scaled<M> {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        if self.factor.is_zero() {
            return Ok(MeasureBounds::around(&Rational::zero(), precision));
        }
        Ok(self.inner.query(e, &(precision / &self.factor))?.scale(&self.factor))
    }
}

impl<M: FiniteMeasureOracle + ?Sized> FiniteMeasureOracle for Scaled<M> {
    fn total_mass(&self, precision: &Rational) -> Result<MeasureBounds> {
        check_precision(precision)?;
        if self.factor.is_zero() {
            return Ok(MeasureBounds::around(&Rational::zero(), precision));
        }
        Ok(self.inner.total_mass(&(precision / &self.factor))?.scale(&self.factor))
    }
}

/// Exact value of `∫_[a,b) |v - (c0 + c1·x)| dx`.
pub(crate) fn abs_linear_gap(a: &Rational, b: &Rational, v: &Rational, c0: &Rational, c1: &Rational) -> Rational {
    // g(x) = v - c0 - c1·x is affine; integrate |g| splitting at its root.
    let g = |x: &Rational| v - c0 - c1 * x;
    let (ga, gb) = (g(a), g(b));
    let seg = |lo: &Rational, hi: &Rational, glo: &Rational, ghi: &Rational| (hi - lo) * (glo + ghi).abs() / rational::int(2);
    if ga.is_negative() == gb.is_negative() || ga.is_zero() || gb.is_zero() {
        seg(a, b, &ga, &gb)
    } else {
        let root = (v - c0) / c1;
        let zero = Rational::zero();
        seg(a, &root, &ga, &zero) + seg(&root, b, &zero, &gb)
    }
}

/// Exact `∫ |s - (c0 + c1·x)| dλ₀` over `[0,1)`.
pub fn l1_distance_to_linear(s: &StepFunction, c0: &Rational, c1: &Rational) -> Rational {
    let unit = Rational::from_integer(BigInt::from(dyadic::UNIT_TICKS));
    let mut total = Rational::zero();
    let mut cursor = 0;
    let zero = Rational::zero();
    let gap = |from: u128, to: u128, v: &Rational, total: &mut Rational| {
        if from < to {
            let a = Rational::from_integer(BigInt::from(from)) / &unit;
            let b = Rational::from_integer(BigInt::from(to)) / &unit;
            *total += abs_linear_gap(&a, &b, v, c0, c1);
        }
    };
    for seg in s.segments() {
        gap(cursor, seg.start, &zero, &mut total);
        gap(seg.start, seg.end, &seg.value, &mut total);
        cursor = seg.end;
    }
    gap(cursor, dyadic::UNIT_TICKS, &zero, &mut total);
    total
}
