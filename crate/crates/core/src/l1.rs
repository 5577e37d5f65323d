//! Cauchy names of `L¹(μ)` elements.
//!
//! A name is a sequence of step functions `s_i` with `‖s_i - f‖_μ ≤ 2^-i`.
//! It always travels with the measure it is relative to, so the same
//! stream cannot silently be read against a different `μ`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{self, Measure, MeasureBounds, MeasureOracle, MeasureSpec};
use crate::rational::{self, Rational};
use crate::stepfn::StepFunction;
use crate::dyadic::RingSet;

pub type Approximants = Arc<dyn Fn(usize) -> Result<StepFunction> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Constant(StepFunction),
    /// A finite prefix; reading past its end fails.
    Prefix(Arc<Vec<StepFunction>>),
    Lazy(Approximants),
}

#[derive(Clone)]
pub struct L1Name {
    context: Measure,
    source: Source,
    cache: Arc<Mutex<BTreeMap<usize, StepFunction>>>,
}

impl fmt::Debug for L1Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Constant(_) => "constant",
            Source::Prefix(_) => "prefix",
            Source::Lazy(_) => "lazy",
        };
        f.debug_struct("L1Name").field("source", &kind).field("context", &self.context.spec()).finish()
    }
}

impl L1Name {
    fn with_source(context: Measure, source: Source) -> Self {
        L1Name { context, source, cache: Arc::new(Mutex::new(BTreeMap::new())) }
    }

    pub fn from_prefix(context: Measure, approximants: Vec<StepFunction>) -> Self {
        L1Name::with_source(context, Source::Prefix(Arc::new(approximants)))
    }

    /// A name whose `i`-th approximant is computed on demand and memoized.
    pub fn from_fn(context: Measure, f: impl Fn(usize) -> Result<StepFunction> + Send + Sync + 'static) -> Self {
        L1Name::with_source(context, Source::Lazy(Arc::new(f)))
    }

    pub fn context(&self) -> &Measure {
        &self.context
    }

    pub fn approximant(&self, i: usize) -> Result<StepFunction> {
        match &self.source {
            Source::Constant(s) => Ok(s.clone()),
            Source::Prefix(v) => v.get(i).cloned().ok_or(Error::NameExhausted(i)),
            Source::Lazy(f) => {
                if let Some(s) = self.cache.lock().expect("name cache poisoned").get(&i) {
                    return Ok(s.clone());
                }
                let s = f(i)?;
                self.cache.lock().expect("name cache poisoned").insert(i, s.clone());
                Ok(s)
            }
        }
    }

    pub fn prefix(&self, len: usize) -> Result<Vec<StepFunction>> {
        (0..len).map(|i| self.approximant(i)).collect()
    }

    /// Materializes the first `len` approximants with the context's spec.
    pub fn to_prefix_json(&self, len: usize) -> Result<L1NamePrefix> {
        let context = self.context.spec().ok_or_else(|| Error::Domain("measure has no serializable spec".into()))?;
        Ok(L1NamePrefix { context, approximants: self.prefix(len)? })
    }

    fn check_context(&self, mu: &dyn MeasureOracle) -> Result<()> {
        if measures::same_context(self.context.as_ref(), mu) {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }
}

/// JSON form of a finite prefix of a name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct L1NamePrefix {
    pub context: MeasureSpec,
    pub approximants: Vec<StepFunction>,
}

impl L1NamePrefix {
    pub fn into_name(self) -> Result<L1Name> {
        let context: Measure = self.context.build()?;
        Ok(L1Name::from_prefix(context, self.approximants))
    }
}

/// The constant name of a step function.
pub fn embed_rsf(mu: Measure, s: StepFunction) -> L1Name {
    L1Name::with_source(mu, Source::Constant(s))
}

/// Bounds on `∫ s dμ` of width at most `precision`.
pub fn integrate_rsf(mu: &dyn MeasureOracle, s: &StepFunction, precision: &Rational) -> Result<MeasureBounds> {
    measures::check_precision(precision)?;
    let total: Rational = s.pieces().iter().map(|p| p.value.abs()).sum::<Rational>() + rational::int(1);
    let per_piece = precision / total;
    let mut acc = MeasureBounds::new(Rational::zero(), Rational::zero());
    for p in s.pieces() {
        acc = acc.add(&mu.query(&p.support, &per_piece)?.scale(&p.value));
    }
    Ok(acc)
}

/// Bounds on `∫_E s dμ`.
pub fn integrate_rsf_over(mu: &dyn MeasureOracle, s: &StepFunction, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
    let restricted = crate::stepfn::normalize(s.pieces().iter().map(|p| (p.support.intersection(e), p.value.clone())));
    integrate_rsf(mu, &restricted, precision)
}

/// Least `i` with `2^-i ≤ precision/4`.
fn index_for(precision: &Rational) -> usize {
    let quarter = precision / rational::int(4);
    let mut i = 0;
    while rational::pow2(-(i as i64)) > quarter {
        i += 1;
    }
    i
}

pub fn integrate(mu: &dyn MeasureOracle, f: &L1Name, precision: &Rational) -> Result<MeasureBounds> {
    measures::check_precision(precision)?;
    f.check_context(mu)?;
    let i = index_for(precision);
    let s = f.approximant(i)?;
    let half = precision / rational::int(2);
    Ok(integrate_rsf(mu, &s, &half)?.widen(&rational::pow2(-(i as i64))))
}

pub fn norm(mu: &dyn MeasureOracle, f: &L1Name, precision: &Rational) -> Result<MeasureBounds> {
    measures::check_precision(precision)?;
    f.check_context(mu)?;
    let i = index_for(precision);
    let s = f.approximant(i)?.abs();
    let half = precision / rational::int(2);
    let b = integrate_rsf(mu, &s, &half)?.widen(&rational::pow2(-(i as i64)));
    let low = if b.low.is_negative() { Rational::zero() } else { b.low };
    Ok(MeasureBounds::new(low, b.high))
}

/// Bounds on `‖s - t‖_μ`.
pub fn distance_rsf(mu: &dyn MeasureOracle, s: &StepFunction, t: &StepFunction, precision: &Rational) -> Result<MeasureBounds> {
    integrate_rsf(mu, &s.sub(t).abs(), precision)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CauchyViolation {
    pub i: usize,
    pub j: usize,
    #[serde(with = "rational::serde_pq")]
    pub lower_bound: Rational,
    #[serde(with = "rational::serde_pq")]
    pub allowed: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub depth: usize,
    pub checked_pairs: usize,
    pub violations: Vec<CauchyViolation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `‖s_i - s_j‖_μ ≤ 2^-i + 2^-j` for all `i < j ≤ depth`.
///
/// A pair fails only when a certified lower bound exceeds the allowance, so
/// a failure is a genuine witness against the name.
pub fn validate_name(f: &L1Name, depth: usize) -> Result<ValidationReport> {
    let mu = f.context().as_ref();
    let slack = rational::pow2(-(depth as i64) - 4);
    let approximants = f.prefix(depth + 1)?;
    let mut report = ValidationReport { depth, checked_pairs: 0, violations: Vec::new() };
    for i in 0..=depth {
        for j in i + 1..=depth {
            let allowed = rational::pow2(-(i as i64)) + rational::pow2(-(j as i64));
            let b = distance_rsf(mu, &approximants[i], &approximants[j], &slack)?;
            report.checked_pairs += 1;
            if b.low > allowed {
                report.violations.push(CauchyViolation { i, j, lower_bound: b.low, allowed });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::interval;
    use crate::measures::{lebesgue_oracle, linear_density_measure};
    use crate::rational::{half, int, ratio};
    use crate::stepfn::normalize;

    fn iv(level: u32, index: u64) -> RingSet {
        RingSet::from_interval(interval(level, index).unwrap())
    }

    #[test]
    fn embedded_names() {
        let chi = StepFunction::indicator(&iv(1, 0));
        let name = embed_rsf(lebesgue_oracle(), chi.clone());
        for i in 0..5 {
            assert_eq!(name.approximant(i).unwrap(), chi);
        }
        assert!(validate_name(&name, 6).unwrap().passed());
        let zero = embed_rsf(lebesgue_oracle(), StepFunction::zero());
        assert!(integrate(&measures::Lebesgue, &zero, &ratio(1, 8)).unwrap().contains(&int(0)));
    }

    #[test]
    fn integrate_rsf_examples() {
        let chi = StepFunction::indicator(&iv(1, 0));
        let b = integrate_rsf(&measures::Lebesgue, &chi, &ratio(1, 16)).unwrap();
        assert!(b.contains(&half()) && b.width() <= ratio(1, 16));
        let lin = linear_density_measure(int(0), int(1)).unwrap();
        let b = integrate_rsf(lin.as_ref(), &StepFunction::constant(int(1)), &ratio(1, 100)).unwrap();
        assert!(b.contains(&half()));
    }

    #[test]
    fn integrate_and_norm() {
        let mu = lebesgue_oracle();
        let chi = embed_rsf(mu.clone(), StepFunction::indicator(&iv(1, 0)));
        let b = integrate(mu.as_ref(), &chi, &ratio(1, 8)).unwrap();
        assert!(b.contains(&half()) && b.width() <= ratio(1, 8));
        let r = normalize([(iv(1, 0), half()), (iv(1, 1), -half())]);
        let b = norm(mu.as_ref(), &embed_rsf(mu.clone(), r), &ratio(1, 8)).unwrap();
        assert!(b.contains(&half()) && b.width() <= ratio(1, 8));
    }

    #[test]
    fn context_mismatch() {
        let chi = embed_rsf(lebesgue_oracle(), StepFunction::constant(int(1)));
        let lin = linear_density_measure(int(0), int(1)).unwrap();
        assert_eq!(integrate(lin.as_ref(), &chi, &ratio(1, 4)), Err(Error::ContextMismatch));
    }

    #[test]
    fn alternating_stream_fails() {
        let one = StepFunction::constant(int(1));
        let name = L1Name::from_fn(lebesgue_oracle(), move |i| {
            Ok(if i % 2 == 0 { StepFunction::zero() } else { one.clone() })
        });
        let report = validate_name(&name, 2).unwrap();
        assert!(!report.passed());
        assert_eq!((report.violations[0].i, report.violations[0].j), (1, 2));
    }

    #[test]
    fn prefix_json_round_trip() {
        let name = embed_rsf(lebesgue_oracle(), StepFunction::indicator(&iv(2, 3)));
        let json = serde_json::to_string(&name.to_prefix_json(2).unwrap()).unwrap();
        let back: L1NamePrefix = serde_json::from_str(&json).unwrap();
        let name2 = back.into_name().unwrap();
        assert_eq!(name2.approximant(1).unwrap(), StepFunction::indicator(&iv(2, 3)));
        assert_eq!(name2.approximant(2), Err(Error::NameExhausted(2)));
    }
}
