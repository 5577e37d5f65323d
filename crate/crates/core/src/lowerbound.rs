//! Encoding an enumeration as a measure, and reading the enumerated set
//! back off any name of its density.
//!
//! Entry `n_k = n+1` of `p` plants `2^k` double jumps of width `2^-(n+1+k)`
//! on the band `[2^-n-1, 2^-n)`, on top of the constant `1/2`. Every jump
//! integrates to zero over coarser dyadic sets, so `μ_p(E)` only depends on
//! a finite prefix of `p`; but `|h_p - 1/2|` integrates to `2^-n-2` over the
//! band exactly when `n` is enumerated.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use crate::dyadic::{self, DyadicInterval, RingSet, Tick, UNIT_TICKS};
use crate::ec::{en_encode, single_use_guard, EnName, SingleUse};
use crate::error::{Error, Result};
use crate::l1::{self, embed_rsf, L1Name};
use crate::measures::{self, FiniteMeasure, FiniteMeasureOracle, MeasureBounds, MeasureOracle, MeasureSpec};
use crate::radon_nikodym::{KnownDensity, RnConfig, RnPipeline};
use crate::rational::{self, half, Rational};
use crate::stepfn::{self, Segment, StepFunction};

/// `r[a;b)`: `+1/2` on the left half of `i`, `-1/2` on the right half.
pub fn double_jump(i: DyadicInterval) -> Result<StepFunction> {
    let (left, right) = i.children()?;
    Ok(StepFunction::from_segments([
        Segment { start: left.start_tick(), end: left.end_tick(), value: half() },
        Segment { start: right.start_tick(), end: right.end_tick(), value: -half() },
    ]))
}

/// The band `[2^-n-1, 2^-n)` as a dyadic interval.
pub fn band(n: u64) -> Result<DyadicInterval> {
    let level = u32::try_from(n + 1).map_err(|_| Error::LevelOverflow(n + 1))?;
    dyadic::interval(level, 1)
}

/// `t_k`: zero for a dummy, else `2^k` double jumps tiling the band of
/// `n = n_k - 1`.
pub fn band_sum(k: u64, n_k: u64) -> Result<StepFunction> {
    if n_k == 0 {
        return Ok(StepFunction::zero());
    }
    let n = n_k - 1;
    let jump_level = n + 1 + k;
    if jump_level + 1 > u64::from(dyadic::MAX_LEVEL) {
        return Err(Error::LevelOverflow(jump_level + 1));
    }
    if k > 24 {
        return Err(Error::Domain(format!("band {k} has too many jumps to materialize")));
    }
    let b = band(n)?;
    let width: Tick = UNIT_TICKS >> jump_level;
    let mut segs = Vec::with_capacity(2 << k);
    for q in 0..(1u128 << k) {
        let start = b.start_tick() + q * width;
        let mid = start + width / 2;
        segs.push(Segment { start, end: mid, value: half() });
        segs.push(Segment { start: mid, end: start + width, value: -half() });
    }
    Ok(StepFunction::from_segments(segs))
}

/// `h_p` and its partial sums.
#[derive(Clone, Debug)]
pub struct EncodedDensity {
    source: EnName,
}

impl EncodedDensity {
    pub fn new(source: EnName) -> Self {
        EncodedDensity { source }
    }

    /// `1/2 + Σ_{k<m} t_k`.
    pub fn resolved_prefix(&self, m: usize) -> Result<StepFunction> {
        let mut acc = StepFunction::constant(half());
        for (k, n_k) in self.source.prefix(m)?.into_iter().enumerate() {
            if n_k != 0 {
                acc = acc.add(&band_sum(k as u64, n_k)?);
            }
        }
        Ok(acc)
    }
}

pub fn encoded_density(p: &EnName) -> EncodedDensity {
    EncodedDensity::new(p.clone())
}

/// `h_p` in full, for a finite set listed in ascending order.
pub fn density_of_set(set: &BTreeSet<u64>) -> Result<StepFunction> {
    encoded_density(&en_encode(set)).resolved_prefix(set.len())
}

/// `μ_p(E) = ∫_E h_p dλ₀`, evaluated from a finite prefix of `p`.
#[derive(Clone, Debug)]
pub struct EncodedMeasure {
    source: EnName,
    set: Option<Vec<u64>>,
}

impl EncodedMeasure {
    pub fn new(source: EnName) -> Self {
        EncodedMeasure { source, set: None }
    }

    pub fn from_set(set: impl IntoIterator<Item = u64>) -> Result<Self> {
        let set: BTreeSet<u64> = set.into_iter().collect();
        let mut m = EncodedMeasure::new(en_encode(&set));
        m.set = Some(set.into_iter().collect());
        Ok(m)
    }

    /// Exact `μ_p(E)`. Only entries `k < max level of E` are read.
    pub fn exact(&self, e: &RingSet) -> Result<Rational> {
        let m = e.max_level() as usize;
        let prefix = self.source.prefix(m)?;
        let mut total_ticks = BigInt::zero();
        let mut jump_ticks = BigInt::zero();
        for j in e.pieces() {
            total_ticks += BigInt::from(j.span());
            for (k, &n_k) in prefix.iter().enumerate() {
                if n_k != 0 {
                    jump_ticks += jump_integral_ticks(j, k as u64, n_k - 1);
                }
            }
        }
        // Contributions are multiples of 1/2 tick.
        let unit = Rational::from_integer(BigInt::from(UNIT_TICKS));
        Ok((Rational::from_integer(total_ticks) + Rational::from_integer(jump_ticks)) / (unit * rational::int(2)))
    }
}

/// `2·2^64·∫_J t_k dλ₀` for the band of `n`.
fn jump_integral_ticks(j: &DyadicInterval, k: u64, n: u64) -> BigInt {
    let jump_level = n + 1 + k;
    let level = u64::from(j.level());
    // Coarser pieces see whole jumps, which integrate to zero.
    if level <= jump_level {
        return BigInt::zero();
    }
    let Ok(b) = band(n) else { return BigInt::zero() };
    if !b.contains_tick(j.start_tick()) {
        return BigInt::zero();
    }
    // Inside a single half-jump; the half's parity gives the sign.
    let half_index = j.start_tick() >> (u64::from(dyadic::MAX_LEVEL) - (jump_level + 1));
    let ticks = BigInt::from(j.span());
    if half_index % 2 == 0 {
        ticks
    } else {
        -ticks
    }
}

impl MeasureOracle for EncodedMeasure {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
        measures::check_precision(precision)?;
        Ok(MeasureBounds::around(&self.exact(e)?, precision))
    }

    fn spec(&self) -> Option<MeasureSpec> {
        self.set.clone().map(|set| MeasureSpec::EncodedSet { set })
    }
}

impl FiniteMeasureOracle for EncodedMeasure {
    fn total_mass(&self, precision: &Rational) -> Result<MeasureBounds> {
        measures::check_precision(precision)?;
        Ok(MeasureBounds::around(&half(), precision))
    }
}

pub fn encoded_measure(p: &EnName) -> FiniteMeasure {
    Arc::new(EncodedMeasure::new(p.clone()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decoded {
    pub n: u64,
    pub bit: bool,
    /// Exact `∫_band |s_{n+4} - 1/2| dλ₀`.
    #[serde(with = "rational::serde_pq")]
    pub integral: Rational,
}

/// Reads bit `n` of the enumerated set from a `λ₀`-name of `h_p`.
///
/// The true band integral is `2^-n-2` or `0`; approximant `n+4` is within
/// `2^-n-4` in norm, so comparing against `2^-n-3` cannot go wrong.
pub fn decode(name: &L1Name, n: u64) -> Result<Decoded> {
    let s = name.approximant(n as usize + 4)?;
    let e = RingSet::from_interval(band(n)?);
    let gap = s.sub(&StepFunction::constant(half())).abs();
    let integral = stepfn::integral_lebesgue(&gap, &e);
    let bit = integral > rational::pow2(-(n as i64) - 3);
    Ok(Decoded { n, bit, integral })
}

/// Checkable symptoms that `mu` is outside the domain of RN₀.
pub fn check_rn0_input(mu: &dyn FiniteMeasureOracle, level: u32) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    let precision = rational::pow2(-20);
    let total = mu.total_mass(&precision)?;
    if !total.contains(&half()) {
        warnings.push(format!("total mass bounds {total} exclude 1/2"));
    }
    for l in 0..=level {
        for i in 0..(1u64 << l) {
            let e = RingSet::from_interval(dyadic::interval(l, i)?);
            let b = mu.query(&e, &precision)?;
            if b.low > e.lebesgue() {
                warnings.push(format!("μ(J({l},{i})) ≥ {} exceeds its length", rational::format(&b.low)));
            }
        }
    }
    Ok(warnings)
}

pub type Rn0Realizer = Box<dyn Fn(FiniteMeasure) -> Result<L1Name> + Send>;

/// Knows the set in advance and answers with the constant name of `h_p`.
pub fn cheat_realizer(set: BTreeSet<u64>) -> Result<Rn0Realizer> {
    let h = density_of_set(&set)?;
    Ok(Box::new(move |_mu| Ok(embed_rsf(measures::lebesgue_oracle(), h.clone()))))
}

/// Runs the full pipeline against `λ₀` with certified EC.
///
/// A true modulus cannot be computed from `μ` alone, so the caller supplies
/// the closed-form density it is certified against.
pub fn pipeline_realizer(config: RnConfig, h: KnownDensity) -> Rn0Realizer {
    Box::new(move |mu: FiniteMeasure| {
        let pipeline = RnPipeline::new(measures::lebesgue_oracle(), mu, config);
        let guard = single_use_guard(pipeline.certified_oracle(h.clone())?);
        let selection = pipeline.run(&guard)?;
        Ok(pipeline.name(&selection))
    })
}

/// The output side of the reduction. It holds only the realizer's name,
/// never `p` itself.
pub struct Rn0Reduction {
    name: L1Name,
    pub warnings: Vec<String>,
}

impl Rn0Reduction {
    pub fn decode(&self, n: u64) -> Result<Decoded> {
        decode(&self.name, n)
    }

    pub fn bit(&self, n: u64) -> Result<bool> {
        Ok(self.decode(n)?.bit)
    }

    pub fn name(&self) -> &L1Name {
        &self.name
    }
}

/// `EC ≤_sW RN₀`: encode `p` as `μ_p`, apply the realizer once, decode.
pub fn ec_via_rn0(p: &EnName, realizer: &SingleUse<Rn0Realizer>, validate_depth: usize) -> Result<Rn0Reduction> {
    let mu = encoded_measure(p);
    let mut warnings = check_rn0_input(mu.as_ref(), 3)?;
    let name = realizer.apply(|r| r(mu))??;
    if !measures::same_context(name.context().as_ref(), &measures::Lebesgue) {
        return Err(Error::ContextMismatch);
    }
    if validate_depth > 0 {
        let report = l1::validate_name(&name, validate_depth)?;
        for v in &report.violations {
            warnings.push(format!(
                "realizer output is not a Cauchy name: ‖s_{} - s_{}‖ ≥ {} > {}",
                v.i,
                v.j,
                rational::format(&v.lower_bound),
                rational::format(&v.allowed)
            ));
        }
    }
    Ok(Rn0Reduction { name, warnings })
}

pub fn rn0_guard(realizer: Rn0Realizer) -> SingleUse<Rn0Realizer> {
    SingleUse::new(realizer, "RN₀ realizer")
}

/// `Σ_{n∈A} 2^-n-2`, the distance from `h_p` to `1/2`.
pub fn expected_distance(set: &BTreeSet<u64>) -> Rational {
    set.iter().map(|&n| rational::pow2(-(n as i64) - 2)).sum()
}
