//! Exact knowledge of a density against `λ₀`, used to build the certified
//! and cheating EC oracles and to check the output of the pipeline.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::search::DensitySequence;
use crate::dyadic::RingSet;
use crate::ec::{self, Decider, EcOracle, EnName, Modulus};
use crate::error::{Error, Result};
use crate::lowerbound;
use crate::measures::{self, LinearDensity, MeasureSpec, StepDensity};
use crate::rational::{self, Rational};
use crate::stepfn::{self, StepFunction};

/// A density `h = dμ/dλ₀` known in closed form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KnownDensity {
    Step(StepFunction),
    /// `h(x) = c0 + c1·x`.
    Linear { c0: Rational, c1: Rational },
}

impl KnownDensity {
    /// The density of a CLI measure spec, taken against `λ₀`.
    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        Ok(match spec {
            MeasureSpec::Lebesgue => KnownDensity::Step(StepFunction::constant(rational::int(1))),
            MeasureSpec::DensityStep { h } => KnownDensity::Step(h.clone()),
            MeasureSpec::DensityLinear { c0, c1 } => KnownDensity::Linear { c0: c0.clone(), c1: c1.clone() },
            MeasureSpec::EncodedSet { set } => {
                let set: BTreeSet<u64> = set.iter().copied().collect();
                KnownDensity::Step(lowerbound::density_of_set(&set)?)
            }
        })
    }

    /// `‖s - h‖_{λ₀}`, exactly.
    pub fn distance(&self, s: &StepFunction) -> Rational {
        match self {
            KnownDensity::Step(h) => stepfn::l1_distance_lebesgue(s, h),
            KnownDensity::Linear { c0, c1 } => measures::l1_distance_to_linear(s, c0, c1),
        }
    }

    /// `μ(E) = ∫_E h dλ₀`, exactly.
    pub fn measure(&self, e: &RingSet) -> Result<Rational> {
        Ok(match self {
            KnownDensity::Step(h) => StepDensity::new(h.clone())?.exact(e),
            KnownDensity::Linear { c0, c1 } => LinearDensity::new(c0.clone(), c1.clone())?.exact(e),
        })
    }
}

/// Exact membership of `⟨n,k⟩` in `T`.
///
/// With exact oracles and `λ = λ₀` the levels form a martingale, so
/// `‖t_n - t_i‖` increases in `i` towards `‖t_n - h‖` and membership reduces
/// to `‖t_n - h‖ > 2^-k`.
pub fn in_tset(seq: &DensitySequence, h: &KnownDensity, x: u64) -> Result<bool> {
    let (n, k) = ec::unpair(x);
    let t_n = seq.t(n as usize)?;
    Ok(h.distance(&t_n) > rational::pow2(-(k as i64)))
}

/// A true modulus for the T-set name: members are located in the stream,
/// non-members need no reading at all.
pub fn certified_modulus(seq: Arc<DensitySequence>, h: KnownDensity, name: EnName, cap: usize) -> Modulus {
    Arc::new(move |x| {
        if !in_tset(&seq, &h, x)? {
            return Ok(0);
        }
        match name.position_of(x, cap)? {
            Some(p) => Ok(p + 1),
            None => Err(Error::Certificate(format!("member {x} of T not listed within {cap} entries"))),
        }
    })
}

pub fn certified_oracle(seq: Arc<DensitySequence>, h: KnownDensity, name: EnName, cap: usize) -> EcOracle {
    EcOracle::Certified { modulus: certified_modulus(seq, h, name, cap) }
}

pub fn cheat_decider(seq: Arc<DensitySequence>, h: KnownDensity) -> Decider {
    Arc::new(move |x| in_tset(&seq, &h, x))
}

pub fn cheat_oracle(seq: Arc<DensitySequence>, h: KnownDensity) -> EcOracle {
    EcOracle::Cheat { answer: cheat_decider(seq, h) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{half, int, ratio};

    #[test]
    fn distances() {
        let h = KnownDensity::Linear { c0: int(0), c1: int(1) };
        // ∫|1/2 - x| = 1/4
        assert_eq!(h.distance(&StepFunction::constant(half())), ratio(1, 4));
        let g = KnownDensity::Step(StepFunction::constant(half()));
        assert_eq!(g.distance(&StepFunction::zero()), half());
        assert_eq!(g.measure(&RingSet::whole()).unwrap(), half());
    }

    #[test]
    fn from_spec_matches_build() {
        let spec = MeasureSpec::EncodedSet { set: vec![0, 2] };
        let h = KnownDensity::from_spec(&spec).unwrap();
        let mu = spec.build().unwrap();
        let e = RingSet::from_interval(crate::dyadic::interval(2, 1).unwrap());
        let b = mu.query(&e, &ratio(1, 1024)).unwrap();
        assert!(b.contains(&h.measure(&e).unwrap()));
    }
}
