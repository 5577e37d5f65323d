//! The tail partition `F_i`, the weight `w_λ`, the finite measure `ν`, and
//! the refining partitions `Q_n`.

use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dyadic::{self, RingSet};
use crate::error::{Error, Result};
use crate::measures::{self, FiniteMeasureOracle, Measure, MeasureBounds, MeasureOracle};
use crate::rational::{self, Rational};

/// Covering searches give up after this many ring codes.
const COVER_LIMIT: usize = 1 << 16;

#[derive(Default)]
struct TailState {
    /// `F_0, F_1, …`
    pieces: Vec<RingSet>,
    /// `U_m = α(0) ∪ … ∪ α(m)`
    unions: Vec<RingSet>,
}

/// `F_0 = α(0)`, `F_{i+1} = α(i+1) \ (F_0 ∪ … ∪ F_i)`.
#[derive(Default)]
pub struct TailPartition {
    state: Mutex<TailState>,
}

impl TailPartition {
    pub fn new() -> Self {
        TailPartition::default()
    }

    fn extend_to(&self, m: usize) -> Result<std::sync::MutexGuard<'_, TailState>> {
        let mut state = self.state.lock().expect("tail partition poisoned");
        while state.pieces.len() <= m {
            let i = state.pieces.len();
            let a = dyadic::alpha_u64(i as u64)?;
            let (piece, union) = match state.unions.last() {
                None => (a.clone(), a),
                Some(prev) => (a.difference(prev), a.union(prev)),
            };
            state.pieces.push(piece);
            state.unions.push(union);
        }
        Ok(state)
    }

    pub fn piece(&self, i: usize) -> Result<RingSet> {
        Ok(self.extend_to(i)?.pieces[i].clone())
    }

    pub fn prefix_union(&self, m: usize) -> Result<RingSet> {
        Ok(self.extend_to(m)?.unions[m].clone())
    }

    /// Least `m` with `E ⊆ U_m`.
    pub fn covering_index(&self, e: &RingSet) -> Result<usize> {
        for m in 0..COVER_LIMIT {
            if e.is_subset(&self.prefix_union(m)?) {
                return Ok(m);
            }
        }
        Err(Error::Domain(format!("no ring code below {COVER_LIMIT} covers the set")))
    }
}

/// `d(λ,i) > λ(F_i)·2^i`, and the weight `w_λ = 1/d(λ,i)` on `F_i`.
pub struct WeightFunction {
    partition: Arc<TailPartition>,
    lambda: Measure,
    denoms: Mutex<Vec<(BigUint, Rational)>>,
}

impl WeightFunction {
    pub fn partition(&self) -> &Arc<TailPartition> {
        &self.partition
    }

    pub fn lambda(&self) -> &Measure {
        &self.lambda
    }

    fn entry(&self, i: usize) -> Result<(BigUint, Rational)> {
        let mut denoms = self.denoms.lock().expect("weight poisoned");
        while denoms.len() <= i {
            let j = denoms.len();
            let f = self.partition.piece(j)?;
            let upper = self.lambda.query(&f, &Rational::one())?.high;
            let d = rational::ceil_to_uint(&(&upper * rational::pow2(j as i64))) + 1u8;
            denoms.push((d, upper));
        }
        Ok(denoms[i].clone())
    }

    pub fn denom(&self, i: usize) -> Result<BigUint> {
        Ok(self.entry(i)?.0)
    }

    /// The upper bound on `λ(F_i)` that `d(λ,i)` was derived from.
    pub fn certified_upper(&self, i: usize) -> Result<Rational> {
        Ok(self.entry(i)?.1)
    }

    pub fn weight(&self, i: usize) -> Result<Rational> {
        Ok(Rational::new(1.into(), self.denom(i)?.into()))
    }
}

pub fn build_weight(lambda: Measure) -> WeightFunction {
    WeightFunction { partition: Arc::new(TailPartition::new()), lambda, denoms: Mutex::new(Vec::new()) }
}

/// `ν(E) = ∫_E w_λ dλ`, a finite measure with `ν ≪ λ ≪ ν`.
pub struct Nu {
    weight: Arc<WeightFunction>,
}

pub fn nu_measure(weight: Arc<WeightFunction>) -> Nu {
    Nu { weight }
}

impl Nu {
    pub fn weight(&self) -> &Arc<WeightFunction> {
        &self.weight
    }

    /// The non-empty slices `(i, E ∩ F_i)`.
    pub fn slices(&self, e: &RingSet) -> Result<Vec<(usize, RingSet)>> {
        if e.is_empty() {
            return Ok(Vec::new());
        }
        let m = self.weight.partition.covering_index(e)?;
        let mut out = Vec::new();
        for i in 0..=m {
            let slice = e.intersection(&self.weight.partition.piece(i)?);
            if !slice.is_empty() {
                out.push((i, slice));
            }
        }
        Ok(out)
    }

    /// `ν(E)` from an exact `λ`.
    pub fn exact_with(&self, e: &RingSet, exact_lambda: &dyn Fn(&RingSet) -> Rational) -> Result<Rational> {
        let mut total = Rational::zero();
        for (i, slice) in self.slices(e)? {
            total += exact_lambda(&slice) * self.weight.weight(i)?;
        }
        Ok(total)
    }

    /// `N` with `Σ_{i>N} λ(F_i)/d(λ,i) ≤ 2^-N ≤ precision/2`.
    fn tail_cut(precision: &Rational) -> usize {
        let half = precision / rational::int(2);
        let mut n = 0;
        while rational::pow2(-(n as i64)) > half {
            n += 1;
        }
        n
    }
}

impl MeasureOracle for Nu {
    fn query(&self, e: &RingSet, precision: &Rational) -> Result<MeasureBounds> {
        measures::check_precision(precision)?;
        let slices = self.slices(e)?;
        if slices.is_empty() {
            return Ok(MeasureBounds::around(&Rational::zero(), precision));
        }
        let share = precision / rational::int(slices.len() as i64);
        let mut acc = MeasureBounds::new(Rational::zero(), Rational::zero());
        for (i, slice) in slices {
            let d = Rational::from_integer(self.weight.denom(i)?.into());
            let b = self.weight.lambda.query(&slice, &(&share * &d))?;
            acc = acc.add(&b.scale(&(Rational::one() / d)));
        }
        Ok(acc)
    }
}

impl FiniteMeasureOracle for Nu {
    fn total_mass(&self, precision: &Rational) -> Result<MeasureBounds> {
        measures::check_precision(precision)?;
        let cut = Nu::tail_cut(precision);
        let mut nonempty = Vec::new();
        for i in 0..=cut {
            let f = self.weight.partition.piece(i)?;
            if !f.is_empty() {
                nonempty.push((i, f));
            }
        }
        let mut acc = MeasureBounds::new(Rational::zero(), Rational::zero());
        if !nonempty.is_empty() {
            let share = precision / rational::int(2 * nonempty.len() as i64);
            for (i, f) in nonempty {
                let d = Rational::from_integer(self.weight.denom(i)?.into());
                let b = self.weight.lambda.query(&f, &(&share * &d))?;
                acc = acc.add(&b.scale(&(Rational::one() / d)));
            }
        }
        // Each later term is below 2^-i, so the tail is in [0, 2^-cut].
        let high = &acc.high + rational::pow2(-(cut as i64));
        let low = acc.low.max(Rational::zero());
        Ok(MeasureBounds::new(low, high))
    }
}

/// An atom `α∘H(n,i)` of `Q_n` with its index `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Atom {
    #[serde(serialize_with = "serialize_index")]
    pub index: BigUint,
    pub set: RingSet,
}

pub(crate) fn serialize_index<S: serde::Serializer>(i: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&i.to_string())
}

/// The partitions `Q_0, Q_1, …`, built incrementally.
///
/// Boolean atoms `G_0 ∩ … ∩ G_n` get index `Σ c_j 2^{n-j}` where `c_j = 0`
/// picks `α(j)` and `c_j = 1` picks `U_n \ α(j)`; empty ones are skipped.
/// Tails `α(i'+1) \ U_{i'}` for `i' ≥ n` follow at `2^{n+1} + (i' - n)`.
pub struct PartitionLadder {
    tails: Arc<TailPartition>,
    levels: Mutex<Vec<Arc<Vec<Atom>>>>,
}

impl PartitionLadder {
    pub fn new(tails: Arc<TailPartition>) -> Self {
        PartitionLadder { tails, levels: Mutex::new(Vec::new()) }
    }

    pub fn boolean_atoms(&self, n: usize) -> Result<Arc<Vec<Atom>>> {
        let mut levels = self.levels.lock().expect("ladder poisoned");
        if levels.is_empty() {
            let a0 = dyadic::alpha_u64(0)?;
            let u0 = self.tails.prefix_union(0)?;
            let base: Vec<Atom> = [(0u8, a0.clone()), (1u8, u0.difference(&a0))]
                .into_iter()
                .filter(|(_, s)| !s.is_empty())
                .map(|(c, set)| Atom { index: BigUint::from(c), set })
                .collect();
            levels.push(Arc::new(base));
        }
        while levels.len() <= n {
            let next = levels.len();
            let a = dyadic::alpha_u64(next as u64)?;
            let prev_union = self.tails.prefix_union(next - 1)?;
            let mut atoms = Vec::new();
            for atom in levels.last().expect("non-empty").iter() {
                let doubled: BigUint = &atom.index << 1u8;
                let inside = atom.set.intersection(&a);
                if !inside.is_empty() {
                    atoms.push(Atom { index: doubled.clone(), set: inside });
                }
                let outside = atom.set.difference(&a);
                if !outside.is_empty() {
                    atoms.push(Atom { index: doubled + 1u8, set: outside });
                }
            }
            // Points new to U_{n+1} avoid every earlier α(j).
            let fresh = a.difference(&prev_union);
            if !fresh.is_empty() {
                let index = (BigUint::one() << (next + 1)) - 2u8;
                atoms.push(Atom { index, set: fresh });
            }
            levels.push(Arc::new(atoms));
        }
        Ok(Arc::clone(&levels[n]))
    }

    /// The `j`-th tail atom of level `n`.
    pub fn tail_atom(&self, n: usize, j: usize) -> Result<Atom> {
        let i = n + j;
        let set = dyadic::alpha_u64(i as u64 + 1)?.difference(&self.tails.prefix_union(i)?);
        Ok(Atom { index: (BigUint::one() << (n + 1)) + j, set })
    }

    /// The first `count` atoms of `Q_n` in index order.
    pub fn atom_prefix(&self, n: usize, count: usize) -> Result<Vec<Atom>> {
        let boolean = self.boolean_atoms(n)?;
        let mut out: Vec<Atom> = boolean.iter().take(count).cloned().collect();
        let mut j = 0;
        while out.len() < count {
            out.push(self.tail_atom(n, j)?);
            j += 1;
        }
        Ok(out)
    }
}
