//! Certifying step approximations of `dμ/dν` and producing `t'_n` and `t_n = t'_n·w_λ`.

use std::sync::{Arc, Mutex};

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::partition::{serialize_index, Atom, Nu, PartitionLadder, WeightFunction};
use crate::dyadic::RingSet;
use crate::error::{Error, Result};
use crate::measures::{FiniteMeasure, FiniteMeasureOracle, MeasureBounds};
use crate::rational::{self, Rational};
use crate::stepfn::{self, StepFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Stages tried per level before giving up.
    pub max_stages: usize,
    /// Levels computed together on the thread pool.
    pub batch: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_stages: 12, batch: 16 }
    }
}

/// One selected atom with the bounds that certified it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertifiedAtom {
    #[serde(serialize_with = "serialize_index")]
    pub index: num_bigint::BigUint,
    pub set: RingSet,
    #[serde(with = "rational::serde_pq")]
    pub coefficient: Rational,
    pub mu: MeasureBounds,
    pub nu: MeasureBounds,
}

/// Everything the search found at level `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DensityApprox {
    pub n: usize,
    pub stage: usize,
    pub atoms: Vec<CertifiedAtom>,
    pub mu_total: MeasureBounds,
    /// Certified upper bound on `Σ_I |μ(A_i) - a_i ν(A_i)|`.
    #[serde(with = "rational::serde_pq")]
    pub deviation_upper: Rational,
    pub t_prime: StepFunction,
    pub t: StepFunction,
}

impl DensityApprox {
    /// `2^-n-1`, the slack in both certificate inequalities.
    pub fn slack(&self) -> Rational {
        rational::pow2(-(self.n as i64) - 1)
    }
}

/// Upper bound on `|x - a·y|` over the boxes, for `a ≥ 0`.
fn deviation_bound(mu: &MeasureBounds, nu: &MeasureBounds, a: &Rational) -> Rational {
    let hi = (&mu.high - a * &nu.low).abs();
    let lo = (&mu.low - a * &nu.high).abs();
    hi.max(lo)
}

/// Searches for `I` and `a_i` satisfying the certificate conditions at level `n`:
/// `Σ_I μ(A_i) > μ(Ω) - 2^-n-1` and `Σ_I |μ(A_i) - a_i·ν(A_i)| < 2^-n-1`.
///
/// Stage `s` looks at the first `2^s` atoms at precision `2^-(n+4+2s)`.
/// The first stage already spans every non-empty Boolean atom, so a
/// certified `I` never drops an atom of positive `ν` mass. Coefficients are
/// `mid(μ)/mid(ν)`, which is exact for exactly known measures.
pub fn density_step_search(
    mu: &dyn FiniteMeasureOracle,
    nu: &dyn FiniteMeasureOracle,
    ladder: &PartitionLadder,
    n: usize,
    config: &SearchConfig,
) -> Result<DensityApprox> {
    let boolean = ladder.boolean_atoms(n)?.len().max(1);
    let first = boolean.next_power_of_two().trailing_zeros() as usize;
    let slack = rational::pow2(-(n as i64) - 1);
    for s in first..first + config.max_stages {
        let precision = rational::pow2(-((n + 4 + 2 * s) as i64));
        let atoms: Vec<Atom> = ladder.atom_prefix(n, 1 << s)?;
        let mu_total = mu.total_mass(&precision)?;
        let mut chosen = Vec::new();
        let mut mass_low = Rational::zero();
        let mut deviation = Rational::zero();
        for atom in atoms {
            let nu_b = nu.query(&atom.set, &precision)?;
            if !nu_b.low.is_positive() {
                continue;
            }
            let mu_b = mu.query(&atom.set, &precision)?;
            let coefficient = (mu_b.midpoint() / nu_b.midpoint()).max(Rational::zero());
            mass_low += &mu_b.low;
            deviation += deviation_bound(&mu_b, &nu_b, &coefficient);
            chosen.push(CertifiedAtom { index: atom.index, set: atom.set, coefficient, mu: mu_b, nu: nu_b });
        }
        if mass_low > &mu_total.high - &slack && deviation < slack {
            let t_prime = stepfn::normalize(chosen.iter().map(|a| (a.set.clone(), a.coefficient.clone())));
            return Ok(DensityApprox {
                n,
                stage: s,
                atoms: chosen,
                mu_total,
                deviation_upper: deviation,
                t_prime,
                t: StepFunction::zero(),
            });
        }
    }
    Err(Error::SearchBudgetExhausted { level: n, stages: config.max_stages })
}

/// `t = t'·w_λ`: each piece is sliced along the `F_i` and scaled by
/// `1/d(λ,i)`.
pub fn pull_back(t_prime: &StepFunction, nu: &Nu) -> Result<StepFunction> {
    let mut raw = Vec::new();
    for p in t_prime.pieces() {
        for (i, slice) in nu.slices(&p.support)? {
            raw.push((slice, &p.value * nu.weight().weight(i)?));
        }
    }
    Ok(stepfn::normalize(raw))
}

/// The lazily computed, memoized sequence `t_0, t_1, …`.
pub struct DensitySequence {
    mu: FiniteMeasure,
    nu: Arc<Nu>,
    ladder: Arc<PartitionLadder>,
    config: SearchConfig,
    cache: Mutex<Vec<Arc<DensityApprox>>>,
}

impl DensitySequence {
    pub fn new(mu: FiniteMeasure, nu: Arc<Nu>, ladder: Arc<PartitionLadder>, config: SearchConfig) -> Self {
        DensitySequence { mu, nu, ladder, config, cache: Mutex::new(Vec::new()) }
    }

    pub fn nu(&self) -> &Arc<Nu> {
        &self.nu
    }

    pub fn weight(&self) -> &Arc<WeightFunction> {
        self.nu.weight()
    }

    fn compute(&self, n: usize) -> Result<DensityApprox> {
        let mut approx = density_step_search(self.mu.as_ref(), self.nu.as_ref(), &self.ladder, n, &self.config)?;
        approx.t = pull_back(&approx.t_prime, &self.nu)?;
        Ok(approx)
    }

    /// Makes sure `t_0 … t_{len-1}` exist, computing missing levels a batch
    /// at a time in parallel.
    pub fn ensure(&self, len: usize) -> Result<()> {
        let mut cache = self.cache.lock().expect("density cache poisoned");
        if cache.len() >= len {
            return Ok(());
        }
        let target = len.max(cache.len() + self.config.batch.max(1));
        // Partitions and weights are built sequentially; levels are then
        // independent.
        self.ladder.boolean_atoms(target - 1)?;
        for i in 0..=target + 2 {
            self.nu.weight().denom(i)?;
        }
        let fresh: Vec<DensityApprox> =
            (cache.len()..target).into_par_iter().map(|n| self.compute(n)).collect::<Result<_>>()?;
        cache.extend(fresh.into_iter().map(Arc::new));
        Ok(())
    }

    pub fn get(&self, n: usize) -> Result<Arc<DensityApprox>> {
        self.ensure(n + 1)?;
        Ok(Arc::clone(&self.cache.lock().expect("density cache poisoned")[n]))
    }

    pub fn t(&self, n: usize) -> Result<StepFunction> {
        Ok(self.get(n)?.t.clone())
    }

    /// `n ↦ t_n`, for the T-set enumeration and the selection.
    pub fn as_approximants(self: &Arc<Self>) -> crate::l1::Approximants {
        let this = Arc::clone(self);
        Arc::new(move |n| this.t(n))
    }

    /// Levels computed so far.
    pub fn computed(&self) -> usize {
        self.cache.lock().expect("density cache poisoned").len()
    }
}

/// Exact re-check of one level's certificate.
///
/// `exact_mu`/`exact_nu` give true measures of ring sets; returns one line
/// per failed condition.
pub fn audit_certificate(
    approx: &DensityApprox,
    exact_mu: &dyn Fn(&RingSet) -> Result<Rational>,
    exact_nu: &dyn Fn(&RingSet) -> Result<Rational>,
    mu_total: &Rational,
) -> Result<Vec<String>> {
    let mut failures = Vec::new();
    let slack = approx.slack();
    let mut mass = Rational::zero();
    let mut deviation = Rational::zero();
    for a in &approx.atoms {
        let (m, v) = (exact_mu(&a.set)?, exact_nu(&a.set)?);
        if !a.mu.contains(&m) || !a.nu.contains(&v) {
            failures.push(format!("n={}: recorded bounds for atom {} miss the exact values", approx.n, a.index));
        }
        if !v.is_positive() {
            failures.push(format!("n={}: atom {} has ν = 0", approx.n, a.index));
        }
        deviation += (&m - &a.coefficient * &v).abs();
        mass += m;
    }
    if !approx.mu_total.contains(mu_total) {
        failures.push(format!("n={}: recorded μ(Ω) bounds miss the exact value", approx.n));
    }
    if mass <= mu_total - &slack {
        failures.push(format!("n={}: Σ μ(A_i) = {} is not above μ(Ω) - 2^-n-1", approx.n, rational::format(&mass)));
    }
    if deviation >= slack {
        failures.push(format!("n={}: Σ |μ - a ν| = {} is not below 2^-n-1", approx.n, rational::format(&deviation)));
    }
    if deviation > approx.deviation_upper {
        failures.push(format!("n={}: deviation exceeds its certified upper bound", approx.n));
    }
    Ok(failures)
}
