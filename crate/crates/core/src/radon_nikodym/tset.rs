//! Enumerating `T = {⟨n,k⟩ | ∃i>n ‖t_n - t_i‖_λ > 2^-k}` and picking the
//! fast subsequence once EC has turned that enumeration into a
//! characteristic function.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use num_traits::{Signed, Zero};

use crate::ec::{self, CfName, EnName};
use crate::error::{Error, Result};
use crate::l1::{self, Approximants, L1Name};
use crate::measures::{Measure, MeasureBounds};
use crate::rational::{self, Rational};
use crate::stepfn::StepFunction;

/// Smallest `k` with `2^-k < x`, for `x > 0`.
fn first_threshold_below(x: &Rational) -> u64 {
    let mut k = 0;
    while rational::pow2(-(k as i64)) >= *x {
        k += 1;
    }
    k
}

/// Producer of the T-set name, one stage at a time.
///
/// Stage `s` brings in `t_s`, bounds `‖t_n - t_s‖_λ` for every `n < s` at
/// precision `2^-(s+2)`, re-sharpens earlier bounds that still straddle a
/// threshold `2^-k` with `k ≤ s`, and then lists every newly certified
/// `⟨n,k⟩` with `k ≤ s` in increasing order, followed by one dummy.
/// Distinct `t_n` are deduplicated so equal functions share one norm.
pub struct TSetStream {
    lambda: Measure,
    seq: Approximants,
    max_stage: usize,
    stage: usize,
    queue: VecDeque<u64>,
    /// Class of each `t_n`; equal step functions share a class.
    class_of: Vec<usize>,
    classes: Vec<StepFunction>,
    class_index: HashMap<StepFunction, usize>,
    /// Indices of each class, ascending.
    members: Vec<Vec<usize>>,
    /// Norm bounds between classes `(a, b)` with `a < b`.
    pairs: HashMap<(usize, usize), MeasureBounds>,
    best_low: Vec<Rational>,
    /// Emitted `k` range per `n`.
    emitted: Vec<Option<(u64, u64)>>,
}

impl TSetStream {
    pub fn new(lambda: Measure, seq: Approximants, max_stage: usize) -> Self {
        TSetStream {
            lambda,
            seq,
            max_stage,
            stage: 0,
            queue: VecDeque::new(),
            class_of: Vec::new(),
            classes: Vec::new(),
            class_index: HashMap::new(),
            members: Vec::new(),
            pairs: HashMap::new(),
            best_low: Vec::new(),
            emitted: Vec::new(),
        }
    }

    fn pair_bounds(&mut self, a: usize, b: usize, precision: &Rational) -> Result<MeasureBounds> {
        let key = (a.min(b), a.max(b));
        let bounds = l1::distance_rsf(self.lambda.as_ref(), &self.classes[key.0], &self.classes[key.1], precision)?;
        self.pairs.insert(key, bounds.clone());
        Ok(bounds)
    }

    /// Raises `best_low[n]` for every `n` in class `a` that has a later
    /// index in class `b`.
    fn credit(&mut self, a: usize, b: usize, low: &Rational) {
        let Some(&last_b) = self.members[b].last() else { return };
        for &n in &self.members[a] {
            if n < last_b && *low > self.best_low[n] {
                self.best_low[n] = low.clone();
            }
        }
    }

    fn run_stage(&mut self) -> Result<()> {
        let s = self.stage;
        if s > self.max_stage {
            return Err(Error::SearchBudgetExhausted { level: s, stages: self.max_stage });
        }
        let t = (self.seq)(s)?;
        let precision = rational::pow2(-(s as i64) - 2);
        let class = match self.class_index.get(&t) {
            Some(&c) => c,
            None => {
                let c = self.classes.len();
                self.class_index.insert(t.clone(), c);
                self.classes.push(t);
                self.members.push(Vec::new());
                c
            }
        };
        self.class_of.push(class);
        self.members[class].push(s);
        self.best_low.push(Rational::zero());
        self.emitted.push(None);

        // t_s is a new witness for every earlier n.
        for other in 0..self.classes.len() {
            if other == class {
                continue;
            }
            let key = (other.min(class), other.max(class));
            let bounds = match self.pairs.get(&key) {
                Some(b) => b.clone(),
                None => self.pair_bounds(other, class, &precision)?,
            };
            self.credit(other, class, &bounds.low);
        }

        // Sharpen pairs whose bounds straddle a threshold in range.
        let mut straddling: Vec<(usize, usize)> = self
            .pairs
            .iter()
            .filter(|(_, b)| straddles(b, s as u64))
            .map(|(&k, _)| k)
            .collect();
        straddling.sort_unstable();
        for (a, b) in straddling {
            let bounds = self.pair_bounds(a, b, &precision)?;
            self.credit(a, b, &bounds.low);
            self.credit(b, a, &bounds.low);
        }

        let mut fresh = Vec::new();
        for n in 0..s {
            if !self.best_low[n].is_positive() {
                continue;
            }
            let lo_k = first_threshold_below(&self.best_low[n]);
            let ks: Vec<u64> = match self.emitted[n] {
                None => (lo_k..=s as u64).collect(),
                Some((from, upto)) => (lo_k..from).chain(upto + 1..=s as u64).collect(),
            };
            if lo_k <= s as u64 {
                let (from, upto) = self.emitted[n].unwrap_or((lo_k, lo_k));
                self.emitted[n] = Some((from.min(lo_k), upto.max(s as u64)));
            }
            fresh.extend(ks.into_iter().map(|k| ec::pair(n as u64, k) + 1));
        }
        fresh.sort_unstable();
        self.queue.extend(fresh);
        self.queue.push_back(0);
        self.stage += 1;
        Ok(())
    }
}

/// True when some `2^-k` with `k ≤ s` lies in `[low, high)`, so the bound
/// cannot yet decide `‖·‖ > 2^-k`.
fn straddles(b: &MeasureBounds, s: u64) -> bool {
    (0..=s).any(|k| {
        let th = rational::pow2(-(k as i64));
        b.low <= th && th < b.high
    })
}

impl Iterator for TSetStream {
    type Item = Result<u64>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.queue.is_empty() {
            if let Err(e) = self.run_stage() {
                return Some(Err(e));
            }
        }
        self.queue.pop_front().map(Ok)
    }
}

/// The subsequence picked out by a characteristic function of `T`.
///
/// `n_k` is the least `n > n_{k-1}` with `⟨n,k⟩ ∉ T`, starting from
/// `n_{-1} = 0`.
#[derive(Clone)]
pub struct FastSelection {
    seq: Approximants,
    cf: Arc<CfName>,
    chosen: Arc<Mutex<Vec<usize>>>,
}

impl FastSelection {
    pub fn new(seq: Approximants, cf: Arc<CfName>) -> Self {
        FastSelection { seq, cf, chosen: Arc::new(Mutex::new(Vec::new())) }
    }

    /// `n_k`.
    pub fn index(&self, k: usize) -> Result<usize> {
        let mut chosen = self.chosen.lock().expect("selection poisoned");
        while chosen.len() <= k {
            let j = chosen.len();
            let mut n = chosen.last().map_or(0, |&p| p) + 1;
            while self.cf.bit(ec::pair(n as u64, j as u64))? {
                n += 1;
            }
            chosen.push(n);
        }
        Ok(chosen[k])
    }

    /// Indices selected so far.
    pub fn selected(&self) -> Vec<usize> {
        self.chosen.lock().expect("selection poisoned").clone()
    }

    pub fn cf(&self) -> &Arc<CfName> {
        &self.cf
    }

    /// The name `s_k = t_{n_k}`, with context `lambda`.
    pub fn name(&self, lambda: Measure) -> L1Name {
        let this = self.clone();
        L1Name::from_fn(lambda, move |k| (this.seq)(this.index(k)?))
    }
}

pub fn select_fast(lambda: Measure, seq: Approximants, cf: Arc<CfName>) -> L1Name {
    FastSelection::new(seq, cf).name(lambda)
}

/// The T-set name for `seq`, read lazily.
pub fn enumerate_tset(lambda: Measure, seq: Approximants, max_stage: usize) -> EnName {
    EnName::from_source(TSetStream::new(lambda, seq, max_stage))
}

/// Exact test of `⟨n,k⟩ ∈ T` against computed levels, given exact norms.
pub fn exact_witness(
    seq: &Approximants,
    n: usize,
    k: u64,
    horizon: usize,
    exact_norm: &dyn Fn(&StepFunction, &StepFunction) -> Rational,
) -> Result<Option<usize>> {
    let threshold = rational::pow2(-(k as i64));
    let t_n = seq(n)?;
    for i in n + 1..horizon {
        if exact_norm(&t_n, &seq(i)?) > threshold {
            return Ok(Some(i));
        }
    }
    Ok(None)
}
