//! Enumeration and characteristic-function names of subsets of ℕ, and the
//! operator EC between them.
//!
//! EC is not computable, so an [`EcOracle`] always carries an explicit trust
//! assumption: a step budget (sound positives, possibly wrong negatives), a
//! caller-supplied modulus, or a decidable answer handed in directly.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

type EntrySource = Box<dyn Iterator<Item = Result<u64>> + Send>;

struct EnState {
    source: Option<EntrySource>,
    entries: Vec<u64>,
    first_seen: HashMap<u64, usize>,
    failure: Option<Error>,
}

impl EnState {
    /// Reads until `len` entries are buffered or the source runs dry.
    fn fill(&mut self, len: usize) -> Result<()> {
        if let Some(err) = &self.failure {
            return Err(err.clone());
        }
        while self.entries.len() < len {
            let Some(source) = self.source.as_mut() else { return Ok(()) };
            let Some(next) = source.next() else {
                self.source = None;
                return Ok(());
            };
            let value = match next {
                Ok(v) => v,
                Err(e) => {
                    self.failure = Some(e.clone());
                    return Err(e);
                }
            };
            let pos = self.entries.len();
            if value != 0 {
                if let Some(&first) = self.first_seen.get(&value) {
                    let err = Error::MalformedName { value, first, second: pos };
                    self.failure = Some(err.clone());
                    return Err(err);
                }
                self.first_seen.insert(value, pos);
            }
            self.entries.push(value);
        }
        Ok(())
    }

    fn exhausted(&self) -> bool {
        self.source.is_none()
    }
}

/// A name `0^{n_0} 1 0^{n_1} 1 …`, held as the block lengths `n_i`.
///
/// Entry `n+1` lists `n`; entry `0` is a dummy. Entries are read lazily and
/// memoized, and clones share one underlying stream. A finite source is
/// padded with dummies.
#[derive(Clone)]
pub struct EnName {
    state: Arc<Mutex<EnState>>,
}

impl fmt::Debug for EnName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let state = self.lock();
        f.debug_struct("EnName").field("buffered", &state.entries.len()).field("exhausted", &state.exhausted()).finish()
    }
}

impl EnName {
    pub fn from_source(source: impl Iterator<Item = Result<u64>> + Send + 'static) -> Self {
        EnName {
            state: Arc::new(Mutex::new(EnState {
                source: Some(Box::new(source)),
                entries: Vec::new(),
                first_seen: HashMap::new(),
                failure: None,
            })),
        }
    }

    /// The given entries followed by dummies.
    pub fn from_entries(entries: Vec<u64>) -> Self {
        EnName::from_source(entries.into_iter().map(Ok))
    }

    pub fn all_dummies() -> Self {
        EnName::from_entries(Vec::new())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, EnState> {
        self.state.lock().expect("EnName poisoned")
    }

    pub fn entry(&self, i: usize) -> Result<u64> {
        let mut state = self.lock();
        state.fill(i + 1)?;
        Ok(state.entries.get(i).copied().unwrap_or(0))
    }

    pub fn prefix(&self, len: usize) -> Result<Vec<u64>> {
        let mut state = self.lock();
        state.fill(len)?;
        let mut out: Vec<u64> = state.entries.iter().take(len).copied().collect();
        out.resize(len, 0);
        Ok(out)
    }

    /// Position of entry `x+1` among the first `limit` entries.
    pub fn position_of(&self, x: u64, limit: usize) -> Result<Option<usize>> {
        let mut state = self.lock();
        if let Some(&p) = state.first_seen.get(&(x + 1)) {
            return Ok((p < limit).then_some(p));
        }
        // Stream in chunks so a huge limit on a finite source stays cheap.
        while state.entries.len() < limit && !state.exhausted() {
            let target = limit.min(state.entries.len().saturating_mul(2).max(64));
            // A failure further along must not hide an entry already read.
            let filled = state.fill(target);
            if let Some(&p) = state.first_seen.get(&(x + 1)) {
                return Ok((p < limit).then_some(p));
            }
            filled?;
        }
        Ok(None)
    }

    pub fn buffered(&self) -> usize {
        self.lock().entries.len()
    }

    /// Entries `from..to` that are already buffered.
    fn buffered_range(&self, from: usize, to: usize) -> Vec<u64> {
        let state = self.lock();
        let to = to.min(state.entries.len());
        if from >= to {
            Vec::new()
        } else {
            state.entries[from..to].to_vec()
        }
    }

    /// The literal word for the first `len` entries.
    pub fn to_word(&self, len: usize) -> Result<String> {
        Ok(render_word(&self.prefix(len)?))
    }
}

/// Lists each member `n` of `set` as `n+1`, ascending, then dummies.
pub fn en_encode(set: &BTreeSet<u64>) -> EnName {
    EnName::from_entries(set.iter().map(|n| n + 1).collect())
}

/// `{n | n+1 occurs among the first `steps` entries}`.
pub fn en_decode_prefix(p: &EnName, steps: usize) -> Result<BTreeSet<u64>> {
    Ok(p.prefix(steps)?.into_iter().filter(|&v| v != 0).map(|v| v - 1).collect())
}

pub fn render_word(entries: &[u64]) -> String {
    let mut out = String::new();
    for &n in entries {
        out.extend(std::iter::repeat_n('0', n as usize));
        out.push('1');
    }
    out
}

pub fn render_numeric(entries: &[u64]) -> String {
    entries.iter().map(|n| format!("{n}\n")).collect()
}

/// Block lengths of a word over `{0,1}`. A trailing run of zeros is an
/// unfinished block and is dropped.
pub fn parse_word(word: &str) -> Result<Vec<u64>> {
    let mut entries = Vec::new();
    let mut zeros: u64 = 0;
    for (i, c) in word.trim().chars().enumerate() {
        match c {
            '0' => zeros += 1,
            '1' => {
                entries.push(zeros);
                zeros = 0;
            }
            _ => return Err(Error::Parse(format!("unexpected {c:?} at offset {i} of En word"))),
        }
    }
    check_distinct(&entries)?;
    Ok(entries)
}

pub fn parse_numeric(text: &str) -> Result<Vec<u64>> {
    let entries = text
        .split_whitespace()
        .map(|tok| tok.parse::<u64>().map_err(|_| Error::Parse(format!("bad En entry {tok:?}"))))
        .collect::<Result<Vec<_>>>()?;
    check_distinct(&entries)?;
    Ok(entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnFormat {
    Word,
    Numeric,
}

/// A single whitespace-free token over `{0,1}` is a word; anything else is
/// one entry per line.
pub fn detect_format(text: &str) -> EnFormat {
    let t = text.trim();
    let one_token = t.split_whitespace().nth(1).is_none();
    if !t.is_empty() && one_token && t.chars().all(|c| c == '0' || c == '1') {
        EnFormat::Word
    } else {
        EnFormat::Numeric
    }
}

pub fn parse_en(text: &str, format: Option<EnFormat>) -> Result<Vec<u64>> {
    match format.unwrap_or_else(|| detect_format(text)) {
        EnFormat::Word => parse_word(text),
        EnFormat::Numeric => parse_numeric(text),
    }
}

fn check_distinct(entries: &[u64]) -> Result<()> {
    let mut seen = HashMap::new();
    for (pos, &v) in entries.iter().enumerate() {
        if v != 0 {
            if let Some(first) = seen.insert(v, pos) {
                return Err(Error::MalformedName { value: v, first, second: pos });
            }
        }
    }
    Ok(())
}

/// Stream-position bound: if `x` is enumerated at all, entry `x+1` occurs
/// among the first `modulus(x)` entries.
pub type Modulus = Arc<dyn Fn(u64) -> Result<usize> + Send + Sync>;

pub type Decider = Arc<dyn Fn(u64) -> Result<bool> + Send + Sync>;

#[derive(Clone)]
pub enum EcOracle {
    /// Membership iff listed within the first `budget` entries.
    Budgeted { budget: usize },
    Certified { modulus: Modulus },
    /// Answers straight from a decision procedure, ignoring the name.
    Cheat { answer: Decider },
}

impl fmt::Debug for EcOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EcOracle::Budgeted { budget } => write!(f, "Budgeted({budget})"),
            EcOracle::Certified { .. } => f.write_str("Certified"),
            EcOracle::Cheat { .. } => f.write_str("Cheat"),
        }
    }
}

impl EcOracle {
    pub fn mode_name(&self) -> &'static str {
        match self {
            EcOracle::Budgeted { .. } => "budgeted",
            EcOracle::Certified { .. } => "certified",
            EcOracle::Cheat { .. } => "cheat",
        }
    }

    pub fn cheat_from_set(set: BTreeSet<u64>) -> Self {
        EcOracle::Cheat { answer: Arc::new(move |x| Ok(set.contains(&x))) }
    }
}

#[derive(Default)]
struct CfState {
    answers: HashMap<u64, bool>,
    answered_zero: HashSet<u64>,
    heuristic: BTreeSet<u64>,
    scanned: usize,
}

/// The characteristic function produced by one application of EC, read
/// lazily bit by bit.
pub struct CfName {
    oracle: EcOracle,
    name: EnName,
    state: Mutex<CfState>,
}

impl CfName {
    pub fn bit(&self, x: u64) -> Result<bool> {
        let mut state = self.state.lock().expect("CfName poisoned");
        if let Some(&b) = state.answers.get(&x) {
            return Ok(b);
        }
        let b = match &self.oracle {
            EcOracle::Cheat { answer } => answer(x)?,
            EcOracle::Budgeted { budget } => {
                let found = self.name.position_of(x, *budget)?.is_some();
                if !found {
                    state.heuristic.insert(x);
                }
                found
            }
            EcOracle::Certified { modulus } => {
                let limit = modulus(x)?;
                let found = self.name.position_of(x, limit)?.is_some();
                self.audit(&mut state)?;
                found
            }
        };
        state.answers.insert(x, b);
        if !b {
            state.answered_zero.insert(x);
        }
        Ok(b)
    }

    /// Checks everything read so far against earlier negative answers.
    fn audit(&self, state: &mut CfState) -> Result<()> {
        let upto = self.name.buffered();
        for v in self.name.buffered_range(state.scanned, upto) {
            if v != 0 && state.answered_zero.contains(&(v - 1)) {
                return Err(Error::ContractViolation(v - 1));
            }
        }
        state.scanned = upto;
        Ok(())
    }

    /// Re-audits a certified answer set after the name has been read further
    /// by someone else.
    pub fn recheck(&self) -> Result<()> {
        if matches!(self.oracle, EcOracle::Certified { .. }) {
            let mut state = self.state.lock().expect("CfName poisoned");
            self.audit(&mut state)?;
        }
        Ok(())
    }

    pub fn bits(&self, upto: u64) -> Result<Vec<bool>> {
        (0..upto).map(|x| self.bit(x)).collect()
    }

    /// Indices answered 0 only because the budget ran out.
    pub fn heuristic_negatives(&self) -> BTreeSet<u64> {
        self.state.lock().expect("CfName poisoned").heuristic.clone()
    }

    pub fn mode_name(&self) -> &'static str {
        self.oracle.mode_name()
    }
}

pub fn ec_apply(oracle: &EcOracle, p: &EnName) -> CfName {
    CfName { oracle: oracle.clone(), name: p.clone(), state: Mutex::new(CfState::default()) }
}

/// A use-once token: the wrapped value can be applied exactly once.
///
/// Moving it to another thread is fine; it is deliberately not `Clone`.
pub struct SingleUse<T> {
    inner: T,
    label: &'static str,
    uses: Arc<AtomicUsize>,
}

impl<T> SingleUse<T> {
    pub fn new(inner: T, label: &'static str) -> Self {
        SingleUse { inner, label, uses: Arc::new(AtomicUsize::new(0)) }
    }

    pub fn apply<R>(&self, f: impl FnOnce(&T) -> R) -> Result<R> {
        if self.uses.fetch_add(1, Ordering::SeqCst) > 0 {
            return Err(Error::DisciplineViolation(self.label));
        }
        Ok(f(&self.inner))
    }

    pub fn applications(&self) -> usize {
        self.uses.load(Ordering::SeqCst)
    }

    /// A handle for observing the count after the token has moved on.
    pub fn counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.uses)
    }
}

pub fn single_use_guard(oracle: EcOracle) -> SingleUse<EcOracle> {
    SingleUse::new(oracle, "EC")
}

pub fn ec_apply_guarded(guard: &SingleUse<EcOracle>, p: &EnName) -> Result<CfName> {
    guard.apply(|oracle| ec_apply(oracle, p))
}

/// Cantor pairing `⟨n,k⟩ = (n+k)(n+k+1)/2 + k`.
pub fn pair(n: u64, k: u64) -> u64 {
    let w = n + k;
    w * (w + 1) / 2 + k
}

pub fn unpair(z: u64) -> (u64, u64) {
    let mut w = ((8.0 * z as f64 + 1.0).sqrt() as u64).saturating_sub(1) / 2;
    while w * (w + 1) / 2 > z {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= z {
        w += 1;
    }
    let k = z - w * (w + 1) / 2;
    (w - k, k)
}
