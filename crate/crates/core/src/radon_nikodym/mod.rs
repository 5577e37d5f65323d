//! Radon-Nikodym derivatives from one application of EC.
//!
//! The pipeline weights `λ` down to a finite `ν`, certifies step
//! approximations `t'_n` of `dμ/dν` on refining partitions, pulls them back
//! to `t_n` approximating `dμ/dλ`, and then asks EC which pairs `⟨n,k⟩`
//! belong to `T` so that a fast subsequence can be read off.

pub mod certify;
pub mod partition;
pub mod search;
pub mod tset;

use std::sync::Arc;

use serde::Serialize;

pub use certify::KnownDensity;
pub use partition::{build_weight, nu_measure, Atom, Nu, PartitionLadder, TailPartition, WeightFunction};
pub use search::{audit_certificate, density_step_search, pull_back, DensityApprox, DensitySequence, SearchConfig};
pub use tset::{enumerate_tset, select_fast, FastSelection, TSetStream};

use crate::ec::{self, EcOracle, EnName, SingleUse};
use crate::error::{Error, Result};
use crate::l1::{L1Name, L1NamePrefix};
use crate::measures::{FiniteMeasure, Measure, MeasureSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RnConfig {
    pub search: SearchConfig,
    /// Stages of the T-set enumeration before it reports exhaustion.
    pub tset_stages: usize,
    /// How far a certified modulus may read into the T-set name.
    pub modulus_cap: usize,
}

impl Default for RnConfig {
    fn default() -> Self {
        RnConfig { search: SearchConfig::default(), tset_stages: 192, modulus_cap: 1 << 22 }
    }
}

/// All the pieces of one run, shared so that the EC oracle, the selection
/// and the trace see the same memoized levels.
pub struct RnPipeline {
    lambda: Measure,
    seq: Arc<DensitySequence>,
    tset: EnName,
    config: RnConfig,
}

impl RnPipeline {
    pub fn new(lambda: Measure, mu: FiniteMeasure, config: RnConfig) -> Self {
        let weight = Arc::new(build_weight(Arc::clone(&lambda)));
        let nu = Arc::new(nu_measure(weight));
        let ladder = Arc::new(PartitionLadder::new(Arc::new(TailPartition::new())));
        let seq = Arc::new(DensitySequence::new(mu, nu, ladder, config.search));
        let tset = enumerate_tset(Arc::clone(&lambda), seq.as_approximants(), config.tset_stages);
        RnPipeline { lambda, seq, tset, config }
    }

    pub fn lambda(&self) -> &Measure {
        &self.lambda
    }

    pub fn sequence(&self) -> &Arc<DensitySequence> {
        &self.seq
    }

    /// The enumeration of `T` handed to EC.
    pub fn tset_name(&self) -> &EnName {
        &self.tset
    }

    fn require_lebesgue(&self) -> Result<()> {
        match self.lambda.spec() {
            Some(MeasureSpec::Lebesgue) => Ok(()),
            _ => Err(Error::Domain("exact T-set answers need λ = λ₀".into())),
        }
    }

    /// EC with a true modulus, computed from the known density.
    pub fn certified_oracle(&self, h: KnownDensity) -> Result<EcOracle> {
        self.require_lebesgue()?;
        Ok(certify::certified_oracle(Arc::clone(&self.seq), h, self.tset.clone(), self.config.modulus_cap))
    }

    /// EC answering from the known density without reading the name.
    pub fn cheat_oracle(&self, h: KnownDensity) -> Result<EcOracle> {
        self.require_lebesgue()?;
        Ok(certify::cheat_oracle(Arc::clone(&self.seq), h))
    }

    /// Applies EC (once) to the T-set name and returns the selection.
    pub fn run(&self, ec: &SingleUse<EcOracle>) -> Result<FastSelection> {
        let cf = ec::ec_apply_guarded(ec, &self.tset)?;
        Ok(FastSelection::new(self.seq.as_approximants(), Arc::new(cf)))
    }

    pub fn name(&self, selection: &FastSelection) -> L1Name {
        selection.name(Arc::clone(&self.lambda))
    }

    /// Per-level records for every level up to the last selected one, plus
    /// the first `len` approximants of the output name.
    pub fn trace(&self, selection: &FastSelection, len: usize) -> Result<RnTrace> {
        let name = self.name(selection);
        let prefix = name.to_prefix_json(len)?;
        let selected = selection.selected();
        let top = selected.iter().copied().max().map_or(0, |m| m + 1);
        let levels = (0..top).map(|n| Ok((*self.seq.get(n)?).clone())).collect::<Result<_>>()?;
        Ok(RnTrace { ec_mode: selection.cf().mode_name(), selected, levels, name: prefix })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RnTrace {
    pub ec_mode: &'static str,
    /// `n_0, n_1, …`
    pub selected: Vec<usize>,
    pub levels: Vec<DensityApprox>,
    pub name: L1NamePrefix,
}

/// `dμ/dλ` as an L¹(λ) name, spending the single EC application in `ec`.
pub fn rn(lambda: Measure, mu: FiniteMeasure, ec: &SingleUse<EcOracle>) -> Result<L1Name> {
    let pipeline = RnPipeline::new(lambda, mu, RnConfig::default());
    let selection = pipeline.run(ec)?;
    Ok(pipeline.name(&selection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{density_measure, lebesgue_oracle};
    use crate::rational::{self, half};
    use crate::stepfn::StepFunction;

    #[test]
    fn half_lebesgue_certified() {
        let h = StepFunction::constant(half());
        let pipeline = RnPipeline::new(lebesgue_oracle(), density_measure(h.clone()).unwrap(), RnConfig::default());
        let oracle = pipeline.certified_oracle(KnownDensity::Step(h.clone())).unwrap();
        let guard = ec::single_use_guard(oracle);
        let selection = pipeline.run(&guard).unwrap();
        let name = pipeline.name(&selection);
        for k in 0..5 {
            let s = name.approximant(k).unwrap();
            assert!(crate::stepfn::l1_distance_lebesgue(&s, &h) <= rational::pow2(-(k as i64)));
        }
        assert!(pipeline.run(&guard).is_err());
        assert_eq!(guard.applications(), 2);
    }

    #[test]
    fn zero_measure() {
        let guard = ec::single_use_guard(EcOracle::Budgeted { budget: 16 });
        let name = rn(lebesgue_oracle(), density_measure(StepFunction::zero()).unwrap(), &guard).unwrap();
        assert!(name.approximant(3).unwrap().is_zero());
    }
}
