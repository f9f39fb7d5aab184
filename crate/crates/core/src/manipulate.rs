//! Beam/sampling data manipulation: a seeded split of the monolingual
//! corpus routes the first `floor(gamma * |M|)` shuffled sentences to beam
//! search and the rest to sampling, then the two halves are merged back.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use crate::corpus::MonoCorpus;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Purpose};
use crate::Token;

pub const DEFAULT_DM_GAMMA: f64 = 0.5;

/// Ratios tried when tuning the beam share.
pub const GAMMA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Beam,
    Sampling,
    GammaSelect,
    GammaSample,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Beam => "beam",
            Provenance::Sampling => "sampling",
            Provenance::GammaSelect => "gamma-select",
            Provenance::GammaSample => "gamma-sample",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beam" => Ok(Provenance::Beam),
            "sampling" => Ok(Provenance::Sampling),
            "gamma-select" => Ok(Provenance::GammaSelect),
            "gamma-sample" => Ok(Provenance::GammaSample),
            other => Err(invalid(format!("unknown provenance '{other}'"))),
        }
    }
}

/// A synthetic source paired with the authentic target it was generated from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticPair {
    pub source: Vec<Token>,
    pub target: Vec<Token>,
    pub provenance: Provenance,
}

impl SyntheticPair {
    pub fn new(source: Vec<Token>, target: Vec<Token>, provenance: Provenance) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(invalid("synthetic pair sides must be non-empty"));
        }
        Ok(Self { source, target, provenance })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub gamma: f64,
    pub seed: u64,
    /// Sorted ascending.
    pub beam_ids: Vec<usize>,
    /// Sorted ascending.
    pub sampling_ids: Vec<usize>,
}

impl SplitPlan {
    pub fn total(&self) -> usize {
        self.beam_ids.len() + self.sampling_ids.len()
    }

    /// Per-index routing: `true` for beam.
    pub fn routes(&self) -> Vec<bool> {
        let mut r = vec![false; self.total()];
        for &i in &self.beam_ids {
            r[i] = true;
        }
        r
    }

    /// Small key-value manifest describing the split.
    pub fn manifest(&self) -> String {
        format!(
            "gamma={}\nseed={}\nk={}\nbeam={}\nsampling={}\ntotal={}\n",
            self.gamma,
            self.seed,
            self.beam_ids.len(),
            self.beam_ids.len(),
            self.sampling_ids.len(),
            self.total()
        )
    }
}

pub fn split_monolingual(m: &MonoCorpus, gamma: f64, seed: u64) -> Result<SplitPlan> {
    split_indices(m.len(), gamma, seed)
}

pub(crate) fn split_indices(n: usize, gamma: f64, seed: u64) -> Result<SplitPlan> {
    if n == 0 {
        return Err(invalid("cannot split an empty corpus"));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Purpose::Split, 0));
    let k = (gamma * n as f64).floor() as usize;
    let mut beam_ids = order[..k].to_vec();
    let mut sampling_ids = order[k..].to_vec();
    beam_ids.sort_unstable();
    sampling_ids.sort_unstable();
    Ok(SplitPlan { gamma, seed, beam_ids, sampling_ids })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedSyntheticCorpus {
    pub pairs: Vec<SyntheticPair>,
    pub plan: SplitPlan,
}

/// Merges the beam-routed and sampling-routed pairs back into corpus order.
/// Each side must cover exactly its plan ids and carry the matching tag.
pub fn assemble_mixed_corpus(
    plan: &SplitPlan,
    beam_pairs: BTreeMap<usize, SyntheticPair>,
    sampling_pairs: BTreeMap<usize, SyntheticPair>,
) -> Result<MixedSyntheticCorpus> {
    check_side(&plan.beam_ids, &beam_pairs, Provenance::Beam)?;
    check_side(&plan.sampling_ids, &sampling_pairs, Provenance::Sampling)?;
    let mut merged: BTreeMap<usize, SyntheticPair> = beam_pairs;
    for (i, p) in sampling_pairs {
        if merged.insert(i, p).is_some() {
            return Err(Error::Inconsistent(format!("index {i} routed to both beam and sampling")));
        }
    }
    if merged.len() != plan.total() || merged.keys().next_back().is_some_and(|&i| i >= plan.total()) {
        return Err(Error::Inconsistent("assembled corpus does not cover the plan".into()));
    }
    Ok(MixedSyntheticCorpus { pairs: merged.into_values().collect(), plan: plan.clone() })
}

fn check_side(ids: &[usize], pairs: &BTreeMap<usize, SyntheticPair>, tag: Provenance) -> Result<()> {
    if ids.len() != pairs.len() || !ids.iter().all(|i| pairs.contains_key(i)) {
        let missing: Vec<_> = ids.iter().filter(|i| !pairs.contains_key(i)).take(5).collect();
        let extra: Vec<_> = pairs.keys().filter(|i| ids.binary_search(i).is_err()).take(5).collect();
        return Err(Error::Inconsistent(format!(
            "{tag} pairs do not match the plan (missing {missing:?}, extra {extra:?})"
        )));
    }
    if let Some((i, _)) = pairs.iter().find(|(_, p)| p.provenance != tag) {
        return Err(Error::Inconsistent(format!("pair {i} is routed to {tag} but tagged otherwise")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mono(n: usize) -> MonoCorpus {
        MonoCorpus::new((0..n).map(|i| vec![i as Token + 1]).collect()).unwrap()
    }

    fn pairs_for(ids: &[usize], tag: Provenance) -> BTreeMap<usize, SyntheticPair> {
        ids.iter().map(|&i| (i, SyntheticPair::new(vec![i as Token], vec![i as Token + 1], tag).unwrap())).collect()
    }

    #[test]
    fn split_sizes() {
        assert_eq!(split_monolingual(&mono(10), 0.5, 1).unwrap().beam_ids.len(), 5);
        assert_eq!(split_monolingual(&mono(7), 0.5, 1).unwrap().beam_ids.len(), 3);
        let p = split_monolingual(&mono(9), 0.0, 4).unwrap();
        assert!(p.beam_ids.is_empty());
        assert_eq!(p.sampling_ids.len(), 9);
        assert_eq!(split_monolingual(&mono(9), 1.0, 4).unwrap().beam_ids.len(), 9);
    }

    #[test]
    fn split_errors() {
        assert!(split_indices(0, 0.5, 1).is_err());
        assert!(split_monolingual(&mono(3), 1.5, 1).is_err());
        assert!(split_monolingual(&mono(3), -0.5, 1).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let m = mono(50);
        assert_eq!(split_monolingual(&m, 0.5, 7).unwrap(), split_monolingual(&m, 0.5, 7).unwrap());
        assert_ne!(split_monolingual(&m, 0.5, 7).unwrap().beam_ids, split_monolingual(&m, 0.5, 8).unwrap().beam_ids);
    }

    #[test]
    fn assembly_keeps_order_and_tags() {
        let plan = split_monolingual(&mono(10), 0.5, 3).unwrap();
        let mixed = assemble_mixed_corpus(
            &plan,
            pairs_for(&plan.beam_ids, Provenance::Beam),
            pairs_for(&plan.sampling_ids, Provenance::Sampling),
        )
        .unwrap();
        assert_eq!(mixed.pairs.len(), 10);
        let beam = mixed.pairs.iter().filter(|p| p.provenance == Provenance::Beam).count();
        assert_eq!(beam, 5);
        let routes = plan.routes();
        for (i, p) in mixed.pairs.iter().enumerate() {
            assert_eq!(p.source, vec![i as Token]);
            assert_eq!(routes[i], p.provenance == Provenance::Beam);
        }
    }

    #[test]
    fn full_beam_boundary() {
        let plan = split_monolingual(&mono(6), 1.0, 3).unwrap();
        let mixed = assemble_mixed_corpus(&plan, pairs_for(&plan.beam_ids, Provenance::Beam), BTreeMap::new()).unwrap();
        assert!(mixed.pairs.iter().all(|p| p.provenance == Provenance::Beam));
    }

    #[test]
    fn assembly_detects_inconsistencies() {
        let plan = split_monolingual(&mono(6), 0.5, 3).unwrap();
        let beam = pairs_for(&plan.beam_ids, Provenance::Beam);
        let sampling = pairs_for(&plan.sampling_ids, Provenance::Sampling);

        let mut missing = sampling.clone();
        missing.pop_first();
        assert!(matches!(assemble_mixed_corpus(&plan, beam.clone(), missing), Err(Error::Inconsistent(_))));

        let mut extra = beam.clone();
        extra.insert(plan.sampling_ids[0], SyntheticPair::new(vec![1], vec![1], Provenance::Beam).unwrap());
        assert!(assemble_mixed_corpus(&plan, extra, sampling.clone()).is_err());

        let mistagged = pairs_for(&plan.beam_ids, Provenance::Sampling);
        assert!(assemble_mixed_corpus(&plan, mistagged, sampling).is_err());
    }

    #[test]
    fn manifest_lists_counts() {
        let plan = split_monolingual(&mono(10), 0.5, 7).unwrap();
        assert_eq!(plan.manifest(), "gamma=0.5\nseed=7\nk=5\nbeam=5\nsampling=5\ntotal=10\n");
    }

    proptest! {
        #[test]
        fn split_partitions_indices(n in 1usize..200, gamma in 0.0f64..=1.0, seed in any::<u64>()) {
            let plan = split_indices(n, gamma, seed).unwrap();
            prop_assert_eq!(plan.beam_ids.len(), (gamma * n as f64).floor() as usize);
            let mut all: Vec<usize> = plan.beam_ids.iter().chain(&plan.sampling_ids).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
