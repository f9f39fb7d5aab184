//! Synthetic language pair: a Dirichlet-random bigram source LM and a
//! token-substitution channel with a dominant one-to-one mapping.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{ChannelModel, Direction, LmVocab, NGramLm, BOS};
use crate::corpus::{MonoCorpus, ParallelCorpus};
use crate::error::{invalid, Result};
use crate::rng::{sample_categorical, stream, Purpose};
use crate::Token;

const MAX_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTaskSpec {
    pub source_vocab: u32,
    pub target_vocab: u32,
    pub min_len: usize,
    pub max_len: usize,
    pub channel_noise: f64,
    pub bitext_size: usize,
    pub mono_size: usize,
    pub test_size: usize,
    /// Symmetric Dirichlet concentration for the source LM's word rows.
    pub lm_concentration: f64,
    pub seed: u64,
}

impl Default for ToyTaskSpec {
    fn default() -> Self {
        Self {
            source_vocab: 20,
            target_vocab: 20,
            min_len: 4,
            max_len: 12,
            channel_noise: 0.15,
            bitext_size: 300,
            mono_size: 300,
            test_size: 300,
            lm_concentration: 1.0,
            seed: 1,
        }
    }
}

impl ToyTaskSpec {
    /// Four source words, sentences of at most four tokens: small enough to
    /// enumerate every source sentence.
    pub fn tiny(seed: u64) -> Self {
        Self {
            source_vocab: 4,
            target_vocab: 4,
            min_len: 1,
            max_len: 4,
            channel_noise: 0.2,
            bitext_size: 400,
            mono_size: 100,
            test_size: 100,
            lm_concentration: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_vocab == 0 || self.target_vocab == 0 {
            return Err(invalid("vocabulary sizes must be positive"));
        }
        if self.target_vocab < self.source_vocab {
            return Err(invalid("target vocabulary must be at least as large as the source vocabulary"));
        }
        if self.target_vocab < 2 {
            return Err(invalid("target vocabulary needs at least 2 words for a noisy channel"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(invalid(format!(
                "length range [{}, {}] must satisfy 1 <= min <= max",
                self.min_len, self.max_len
            )));
        }
        if !(self.channel_noise > 0.0 && self.channel_noise < 1.0) {
            return Err(invalid(format!("channel noise must lie in (0, 1), got {}", self.channel_noise)));
        }
        if self.bitext_size == 0 || self.mono_size == 0 || self.test_size == 0 {
            return Err(invalid("corpus sizes must be positive"));
        }
        if !(self.lm_concentration > 0.0 && self.lm_concentration.is_finite()) {
            return Err(invalid("Dirichlet concentration must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ToyTask {
    pub spec: ToyTaskSpec,
    pub bitext: ParallelCorpus,
    pub mono: MonoCorpus,
    /// True sources behind each monolingual sentence, for reference BLEU.
    pub mono_sources: Vec<Vec<Token>>,
    pub test: ParallelCorpus,
    pub truth_lm: NGramLm,
    /// Forward (source to target) data-generating channel.
    pub truth_channel: ChannelModel,
    /// Dominant target image of each source word.
    pub mapping: Vec<Token>,
}

pub fn generate_toy_task(spec: &ToyTaskSpec) -> Result<ToyTask> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Purpose::TaskTruth, 0);
    let words = spec.source_vocab;

    // expected sentence length sits mid-range
    let mid = (spec.min_len + spec.max_len) as f64 / 2.0;
    let p_eos = 1.0 / (mid + 1.0);
    let gamma = Gamma::new(spec.lm_concentration, 1.0).map_err(|e| invalid(e.to_string()))?;
    let vocab = LmVocab { words, unk: false, eos: true };
    let mut rows = BTreeMap::new();
    for ctx in std::iter::once(BOS).chain(0..words) {
        let draws: Vec<f64> = (0..words).map(|_| gamma.sample(&mut rng).max(f64::MIN_POSITIVE)).collect();
        let total: f64 = draws.iter().sum();
        let mut row: Vec<f64> = draws.iter().map(|d| (1.0 - p_eos) * d / total).collect();
        row.push(p_eos);
        rows.insert(vec![ctx], row);
    }
    let truth_lm = NGramLm::explicit(2, vocab, rows)?;

    let mut images: Vec<Token> = (0..spec.target_vocab).collect();
    images.shuffle(&mut rng);
    let mapping: Vec<Token> = images[..words as usize].to_vec();
    let tv = spec.target_vocab;
    let off = spec.channel_noise / (tv - 1) as f64;
    let truth_channel = ChannelModel::explicit(Direction::SourceToTarget, words, tv, |_, input| {
        if input >= words {
            return vec![1.0 / tv as f64; tv as usize];
        }
        let mut row = vec![off; tv as usize];
        row[mapping[input as usize] as usize] = 1.0 - spec.channel_noise;
        row
    })?;

    let draw_pairs = |purpose: Purpose, n: usize| -> Result<Vec<(Vec<Token>, Vec<Token>)>> {
        let mut rng = stream(spec.seed, purpose, 0);
        (0..n)
            .map(|_| {
                let x = sample_source(&truth_lm, spec, &mut rng)?;
                let y = x
                    .iter()
                    .map(|&t| sample_categorical(&truth_channel.conditional(BOS, t), &mut rng) as Token)
                    .collect();
                Ok((x, y))
            })
            .collect()
    };

    let bitext = ParallelCorpus::new(draw_pairs(Purpose::TaskBitext, spec.bitext_size)?, words, tv)?;
    let mono_pairs = draw_pairs(Purpose::TaskMono, spec.mono_size)?;
    let test = ParallelCorpus::new(draw_pairs(Purpose::TaskTest, spec.test_size)?, words, tv)?;
    let (mono_sources, mono_targets): (Vec<_>, Vec<_>) = mono_pairs.into_iter().unzip();

    Ok(ToyTask {
        spec: spec.clone(),
        bitext,
        mono: MonoCorpus::new(mono_targets)?,
        mono_sources,
        test,
        truth_lm,
        truth_channel,
        mapping,
    })
}

/// Rejection-samples a sentence whose length falls in the spec's range.
fn sample_source<R: Rng + ?Sized>(lm: &NGramLm, spec: &ToyTaskSpec, rng: &mut R) -> Result<Vec<Token>> {
    for _ in 0..MAX_ATTEMPTS {
        if let Some(x) = lm.sample(rng, spec.max_len) {
            if x.len() >= spec.min_len {
                return Ok(x);
            }
        }
    }
    Err(invalid("could not sample a sentence within the length range"))
}
