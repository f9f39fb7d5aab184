//! Corpus diagnostics: BLEU, quality and importance reports, length and
//! token-frequency profiles, and singular-value spectra of sentence vectors.

mod bleu;
mod spectrum;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

pub use bleu::{bleu_stats, corpus_bleu, BleuStats, DEFAULT_MAX_N};
pub use spectrum::{singular_spectrum, Matrix, SpectrumReport, JACOBI_TOL, MAX_SWEEPS};

use crate::error::{invalid, Result};
use crate::manipulate::SyntheticPair;
use crate::toyseq::{ChannelModel, NGramLm};
use crate::Token;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    /// Mean backward log-likelihood per sentence, nats.
    pub mean_log_q: f64,
    pub bleu_vs_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    /// Mean per-sentence `log p(x) - log p(x|y)`, nats.
    pub mean_log_importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusProfile {
    /// Sentence length to number of sentences.
    pub length_histogram: BTreeMap<usize, usize>,
    /// Power-of-two frequency bucket (lower edge) to number of token types.
    pub token_frequency_histogram: BTreeMap<u64, usize>,
    pub vocab_size: usize,
    pub sentences: usize,
    pub tokens: u64,
}

impl CorpusProfile {
    pub fn mean_length(&self) -> f64 {
        self.tokens as f64 / self.sentences as f64
    }
}

fn non_empty(synthetic: &[SyntheticPair]) -> Result<()> {
    if synthetic.is_empty() {
        return Err(invalid("report over an empty synthetic corpus"));
    }
    Ok(())
}

pub fn corpus_quality_report(
    synthetic: &[SyntheticPair],
    backward: &ChannelModel,
    references: Option<&[Vec<Token>]>,
) -> Result<QualityReport> {
    non_empty(synthetic)?;
    let total: f64 = synthetic.iter().map(|p| backward.score(&p.source, &p.target)).sum::<Result<f64>>()?;
    let bleu_vs_reference = match references {
        Some(refs) => {
            let hyps: Vec<Vec<Token>> = synthetic.iter().map(|p| p.source.clone()).collect();
            Some(corpus_bleu(&hyps, refs, DEFAULT_MAX_N)?)
        }
        None => None,
    };
    Ok(QualityReport { mean_log_q: total / synthetic.len() as f64, bleu_vs_reference })
}

pub fn corpus_importance_report(
    synthetic: &[SyntheticPair],
    lm: &NGramLm,
    backward: &ChannelModel,
) -> Result<ImportanceReport> {
    non_empty(synthetic)?;
    let total: f64 = synthetic
        .iter()
        .map(|p| Ok(lm.score(&p.source)? - backward.score(&p.source, &p.target)?))
        .sum::<Result<f64>>()?;
    Ok(ImportanceReport { mean_log_importance: total / synthetic.len() as f64 })
}

/// Lower edge of the power-of-two bucket holding `freq` (`freq >= 1`).
pub fn frequency_bucket(freq: u64) -> u64 {
    1 << (63 - freq.leading_zeros())
}

pub fn corpus_profile(corpus: &[Vec<Token>]) -> Result<CorpusProfile> {
    if corpus.is_empty() {
        return Err(invalid("profile of an empty corpus"));
    }
    let mut length_histogram = BTreeMap::new();
    let mut freq: HashMap<Token, u64> = HashMap::new();
    for s in corpus {
        *length_histogram.entry(s.len()).or_insert(0) += 1;
        for &t in s {
            *freq.entry(t).or_insert(0) += 1;
        }
    }
    let mut token_frequency_histogram = BTreeMap::new();
    for &f in freq.values() {
        *token_frequency_histogram.entry(frequency_bucket(f)).or_insert(0) += 1;
    }
    Ok(CorpusProfile {
        length_histogram,
        token_frequency_histogram,
        vocab_size: freq.len(),
        sentences: corpus.len(),
        tokens: freq.values().sum(),
    })
}

/// One L2-normalized bag-of-tokens row per sentence.
pub fn sentence_representation_matrix(corpus: &[Vec<Token>], vocab_size: u32) -> Result<Matrix> {
    if corpus.is_empty() {
        return Err(invalid("representation of an empty corpus"));
    }
    let mut m = Matrix::zeros(corpus.len(), vocab_size as usize);
    for (r, s) in corpus.iter().enumerate() {
        if s.is_empty() {
            return Err(invalid(format!("sentence {r} is empty")));
        }
        let mut counts = vec![0.0; vocab_size as usize];
        for &t in s {
            *counts
                .get_mut(t as usize)
                .ok_or_else(|| invalid(format!("token {t} outside vocabulary of {vocab_size}")))? += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        for (c, v) in counts.iter().enumerate() {
            m.set(r, c, v / norm);
        }
    }
    Ok(m)
}
