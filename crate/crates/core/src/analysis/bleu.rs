//! Corpus-level BLEU over token sequences.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{invalid, Result};

pub const DEFAULT_MAX_N: usize = 4;

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and hypothesis n-gram totals per order,
/// aggregated over the corpus, plus hypothesis and reference lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

pub fn bleu_stats<T: Eq + Hash>(hypotheses: &[Vec<T>], references: &[Vec<T>], max_n: usize) -> Result<BleuStats> {
    if hypotheses.len() != references.len() {
        return Err(invalid(format!("{} hypotheses but {} references", hypotheses.len(), references.len())));
    }
    if hypotheses.is_empty() {
        return Err(invalid("BLEU needs at least one sentence"));
    }
    if max_n == 0 {
        return Err(invalid("BLEU order must be at least 1"));
    }
    let mut stats = BleuStats { matches: vec![0; max_n], totals: vec![0; max_n], hyp_len: 0, ref_len: 0 };
    for (hyp, reference) in hypotheses.iter().zip(references) {
        stats.hyp_len += hyp.len() as u64;
        stats.ref_len += reference.len() as u64;
        for n in 1..=max_n {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            stats.totals[n - 1] += h.values().sum::<usize>() as u64;
            stats.matches[n - 1] += h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)) as u64).sum::<u64>();
        }
    }
    Ok(stats)
}

impl BleuStats {
    /// Geometric mean of modified precisions times the brevity penalty, on
    /// a 0-100 scale. An order with no matches contributes `1 / (2 * total)`
    /// (total floored at 1); no unigram matches at all scores 0.
    pub fn score(&self) -> f64 {
        if self.matches[0] == 0 || self.hyp_len == 0 {
            return 0.0;
        }
        let max_n = self.matches.len() as f64;
        let log_precision: f64 = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| if m > 0 { (m as f64 / t as f64).ln() } else { (1.0 / (2.0 * t.max(1) as f64)).ln() })
            .sum::<f64>()
            / max_n;
        let c = self.hyp_len as f64;
        let r = self.ref_len as f64;
        let log_bp = if c < r { 1.0 - r / c } else { 0.0 };
        100.0 * (log_precision + log_bp).exp()
    }
}

pub fn corpus_bleu<T: Eq + Hash>(hypotheses: &[Vec<T>], references: &[Vec<T>], max_n: usize) -> Result<f64> {
    Ok(bleu_stats(hypotheses, references, max_n)?.score())
}
