use crate::error::{invalid, Result};
use crate::Token;

/// Sentence pairs with equal lengths per pair (toy constraint).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    pairs: Vec<(Vec<Token>, Vec<Token>)>,
    source_vocab: u32,
    target_vocab: u32,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(Vec<Token>, Vec<Token>)>, source_vocab: u32, target_vocab: u32) -> Result<Self> {
        if pairs.is_empty() {
            return Err(invalid("parallel corpus is empty"));
        }
        for (i, (src, tgt)) in pairs.iter().enumerate() {
            if src.len() != tgt.len() {
                return Err(invalid(format!(
                    "pair {i}: source length {} differs from target length {}",
                    src.len(),
                    tgt.len()
                )));
            }
            if src.is_empty() {
                return Err(invalid(format!("pair {i} is empty")));
            }
            if src.iter().any(|&t| t >= source_vocab) || tgt.iter().any(|&t| t >= target_vocab) {
                return Err(invalid(format!("pair {i} has a token outside the vocabulary")));
            }
        }
        Ok(Self { pairs, source_vocab, target_vocab })
    }

    /// Vocabulary sizes inferred as one past the largest token on each side.
    pub fn infer_vocab(pairs: Vec<(Vec<Token>, Vec<Token>)>) -> Result<Self> {
        let sv = pairs.iter().flat_map(|p| p.0.iter().copied()).max().map_or(0, |m| m + 1);
        let tv = pairs.iter().flat_map(|p| p.1.iter().copied()).max().map_or(0, |m| m + 1);
        Self::new(pairs, sv, tv)
    }

    pub fn pairs(&self) -> &[(Vec<Token>, Vec<Token>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_vocab(&self) -> u32 {
        self.source_vocab
    }

    pub fn target_vocab(&self) -> u32 {
        self.target_vocab
    }

    pub fn sources(&self) -> Vec<Vec<Token>> {
        self.pairs.iter().map(|p| p.0.clone()).collect()
    }

    pub fn targets(&self) -> Vec<Vec<Token>> {
        self.pairs.iter().map(|p| p.1.clone()).collect()
    }
}

/// Target-language monolingual sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoCorpus {
    sentences: Vec<Vec<Token>>,
}

impl MonoCorpus {
    pub fn new(sentences: Vec<Vec<Token>>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(invalid("monolingual corpus is empty"));
        }
        if let Some(i) = sentences.iter().position(Vec::is_empty) {
            return Err(invalid(format!("sentence {i} is empty")));
        }
        Ok(Self { sentences })
    }

    pub fn sentences(&self) -> &[Vec<Token>] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}
