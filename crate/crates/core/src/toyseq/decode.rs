use std::cmp::Ordering;

use rand::Rng;

use super::{sample_categorical, ChannelModel, NGramLm, BOS};
use crate::error::{invalid, Result};
use crate::scoring::{Candidate, CandidateSet};
use crate::Token;

pub const DEFAULT_BEAM_SIZE: usize = 5;

struct Hyp {
    tokens: Vec<Token>,
    score: f64,
}

/// Higher score first, then lexicographically smaller token ids.
fn rank(a: &Hyp, b: &Hyp) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Left-to-right beam search without length penalty. Output length equals
/// input length.
pub fn beam_decode(model: &ChannelModel, input: &[Token], beam_size: usize) -> Result<Vec<Token>> {
    if beam_size < 1 {
        return Err(invalid("beam size must be at least 1"));
    }
    let mut beam = vec![Hyp { tokens: Vec::with_capacity(input.len()), score: 0.0 }];
    for &x in input {
        let mut expanded = Vec::with_capacity(beam.len() * model.output_vocab() as usize);
        for hyp in &beam {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let dist = model.conditional(prev, x);
            for (o, p) in dist.iter().enumerate() {
                let mut tokens = hyp.tokens.clone();
                tokens.push(o as Token);
                expanded.push(Hyp { tokens, score: hyp.score + p.ln() });
            }
        }
        expanded.sort_by(rank);
        expanded.truncate(beam_size);
        beam = expanded;
    }
    Ok(beam.swap_remove(0).tokens)
}

/// Ancestral sample: one token per position from the model's conditional.
pub fn sample_decode<R: Rng + ?Sized>(model: &ChannelModel, input: &[Token], rng: &mut R) -> Vec<Token> {
    let mut out = Vec::with_capacity(input.len());
    let mut prev = BOS;
    for &x in input {
        let o = sample_categorical(&model.conditional(prev, x), rng) as Token;
        out.push(o);
        prev = o;
    }
    out
}

/// `n` independent backward samples for target `y`, each annotated with its
/// backward log-likelihood and source-LM log-probability.
pub fn sample_candidate_set<R: Rng + ?Sized>(
    backward: &ChannelModel,
    lm: &NGramLm,
    target_id: u64,
    y: &[Token],
    n: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    if n < 2 {
        return Err(invalid(format!("candidate pool size must be at least 2, got {n}")));
    }
    let candidates = (0..n)
        .map(|_| {
            let x = sample_decode(backward, y, rng);
            let log_q = backward.score(&x, y)?;
            let log_lm = lm.score(&x)?;
            Candidate::new(x, log_q, log_lm)
        })
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::new(target_id, y.to_vec(), candidates)
}
