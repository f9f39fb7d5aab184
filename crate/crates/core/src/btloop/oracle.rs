//! Brute-force references for the marginal likelihood of a target sentence
//! and its Jensen lower bound, plus the importance-sampling estimate of that
//! bound driven by a backward model.
//!
//! The channel models preserve length, so every sum runs over source
//! sentences of the target's length under the length-conditioned prior
//! `p(x | |x| = L) = p(x) / Z_L`.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::toyseq::{sample_decode, ChannelModel, Direction, NGramLm};
use crate::Token;

/// Largest number of source sentences the enumerating oracles will visit.
pub const MAX_ENUMERATION: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub y: Vec<Token>,
    pub exact_log_marginal: f64,
    pub jensen_bound: f64,
    pub mc_estimate: f64,
    pub mc_std_error: f64,
    /// Spread of a single-sample estimate.
    pub mc_sample_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub sample_sd: f64,
}

fn check_forward(lm: &NGramLm, forward: &ChannelModel, y: &[Token]) -> Result<()> {
    if y.is_empty() {
        return Err(invalid("oracle target must be non-empty"));
    }
    if forward.direction() != Direction::SourceToTarget {
        return Err(invalid("oracle needs a source-to-target forward channel"));
    }
    if forward.input_vocab() != lm.vocab().words {
        return Err(invalid("LM and forward channel disagree on the source vocabulary"));
    }
    Ok(())
}

/// `(log p(x | L), log p(y | x))` for every source sentence of length `|y|`.
fn enumerate_terms(lm: &NGramLm, forward: &ChannelModel, y: &[Token]) -> Result<Vec<(f64, f64)>> {
    check_forward(lm, forward, y)?;
    let v = lm.vocab().words;
    let len = y.len();
    let terms =
        (v as u128).checked_pow(len as u32).filter(|&t| t <= MAX_ENUMERATION).ok_or(Error::EnumerationTooLarge {
            terms: (v as u128).saturating_pow(len.min(u32::MAX as usize) as u32),
            limit: MAX_ENUMERATION,
        })?;
    let log_z = lm.log_length_mass(len);
    let mut x = vec![0 as Token; len];
    let mut out = Vec::with_capacity(terms as usize);
    loop {
        out.push((lm.score(&x)? - log_z, forward.score(y, &x)?));
        let Some(pos) = x.iter().rposition(|&t| t + 1 < v) else { break };
        x[pos] += 1;
        x[pos + 1..].fill(0);
    }
    Ok(out)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log sum_x p(x | L) p(y | x)`.
pub fn exact_marginal(lm: &NGramLm, forward: &ChannelModel, y: &[Token]) -> Result<f64> {
    let terms = enumerate_terms(lm, forward, y)?;
    Ok(log_sum_exp(terms.iter().map(|(p, c)| p + c)))
}

/// `sum_x p(x | L) log p(y | x)`.
pub fn jensen_lower_bound(lm: &NGramLm, forward: &ChannelModel, y: &[Token]) -> Result<f64> {
    let terms = enumerate_terms(lm, forward, y)?;
    Ok(terms.iter().map(|(p, c)| p.exp() * c).sum())
}

/// Mean and standard error of `w(x) log p(y | x)` with `x ~ q(x | y)` and
/// `w = p(x | L) / q(x | y)`.
pub fn importance_mc_estimate<R: Rng + ?Sized>(
    lm: &NGramLm,
    backward: &ChannelModel,
    forward: &ChannelModel,
    y: &[Token],
    num_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if num_samples < 2 {
        return Err(invalid(format!("need at least 2 samples, got {num_samples}")));
    }
    check_forward(lm, forward, y)?;
    if backward.direction() != Direction::TargetToSource {
        return Err(invalid("importance proposal must be a target-to-source model"));
    }
    let log_z = lm.log_length_mass(y.len());
    // Welford running moments
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=num_samples {
        let x = sample_decode(backward, y, rng);
        let log_w = lm.score(&x)? - log_z - backward.score(&x, y)?;
        let v = log_w.exp() * forward.score(y, &x)?;
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    let n = num_samples as f64;
    let sample_sd = (m2 / (n - 1.0)).sqrt();
    Ok(McEstimate { mean, std_error: sample_sd / n.sqrt(), sample_sd })
}

pub fn oracle_for_target<R: Rng + ?Sized>(
    lm: &NGramLm,
    backward: &ChannelModel,
    forward: &ChannelModel,
    y: &[Token],
    num_samples: usize,
    rng: &mut R,
) -> Result<OracleResult> {
    let mc = importance_mc_estimate(lm, backward, forward, y, num_samples, rng)?;
    Ok(OracleResult {
        y: y.to_vec(),
        exact_log_marginal: exact_marginal(lm, forward, y)?,
        jensen_bound: jensen_lower_bound(lm, forward, y)?,
        mc_estimate: mc.mean,
        mc_std_error: mc.std_error,
        mc_sample_sd: mc.sample_sd,
    })
}
