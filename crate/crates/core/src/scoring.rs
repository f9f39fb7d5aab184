//! Two-factor candidate scoring.
//!
//! Each back-translated candidate carries two log-domain estimates: its
//! backward-model log-likelihood (quality) and its source-LM minus
//! backward log-probability (importance). Both are length-normalized,
//! z-scored within the candidate pool, mixed with weight `gamma`, and
//! turned into a softmax distribution over the pool.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::sample_categorical;
use crate::Token;

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-12;

/// Default mixing weight for the Gamma score.
pub const DEFAULT_GAMMA: f64 = 0.2;

/// Default candidate pool size.
pub const DEFAULT_POOL_SIZE: usize = 50;

/// One back-translated hypothesis with its two log-probabilities (nats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tokens: Vec<Token>,
    pub log_q: f64,
    pub log_lm: f64,
}

impl Candidate {
    pub fn new(tokens: Vec<Token>, log_q: f64, log_lm: f64) -> Result<Self> {
        let c = Self { tokens, log_q, log_lm };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.log_q.is_finite() || !self.log_lm.is_finite() {
            return Err(invalid(format!(
                "candidate log-probabilities must be finite (log_q={}, log_lm={})",
                self.log_q, self.log_lm
            )));
        }
        Ok(())
    }

    /// Length used for normalization: tokens plus the end-of-sequence marker.
    pub fn length(&self) -> usize {
        self.tokens.len() + 1
    }
}

/// The candidate pool sampled for one target sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub target_id: u64,
    pub target_tokens: Vec<Token>,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn new(target_id: u64, target_tokens: Vec<Token>, candidates: Vec<Candidate>) -> Result<Self> {
        let set = Self { target_id, target_tokens, candidates };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.len() < 2 {
            return Err(invalid(format!(
                "candidate set {} has {} candidates, need at least 2",
                self.target_id,
                self.candidates.len()
            )));
        }
        self.candidates.iter().try_for_each(Candidate::validate)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    fn lengths(&self) -> Vec<usize> {
        self.candidates.iter().map(Candidate::length).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub gamma: f64,
    pub sigma_floor: f64,
}

impl GammaParams {
    pub fn new(gamma: f64) -> Result<Self> {
        let p = Self { gamma, sigma_floor: DEFAULT_SIGMA_FLOOR };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if self.sigma_floor.is_nan() || self.sigma_floor <= 0.0 {
            return Err(invalid(format!("sigma_floor must be positive, got {}", self.sigma_floor)));
        }
        Ok(())
    }
}

impl Default for GammaParams {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA, sigma_floor: DEFAULT_SIGMA_FLOOR }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedScores {
    pub values: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaDistribution {
    pub probs: Vec<f64>,
    /// Pre-softmax scores; `argmax` ranks on these.
    #[serde(skip)]
    logits: Vec<f64>,
}

impl GammaDistribution {
    /// Softmax over `gamma * importance + (1 - gamma) * quality`.
    pub fn combine(importance: &[f64], quality: &[f64], gamma: f64) -> Result<Self> {
        if importance.len() != quality.len() || importance.is_empty() {
            return Err(invalid("importance and quality scores must be non-empty and equally long"));
        }
        let logits: Vec<f64> =
            importance.iter().zip(quality).map(|(&imp, &q)| gamma * imp + (1.0 - gamma) * q).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs = exps.into_iter().map(|e| e / total).collect();
        Ok(Self { probs, logits })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the highest score, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let scores = if self.logits.len() == self.probs.len() { &self.logits } else { &self.probs };
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        best
    }

    /// Draws an index by inverse CDF on a single uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.probs, rng)
    }
}

/// Log-domain importance weight `log p(x) - log p(x|y)`.
pub fn log_importance(c: &Candidate) -> Result<f64> {
    c.validate()?;
    Ok(c.log_lm - c.log_q)
}

/// Length-normalizes each value, then z-scores against the pool mean and
/// sample standard deviation (N-1 divisor). A scale at or below
/// `sigma_floor` yields all zeros.
pub fn standardize(log_values: &[f64], lengths: &[usize], sigma_floor: f64) -> Result<StandardizedScores> {
    if log_values.len() != lengths.len() {
        return Err(invalid(format!("{} values but {} lengths", log_values.len(), lengths.len())));
    }
    if log_values.len() < 2 {
        return Err(invalid("standardization needs at least 2 values"));
    }
    if lengths.contains(&0) {
        return Err(invalid("lengths must be positive"));
    }
    if log_values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("values must be finite"));
    }
    let normalized: Vec<f64> = log_values.iter().zip(lengths).map(|(&v, &l)| v / l as f64).collect();
    let n = normalized.len() as f64;
    let mu = normalized.iter().sum::<f64>() / n;
    let var = normalized.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    let values = if sigma <= sigma_floor {
        vec![0.0; normalized.len()]
    } else {
        normalized.iter().map(|v| (v - mu) / sigma).collect()
    };
    Ok(StandardizedScores { values, mu, sigma })
}

pub fn gamma_distribution(set: &CandidateSet, params: &GammaParams) -> Result<GammaDistribution> {
    set.validate()?;
    params.validate()?;
    let lengths = set.lengths();
    let importance: Vec<f64> = set.candidates.iter().map(log_importance).collect::<Result<_>>()?;
    let quality: Vec<f64> = set.candidates.iter().map(|c| c.log_q).collect();
    let imp = standardize(&importance, &lengths, params.sigma_floor)?;
    let q = standardize(&quality, &lengths, params.sigma_floor)?;
    GammaDistribution::combine(&imp.values, &q.values, params.gamma)
}

/// Gamma selection: the candidate with the highest Gamma score.
pub fn gamma_select(set: &CandidateSet, params: &GammaParams) -> Result<usize> {
    Ok(gamma_distribution(set, params)?.argmax())
}

/// Gamma sampling: a candidate drawn from the Gamma distribution. Pass a
/// stream derived from `(seed, set.target_id)` for the determinism contract.
pub fn gamma_sample<R: Rng + ?Sized>(set: &CandidateSet, params: &GammaParams, rng: &mut R) -> Result<usize> {
    Ok(gamma_distribution(set, params)?.sample(rng))
}
