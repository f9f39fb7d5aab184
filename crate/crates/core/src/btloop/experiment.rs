use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::{synthesize_corpus, train_forward, BtStrategy, SynthesisOptions};
use crate::analysis::{
    corpus_bleu, corpus_importance_report, corpus_quality_report, sentence_representation_matrix, singular_spectrum,
    DEFAULT_MAX_N,
};
use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::toyseq::{
    beam_decode, generate_toy_task, train_channel, train_ngram_lm, ChannelModel, Direction, LmVocab, ToyTask,
    ToyTaskSpec, DEFAULT_ALPHA, DEFAULT_BEAM_SIZE, DEFAULT_ORDER,
};
use crate::Token;

/// Share of the bitext the weak backward model is trained on.
pub const WEAK_BITEXT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Task template; its seed is replaced by each run seed.
    pub task: ToyTaskSpec,
    pub strategies: Vec<BtStrategy>,
    pub seeds: Vec<u64>,
    pub beam_size: usize,
    pub alpha: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: ToyTaskSpec::default(),
            strategies: BtStrategy::standard_set(),
            seeds: vec![1, 2, 3, 4, 5],
            beam_size: DEFAULT_BEAM_SIZE,
            alpha: DEFAULT_ALPHA,
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse { line, message: format!("bad value '{v}' for '{key}'") })
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_value(line, key, s.trim())).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("experiment needs at least one strategy and one seed".into()));
        }
        if self.beam_size == 0 {
            return Err(Error::Config("beam size must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("smoothing alpha must be positive".into()));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        self.task.validate()
    }

    /// Reads `key = value` lines over the defaults; `#` starts a comment.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or_default().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line, message: "expected 'key = value'".into() })?;
            let t = &mut c.task;
            match key {
                "source_vocab" => t.source_vocab = parse_value(line, key, value)?,
                "target_vocab" => t.target_vocab = parse_value(line, key, value)?,
                "min_len" => t.min_len = parse_value(line, key, value)?,
                "max_len" => t.max_len = parse_value(line, key, value)?,
                "channel_noise" => t.channel_noise = parse_value(line, key, value)?,
                "bitext_size" => t.bitext_size = parse_value(line, key, value)?,
                "mono_size" => t.mono_size = parse_value(line, key, value)?,
                "test_size" => t.test_size = parse_value(line, key, value)?,
                "lm_concentration" => t.lm_concentration = parse_value(line, key, value)?,
                "strategies" => c.strategies = parse_list(line, key, value)?,
                "seeds" => c.seeds = parse_list(line, key, value)?,
                "beam_size" => c.beam_size = parse_value(line, key, value)?,
                "alpha" => c.alpha = parse_value(line, key, value)?,
                _ => return Err(Error::Parse { line, message: format!("unknown key '{key}'") }),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv_text(&self) -> String {
        let t = &self.task;
        let join = |v: Vec<String>| v.join(",");
        format!(
            "source_vocab = {}\ntarget_vocab = {}\nmin_len = {}\nmax_len = {}\nchannel_noise = {}\n\
             bitext_size = {}\nmono_size = {}\ntest_size = {}\nlm_concentration = {}\n\
             strategies = {}\nseeds = {}\nbeam_size = {}\nalpha = {}\n",
            t.source_vocab,
            t.target_vocab,
            t.min_len,
            t.max_len,
            t.channel_noise,
            t.bitext_size,
            t.mono_size,
            t.test_size,
            t.lm_concentration,
            join(self.strategies.iter().map(ToString::to_string).collect()),
            join(self.seeds.iter().map(ToString::to_string).collect()),
            self.beam_size,
            self.alpha
        )
    }
}

/// Diagnostics of one synthetic corpus. Quality and importance use the
/// full-bitext backward model for every strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticDiagnostics {
    pub mean_log_q: f64,
    pub mean_log_importance: f64,
    pub bleu_vs_reference: f64,
    /// Mean `log p(x) + log p(y|x)` under the generating models.
    pub mean_truth_log_joint: f64,
    pub mean_source_length: f64,
    pub spectral_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentCell {
    pub strategy: String,
    pub seed: u64,
    pub test_bleu: f64,
    /// Absent for the bitext-only baseline.
    pub synthetic: Option<SyntheticDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentReport {
    pub fn cell(&self, strategy: &BtStrategy, seed: u64) -> Option<&ExperimentCell> {
        let label = strategy.to_string();
        self.cells.iter().find(|c| c.strategy == label && c.seed == seed)
    }

    pub fn to_jsonl(&self) -> String {
        self.cells.iter().map(|c| serde_json::to_string(c).expect("cells serialize") + "\n").collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<20} {:>6} {:>9} {:>10} {:>10} {:>9} {:>11} {:>8} {:>8}\n",
            "strategy", "seed", "test_bleu", "log_q", "log_imp", "syn_bleu", "truth_joint", "src_len", "entropy"
        );
        for c in &self.cells {
            let _ = write!(out, "{:<20} {:>6} {:>9.3}", c.strategy, c.seed, c.test_bleu);
            match &c.synthetic {
                Some(d) => {
                    let _ = writeln!(
                        out,
                        " {:>10.4} {:>10.4} {:>9.3} {:>11.4} {:>8.3} {:>8.4}",
                        d.mean_log_q,
                        d.mean_log_importance,
                        d.bleu_vs_reference,
                        d.mean_truth_log_joint,
                        d.mean_source_length,
                        d.spectral_entropy
                    );
                }
                None => {
                    let _ = writeln!(out, " {:>10} {:>10} {:>9} {:>11} {:>8} {:>8}", "-", "-", "-", "-", "-", "-");
                }
            }
        }
        out
    }
}

/// Models shared by every strategy of one seed.
struct SeedContext {
    task: ToyTask,
    backward: ChannelModel,
    weak_backward: ChannelModel,
    lm: crate::toyseq::NGramLm,
}

fn weak_bitext(bitext: &ParallelCorpus, seed: u64) -> Result<ParallelCorpus> {
    let n = ((bitext.len() as f64 * WEAK_BITEXT_FRACTION).floor() as usize).max(1);
    let mut ids: Vec<usize> = (0..bitext.len()).collect();
    ids.shuffle(&mut stream(seed, Purpose::Subsample, 0));
    ids.truncate(n);
    ids.sort_unstable();
    let pairs = ids.iter().map(|&i| bitext.pairs()[i].clone()).collect();
    ParallelCorpus::new(pairs, bitext.source_vocab(), bitext.target_vocab())
}

fn seed_context(config: &ExperimentConfig, seed: u64) -> Result<SeedContext> {
    let task = generate_toy_task(&ToyTaskSpec { seed, ..config.task.clone() })?;
    let backward = train_channel(&task.bitext, Direction::TargetToSource, config.alpha)?;
    let weak_backward = train_channel(&weak_bitext(&task.bitext, seed)?, Direction::TargetToSource, config.alpha)?;
    let lm = train_ngram_lm(
        &task.bitext.sources(),
        LmVocab::with_markers(task.spec.source_vocab),
        DEFAULT_ORDER,
        config.alpha,
    )?;
    Ok(SeedContext { task, backward, weak_backward, lm })
}

fn run_cell(config: &ExperimentConfig, ctx: &SeedContext, strategy: &BtStrategy, seed: u64) -> Result<ExperimentCell> {
    let task = &ctx.task;
    let proposal = if *strategy == BtStrategy::BeamWeak { &ctx.weak_backward } else { &ctx.backward };
    let opts = SynthesisOptions { seed, beam_size: config.beam_size };
    let synthetic = synthesize_corpus(&task.mono, proposal, &ctx.lm, strategy, &opts)?;
    let forward = train_forward(&task.bitext, &synthetic, config.alpha)?;

    let mut hyps = Vec::with_capacity(task.test.len());
    for (x, _) in task.test.pairs() {
        hyps.push(beam_decode(&forward, x, config.beam_size)?);
    }
    let refs: Vec<Vec<Token>> = task.test.targets();
    let test_bleu = corpus_bleu(&hyps, &refs, DEFAULT_MAX_N)?;

    let diagnostics = if synthetic.is_empty() {
        None
    } else {
        let quality = corpus_quality_report(&synthetic, &ctx.backward, Some(&task.mono_sources))?;
        let importance = corpus_importance_report(&synthetic, &ctx.lm, &ctx.backward)?;
        let mut truth = 0.0;
        for p in &synthetic {
            truth += task.truth_lm.score(&p.source)? + task.truth_channel.score(&p.target, &p.source)?;
        }
        let sources: Vec<Vec<Token>> = synthetic.iter().map(|p| p.source.clone()).collect();
        let n = synthetic.len() as f64;
        let matrix = sentence_representation_matrix(&sources, task.spec.source_vocab)?;
        Some(SyntheticDiagnostics {
            mean_log_q: quality.mean_log_q,
            mean_log_importance: importance.mean_log_importance,
            bleu_vs_reference: quality.bleu_vs_reference.unwrap_or_default(),
            mean_truth_log_joint: truth / n,
            mean_source_length: sources.iter().map(Vec::len).sum::<usize>() as f64 / n,
            spectral_entropy: singular_spectrum(&matrix)?.normalized_spectral_entropy,
        })
    };
    Ok(ExperimentCell { strategy: strategy.to_string(), seed, test_bleu, synthetic: diagnostics })
}

fn with_context(strategy: &BtStrategy, seed: u64, e: Error) -> Error {
    match e {
        Error::Io(_) => e,
        other => Error::Inconsistent(format!("strategy {strategy}, seed {seed}: {other}")),
    }
}

/// Runs every (strategy, seed) cell; the bitext-only baseline is always
/// included. Cells come out grouped by seed, in configuration order.
pub fn run_bt_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut strategies = config.strategies.clone();
    if !strategies.contains(&BtStrategy::None) {
        strategies.insert(0, BtStrategy::None);
    }
    let per_seed: Vec<Result<Vec<ExperimentCell>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| {
                let strategies = &strategies;
                scope.spawn(move || {
                    let ctx = seed_context(config, seed)?;
                    strategies
                        .iter()
                        .map(|s| run_cell(config, &ctx, s, seed).map_err(|e| with_context(s, seed, e)))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("experiment worker panicked")).collect()
    });
    let mut cells = Vec::new();
    for r in per_seed {
        cells.extend(r?);
    }
    Ok(ExperimentReport { cells })
}
