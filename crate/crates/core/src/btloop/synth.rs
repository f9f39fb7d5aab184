use std::collections::BTreeMap;

use super::BtStrategy;
use crate::corpus::{MonoCorpus, ParallelCorpus};
use crate::error::{invalid, Result};
use crate::manipulate::{assemble_mixed_corpus, split_monolingual, Provenance, SyntheticPair};
use crate::rng::{stream, Purpose};
use crate::scoring::{gamma_sample, gamma_select, GammaParams};
use crate::toyseq::{
    beam_decode, sample_candidate_set, sample_decode, train_channel_on, ChannelModel, Direction, NGramLm,
    DEFAULT_BEAM_SIZE,
};
use crate::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisOptions {
    pub seed: u64,
    pub beam_size: usize,
}

impl SynthesisOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, beam_size: DEFAULT_BEAM_SIZE }
    }
}

fn beam_pair(backward: &ChannelModel, y: &[Token], beam_size: usize) -> Result<SyntheticPair> {
    SyntheticPair::new(beam_decode(backward, y, beam_size)?, y.to_vec(), Provenance::Beam)
}

/// Sentence `i` always draws from the same stream, so the sampled half of a
/// mixed corpus matches a pure sampling run.
fn sampling_pair(backward: &ChannelModel, y: &[Token], seed: u64, i: usize) -> Result<SyntheticPair> {
    let x = sample_decode(backward, y, &mut stream(seed, Purpose::Sampling, i as u64));
    SyntheticPair::new(x, y.to_vec(), Provenance::Sampling)
}

/// Back-translates every sentence of `mono` with one synthetic source.
/// `BtStrategy::None` yields an empty corpus; for `BeamWeak` pass the weak
/// backward model.
pub fn synthesize_corpus(
    mono: &MonoCorpus,
    backward: &ChannelModel,
    lm: &NGramLm,
    strategy: &BtStrategy,
    opts: &SynthesisOptions,
) -> Result<Vec<SyntheticPair>> {
    strategy.validate()?;
    if backward.direction() != Direction::TargetToSource {
        return Err(invalid("synthesis needs a target-to-source backward model"));
    }
    let ys = mono.sentences();
    match *strategy {
        BtStrategy::None => Ok(Vec::new()),
        BtStrategy::Beam | BtStrategy::BeamWeak => ys.iter().map(|y| beam_pair(backward, y, opts.beam_size)).collect(),
        BtStrategy::Sampling => ys.iter().enumerate().map(|(i, y)| sampling_pair(backward, y, opts.seed, i)).collect(),
        BtStrategy::DataManipulation { gamma, seed } => {
            let plan = split_monolingual(mono, gamma, seed.unwrap_or(opts.seed))?;
            let beam = plan
                .beam_ids
                .iter()
                .map(|&i| Ok((i, beam_pair(backward, &ys[i], opts.beam_size)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let sampling = plan
                .sampling_ids
                .iter()
                .map(|&i| Ok((i, sampling_pair(backward, &ys[i], opts.seed, i)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(assemble_mixed_corpus(&plan, beam, sampling)?.pairs)
        }
        BtStrategy::GammaSelect { gamma, n } | BtStrategy::GammaSample { gamma, n } => {
            let params = GammaParams::new(gamma)?;
            let sample = matches!(strategy, BtStrategy::GammaSample { .. });
            ys.iter()
                .enumerate()
                .map(|(i, y)| {
                    let id = i as u64;
                    let mut rng = stream(opts.seed, Purpose::Candidates, id);
                    let set = sample_candidate_set(backward, lm, id, y, n, &mut rng)?;
                    let (pick, tag) = if sample {
                        let mut rng = stream(opts.seed, Purpose::GammaSample, id);
                        (gamma_sample(&set, &params, &mut rng)?, Provenance::GammaSample)
                    } else {
                        (gamma_select(&set, &params)?, Provenance::GammaSelect)
                    };
                    SyntheticPair::new(set.candidates[pick].tokens.clone(), y.clone(), tag)
                })
                .collect()
        }
    }
}

/// Forward model on bitext plus synthetic pairs, concatenated without
/// upsampling.
pub fn train_forward(
    bitext: &ParallelCorpus,
    synthetic: &[SyntheticPair],
    alpha: f64,
) -> Result<crate::toyseq::ChannelModel> {
    let pairs = bitext
        .pairs()
        .iter()
        .map(|(s, t)| (s.as_slice(), t.as_slice()))
        .chain(synthetic.iter().map(|p| (p.source.as_slice(), p.target.as_slice())));
    train_channel_on(pairs, bitext.source_vocab(), bitext.target_vocab(), Direction::SourceToTarget, alpha)
}
