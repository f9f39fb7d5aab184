//! Desk-scale sequence models: toy task generation, n-gram source LMs,
//! Markov channel translation models and their decoders.

mod channel;
mod decode;
mod ngram;
mod table;
mod task;

use std::str::FromStr;

pub(crate) use channel::train_channel_on;
pub use channel::{channel_score, train_channel, ChannelModel, Direction};
pub use decode::{beam_decode, sample_candidate_set, sample_decode, DEFAULT_BEAM_SIZE};
pub use ngram::{lm_score, train_ngram_lm, LmVocab, NGramLm, DEFAULT_ALPHA, DEFAULT_ORDER};
pub use task::{generate_toy_task, ToyTask, ToyTaskSpec};

use crate::error::{Error, Result};
pub(crate) use crate::rng::sample_categorical;
use crate::Token;

/// Context-only start marker.
pub const BOS: Token = Token::MAX;

fn parse_header<'a, I>(lines: &mut I, tag: &str) -> Result<()>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    match lines.next() {
        Some((_, l)) if l == tag => Ok(()),
        Some((line, _)) => Err(Error::Parse { line, message: format!("expected header '{tag}'") }),
        None => Err(Error::Parse { line: 1, message: "empty model file".into() }),
    }
}

fn parse_kv<'a, I, T>(lines: &mut I, key: &str) -> Result<T>
where
    I: Iterator<Item = (usize, &'a str)>,
    T: FromStr,
{
    let (line, l) = lines.next().ok_or_else(|| Error::Parse { line: 0, message: format!("missing '{key}'") })?;
    let value = l
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Parse { line, message: format!("expected '{key} <value>'") })?;
    value.parse().map_err(|_| Error::Parse { line, message: format!("bad value for '{key}'") })
}
