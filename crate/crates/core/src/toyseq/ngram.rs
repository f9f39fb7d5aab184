//! Add-alpha smoothed n-gram language model over integer tokens.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use super::table::CondTable;
use super::{parse_header, parse_kv, sample_categorical, BOS};
use crate::error::{invalid, Error, Result};
use crate::Token;

pub const DEFAULT_ORDER: usize = 2;
pub const DEFAULT_ALPHA: f64 = 0.1;

const FORMAT_TAG: &str = "gammabt-ngram v1";

/// Outcome layout: word ids `0..words`, then UNK (if enabled), then EOS
/// (if enabled). BOS only ever appears in contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmVocab {
    pub words: u32,
    pub unk: bool,
    pub eos: bool,
}

impl LmVocab {
    /// Word ids plus UNK and EOS, the layout used for toy source LMs.
    pub fn with_markers(words: u32) -> Self {
        Self { words, unk: true, eos: true }
    }

    pub fn outcomes(&self) -> usize {
        self.words as usize + self.unk as usize + self.eos as usize
    }

    pub fn unk_id(&self) -> Option<Token> {
        self.unk.then_some(self.words)
    }

    pub fn eos_id(&self) -> Option<Token> {
        self.eos.then_some(self.words + self.unk as u32)
    }

    fn map(&self, t: Token) -> Result<Token> {
        if t < self.words {
            Ok(t)
        } else {
            self.unk_id().ok_or_else(|| invalid(format!("token {t} is outside the vocabulary and no UNK is reserved")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramLm {
    order: usize,
    vocab: LmVocab,
    table: CondTable<Vec<Token>>,
}

impl NGramLm {
    /// A model with explicitly given conditionals. Missing contexts are uniform.
    pub fn explicit(order: usize, vocab: LmVocab, rows: BTreeMap<Vec<Token>, Vec<f64>>) -> Result<Self> {
        check_order(order)?;
        if rows.keys().any(|k| k.len() != order - 1) {
            return Err(invalid("context length must equal order - 1"));
        }
        Ok(Self { order, vocab, table: CondTable::explicit(vocab.outcomes(), rows)? })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> LmVocab {
        self.vocab
    }

    pub fn alpha(&self) -> Option<f64> {
        self.table.alpha()
    }

    /// Left-padded context of the `order - 1` tokens preceding position `i`.
    fn context(&self, mapped: &[Token], i: usize) -> Vec<Token> {
        let n = self.order - 1;
        let mut ctx = Vec::with_capacity(n);
        for k in (1..=n).rev() {
            ctx.push(if i >= k { mapped[i - k] } else { BOS });
        }
        ctx
    }

    pub fn conditional(&self, context: &[Token]) -> Vec<f64> {
        self.table.distribution(&context.to_vec())
    }

    pub fn prob(&self, context: &[Token], outcome: Token) -> f64 {
        self.table.prob(&context.to_vec(), outcome as usize)
    }

    /// Natural-log probability of `x`, including the EOS transition when the
    /// vocabulary has one. Out-of-vocabulary tokens score as UNK.
    pub fn score(&self, x: &[Token]) -> Result<f64> {
        let mut mapped = x.iter().map(|&t| self.vocab.map(t)).collect::<Result<Vec<_>>>()?;
        if let Some(eos) = self.vocab.eos_id() {
            mapped.push(eos);
        }
        let mut total = 0.0;
        for i in 0..mapped.len() {
            let ctx = self.context(&mapped, i);
            total += self.table.prob(&ctx, mapped[i] as usize).ln();
        }
        Ok(total)
    }

    /// Every context the model can be queried with: tuples over BOS, words
    /// and UNK. Only practical at toy sizes.
    pub fn all_contexts(&self) -> Vec<Vec<Token>> {
        let mut symbols: Vec<Token> = (0..self.vocab.words).collect();
        symbols.extend(self.vocab.unk_id());
        symbols.push(BOS);
        let mut out = vec![Vec::new()];
        for _ in 1..self.order {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    symbols.iter().map(move |&s| {
                        let mut next = prefix.clone();
                        next.push(s);
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// Log of the total probability of word sequences of exactly `len`
    /// tokens (UNK excluded), computed by a forward pass over contexts.
    pub fn log_length_mass(&self, len: usize) -> f64 {
        let mut states: BTreeMap<Vec<Token>, f64> = BTreeMap::new();
        states.insert(vec![BOS; self.order - 1], 1.0);
        for _ in 0..len {
            let mut next: BTreeMap<Vec<Token>, f64> = BTreeMap::new();
            for (ctx, mass) in &states {
                let dist = self.conditional(ctx);
                for w in 0..self.vocab.words {
                    let mut nctx = ctx.clone();
                    if !nctx.is_empty() {
                        nctx.remove(0);
                        nctx.push(w);
                    }
                    *next.entry(nctx).or_insert(0.0) += mass * dist[w as usize];
                }
            }
            states = next;
        }
        let total: f64 = match self.vocab.eos_id() {
            Some(eos) => states.iter().map(|(ctx, m)| m * self.prob(ctx, eos)).sum(),
            None => states.values().sum(),
        };
        total.ln()
    }

    /// Ancestral sample of words up to EOS. Returns `None` if no EOS was
    /// drawn within `max_len` tokens or the model has no EOS.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Option<Vec<Token>> {
        let eos = self.vocab.eos_id()?;
        let mut out: Vec<Token> = Vec::new();
        loop {
            let ctx = self.context(&out, out.len());
            let t = sample_categorical(&self.conditional(&ctx), rng) as Token;
            if t == eos {
                return Some(out);
            }
            if out.len() == max_len {
                return None;
            }
            out.push(t);
        }
    }

    /// Versioned text form with sorted contexts.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{FORMAT_TAG}").unwrap();
        writeln!(s, "order {}", self.order).unwrap();
        writeln!(s, "words {}", self.vocab.words).unwrap();
        writeln!(s, "unk {}", self.vocab.unk).unwrap();
        writeln!(s, "eos {}", self.vocab.eos).unwrap();
        if let Some(rows) = self.table.count_rows() {
            writeln!(s, "kind counts").unwrap();
            writeln!(s, "alpha {}", self.table.alpha().unwrap()).unwrap();
            for (ctx, row) in rows {
                let cells: Vec<String> =
                    row.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(o, c)| format!("{o}:{c}")).collect();
                writeln!(s, "ctx {}\t{}", fmt_context(ctx), cells.join(" ")).unwrap();
            }
        } else if let Some(rows) = self.table.explicit_rows() {
            writeln!(s, "kind probs").unwrap();
            for (ctx, row) in rows {
                let cells: Vec<String> = row.iter().enumerate().map(|(o, p)| format!("{o}:{p}")).collect();
                writeln!(s, "ctx {}\t{}", fmt_context(ctx), cells.join(" ")).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        parse_header(&mut lines, FORMAT_TAG)?;
        let order: usize = parse_kv(&mut lines, "order")?;
        check_order(order)?;
        let vocab = LmVocab {
            words: parse_kv(&mut lines, "words")?,
            unk: parse_kv(&mut lines, "unk")?,
            eos: parse_kv(&mut lines, "eos")?,
        };
        let kind: String = parse_kv(&mut lines, "kind")?;
        let outcomes = vocab.outcomes();
        let table = match kind.as_str() {
            "counts" => {
                let alpha: f64 = parse_kv(&mut lines, "alpha")?;
                let mut table = CondTable::counts(outcomes, alpha);
                for (line, l) in lines {
                    let (ctx, cells) = parse_row(line, l, order - 1)?;
                    let mut counts = vec![0u64; outcomes];
                    for (o, v) in cells {
                        counts[check_outcome(line, o, outcomes)?] =
                            v.parse().map_err(|_| parse_err(line, "bad count"))?;
                    }
                    table.insert_counts(ctx, counts)?;
                }
                table
            }
            "probs" => {
                let mut rows = BTreeMap::new();
                for (line, l) in lines {
                    let (ctx, cells) = parse_row(line, l, order - 1)?;
                    let mut row = vec![0.0; outcomes];
                    for (o, v) in cells {
                        row[check_outcome(line, o, outcomes)?] =
                            v.parse().map_err(|_| parse_err(line, "bad probability"))?;
                    }
                    rows.insert(ctx, row);
                }
                CondTable::explicit(outcomes, rows)?
            }
            other => return Err(invalid(format!("unknown model kind '{other}'"))),
        };
        Ok(Self { order, vocab, table })
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(invalid("n-gram order must be at least 1"));
    }
    Ok(())
}

fn fmt_context(ctx: &[Token]) -> String {
    if ctx.is_empty() {
        return "-".to_string();
    }
    ctx.iter().map(|&t| if t == BOS { "<s>".to_string() } else { t.to_string() }).collect::<Vec<_>>().join(" ")
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse { line, message: message.to_string() }
}

fn check_outcome(line: usize, o: usize, outcomes: usize) -> Result<usize> {
    if o >= outcomes {
        return Err(parse_err(line, "outcome id out of range"));
    }
    Ok(o)
}

type Cells<'a> = Vec<(usize, &'a str)>;

fn parse_row(line: usize, l: &str, ctx_len: usize) -> Result<(Vec<Token>, Cells<'_>)> {
    let rest = l.strip_prefix("ctx ").ok_or_else(|| parse_err(line, "expected 'ctx' row"))?;
    let (ctx, cells) = rest.split_once('\t').ok_or_else(|| parse_err(line, "missing tab"))?;
    let ctx: Vec<Token> = if ctx == "-" {
        Vec::new()
    } else {
        ctx.split(' ')
            .map(|t| if t == "<s>" { Ok(BOS) } else { t.parse().map_err(|_| parse_err(line, "bad context token")) })
            .collect::<Result<_>>()?
    };
    if ctx.len() != ctx_len {
        return Err(parse_err(line, "context length does not match order"));
    }
    let cells = cells
        .split_whitespace()
        .map(|c| {
            let (o, v) = c.split_once(':').ok_or_else(|| parse_err(line, "expected id:value"))?;
            Ok((o.parse().map_err(|_| parse_err(line, "bad outcome id"))?, v))
        })
        .collect::<Result<_>>()?;
    Ok((ctx, cells))
}

/// Add-alpha smoothed maximum-likelihood n-gram model.
pub fn train_ngram_lm(corpus: &[Vec<Token>], vocab: LmVocab, order: usize, alpha: f64) -> Result<NGramLm> {
    check_order(order)?;
    if corpus.is_empty() {
        return Err(invalid("cannot train a language model on an empty corpus"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    let mut lm = NGramLm { order, vocab, table: CondTable::counts(vocab.outcomes(), alpha) };
    for sentence in corpus {
        let mut mapped = sentence.iter().map(|&t| vocab.map(t)).collect::<Result<Vec<_>>>()?;
        mapped.extend(vocab.eos_id());
        for i in 0..mapped.len() {
            let ctx = lm.context(&mapped, i);
            lm.table.add(ctx, mapped[i] as usize, 1);
        }
    }
    Ok(lm)
}

pub fn lm_score(lm: &NGramLm, x: &[Token]) -> Result<f64> {
    lm.score(x)
}
