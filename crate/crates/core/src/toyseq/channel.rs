//! Equal-length Markov channel: `p(out | in) = prod_t p(out_t | out_{t-1}, in_t)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::table::CondTable;
use super::{parse_header, parse_kv, BOS};
use crate::corpus::ParallelCorpus;
use crate::error::{invalid, Error, Result};
use crate::Token;

const FORMAT_TAG: &str = "gammabt-channel v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Forward model: conditions on source tokens, emits target tokens.
    SourceToTarget,
    /// Backward model: conditions on target tokens, emits source tokens.
    TargetToSource,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::SourceToTarget => "s2t",
            Direction::TargetToSource => "t2s",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s2t" => Ok(Direction::SourceToTarget),
            "t2s" => Ok(Direction::TargetToSource),
            other => Err(invalid(format!("unknown direction '{other}', expected s2t or t2s"))),
        }
    }
}

type Key = (Token, Token);

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    direction: Direction,
    input_vocab: u32,
    output_vocab: u32,
    table: CondTable<Key>,
}

impl ChannelModel {
    /// Tabulates `rows(prev, input)` for every previous output (BOS
    /// included) and every input id (the UNK input slot included).
    pub fn explicit<F>(direction: Direction, input_vocab: u32, output_vocab: u32, rows: F) -> Result<Self>
    where
        F: Fn(Token, Token) -> Vec<f64>,
    {
        let mut table = BTreeMap::new();
        for prev in std::iter::once(BOS).chain(0..output_vocab) {
            for input in 0..=input_vocab {
                table.insert((prev, input), rows(prev, input));
            }
        }
        Ok(Self { direction, input_vocab, output_vocab, table: CondTable::explicit(output_vocab as usize, table)? })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn input_vocab(&self) -> u32 {
        self.input_vocab
    }

    pub fn output_vocab(&self) -> u32 {
        self.output_vocab
    }

    pub fn alpha(&self) -> Option<f64> {
        self.table.alpha()
    }

    fn key(&self, prev: Token, input: Token) -> Key {
        (prev, input.min(self.input_vocab))
    }

    /// Distribution over outputs given the previous output (`BOS` at the
    /// first position) and the aligned input token.
    pub fn conditional(&self, prev: Token, input: Token) -> Vec<f64> {
        self.table.distribution(&self.key(prev, input))
    }

    pub fn prob(&self, prev: Token, input: Token, output: Token) -> f64 {
        self.table.prob(&self.key(prev, input), output as usize)
    }

    /// Sum of per-position natural-log conditionals.
    pub fn score(&self, output: &[Token], input: &[Token]) -> Result<f64> {
        if output.len() != input.len() {
            return Err(invalid(format!(
                "channel needs equal lengths, got output {} vs input {}",
                output.len(),
                input.len()
            )));
        }
        if let Some(&bad) = output.iter().find(|&&t| t >= self.output_vocab) {
            return Err(invalid(format!("output token {bad} outside vocabulary of {}", self.output_vocab)));
        }
        let mut prev = BOS;
        let mut total = 0.0;
        for (&o, &i) in output.iter().zip(input) {
            total += self.prob(prev, i, o).ln();
            prev = o;
        }
        Ok(total)
    }

    /// Every (previous output, input) state, including BOS and the UNK input.
    pub fn all_states(&self) -> Vec<Key> {
        std::iter::once(BOS)
            .chain(0..self.output_vocab)
            .flat_map(|prev| (0..=self.input_vocab).map(move |i| (prev, i)))
            .collect()
    }

    /// Raw count for a state/output pair; zero for explicit models.
    pub fn count(&self, prev: Token, input: Token, output: Token) -> u64 {
        self.table
            .count_rows()
            .and_then(|rows| rows.get(&self.key(prev, input)))
            .map_or(0, |row| row.counts[output as usize])
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{FORMAT_TAG}").unwrap();
        writeln!(s, "direction {}", self.direction.as_str()).unwrap();
        writeln!(s, "input_vocab {}", self.input_vocab).unwrap();
        writeln!(s, "output_vocab {}", self.output_vocab).unwrap();
        let fmt_prev = |p: Token| if p == BOS { "<s>".to_string() } else { p.to_string() };
        if let Some(rows) = self.table.count_rows() {
            writeln!(s, "kind counts").unwrap();
            writeln!(s, "alpha {}", self.table.alpha().unwrap()).unwrap();
            for (&(prev, input), row) in rows {
                let cells: Vec<String> =
                    row.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(o, c)| format!("{o}:{c}")).collect();
                writeln!(s, "row {} {}\t{}", fmt_prev(prev), input, cells.join(" ")).unwrap();
            }
        } else if let Some(rows) = self.table.explicit_rows() {
            writeln!(s, "kind probs").unwrap();
            for (&(prev, input), row) in rows {
                let cells: Vec<String> = row.iter().enumerate().map(|(o, p)| format!("{o}:{p}")).collect();
                writeln!(s, "row {} {}\t{}", fmt_prev(prev), input, cells.join(" ")).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        parse_header(&mut lines, FORMAT_TAG)?;
        let direction: String = parse_kv(&mut lines, "direction")?;
        let direction: Direction = direction.parse()?;
        let input_vocab: u32 = parse_kv(&mut lines, "input_vocab")?;
        let output_vocab: u32 = parse_kv(&mut lines, "output_vocab")?;
        let kind: String = parse_kv(&mut lines, "kind")?;
        let outcomes = output_vocab as usize;
        let perr = |line: usize, m: &str| Error::Parse { line, message: m.to_string() };
        let parse_line = |line: usize, l: &str| -> Result<(Key, Vec<(usize, String)>)> {
            let rest = l.strip_prefix("row ").ok_or_else(|| perr(line, "expected 'row'"))?;
            let (key, cells) = rest.split_once('\t').ok_or_else(|| perr(line, "missing tab"))?;
            let (prev, input) = key.split_once(' ').ok_or_else(|| perr(line, "expected '<prev> <input>'"))?;
            let prev = if prev == "<s>" { BOS } else { prev.parse().map_err(|_| perr(line, "bad prev token"))? };
            let input: Token = input.parse().map_err(|_| perr(line, "bad input token"))?;
            if input > input_vocab || (prev != BOS && prev >= output_vocab) {
                return Err(perr(line, "state out of range"));
            }
            let cells = cells
                .split_whitespace()
                .map(|c| {
                    let (o, v) = c.split_once(':').ok_or_else(|| perr(line, "expected id:value"))?;
                    let o: usize = o.parse().map_err(|_| perr(line, "bad outcome id"))?;
                    if o >= outcomes {
                        return Err(perr(line, "outcome id out of range"));
                    }
                    Ok((o, v.to_string()))
                })
                .collect::<Result<_>>()?;
            Ok(((prev, input), cells))
        };
        let table = match kind.as_str() {
            "counts" => {
                let alpha: f64 = parse_kv(&mut lines, "alpha")?;
                let mut table = CondTable::counts(outcomes, alpha);
                for (line, l) in lines {
                    let (key, cells) = parse_line(line, l)?;
                    let mut counts = vec![0u64; outcomes];
                    for (o, v) in cells {
                        counts[o] = v.parse().map_err(|_| perr(line, "bad count"))?;
                    }
                    table.insert_counts(key, counts)?;
                }
                table
            }
            "probs" => {
                let mut rows = BTreeMap::new();
                for (line, l) in lines {
                    let (key, cells) = parse_line(line, l)?;
                    let mut row = vec![0.0; outcomes];
                    for (o, v) in cells {
                        row[o] = v.parse().map_err(|_| perr(line, "bad probability"))?;
                    }
                    rows.insert(key, row);
                }
                CondTable::explicit(outcomes, rows)?
            }
            other => return Err(invalid(format!("unknown model kind '{other}'"))),
        };
        Ok(Self { direction, input_vocab, output_vocab, table })
    }
}

/// Smoothed count estimate of the channel in `direction`.
pub fn train_channel(pairs: &ParallelCorpus, direction: Direction, alpha: f64) -> Result<ChannelModel> {
    train_channel_on(
        pairs.pairs().iter().map(|(s, t)| (s.as_slice(), t.as_slice())),
        pairs.source_vocab(),
        pairs.target_vocab(),
        direction,
        alpha,
    )
}

/// Trains on `(source, target)` slices from any iterator.
pub(crate) fn train_channel_on<'a, I>(
    pairs: I,
    source_vocab: u32,
    target_vocab: u32,
    direction: Direction,
    alpha: f64,
) -> Result<ChannelModel>
where
    I: IntoIterator<Item = (&'a [Token], &'a [Token])>,
{
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    let (input_vocab, output_vocab) = match direction {
        Direction::SourceToTarget => (source_vocab, target_vocab),
        Direction::TargetToSource => (target_vocab, source_vocab),
    };
    let mut model =
        ChannelModel { direction, input_vocab, output_vocab, table: CondTable::counts(output_vocab as usize, alpha) };
    let mut seen = 0usize;
    for (src, tgt) in pairs {
        let (input, output) = match direction {
            Direction::SourceToTarget => (src, tgt),
            Direction::TargetToSource => (tgt, src),
        };
        if input.len() != output.len() {
            return Err(invalid(format!("pair {seen} has unequal lengths {} and {}", src.len(), tgt.len())));
        }
        let mut prev = BOS;
        for (&i, &o) in input.iter().zip(output.iter()) {
            if o >= output_vocab {
                return Err(invalid(format!("pair {seen}: output token {o} outside vocabulary")));
            }
            let key = model.key(prev, i);
            model.table.add(key, o as usize, 1);
            prev = o;
        }
        seen += 1;
    }
    if seen == 0 {
        return Err(invalid("cannot train a channel on an empty corpus"));
    }
    Ok(model)
}

pub fn channel_score(model: &ChannelModel, output: &[Token], input: &[Token]) -> Result<f64> {
    model.score(output, input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn corpus(pairs: Vec<(Vec<Token>, Vec<Token>)>, v: u32) -> ParallelCorpus {
        ParallelCorpus::new(pairs, v, v).unwrap()
    }

    fn five_pairs() -> ParallelCorpus {
        corpus(
            vec![
                (vec![0, 1, 2], vec![1, 1, 0]),
                (vec![0, 0], vec![1, 2]),
                (vec![2, 1, 0, 1], vec![0, 1, 2, 1]),
                (vec![1], vec![1]),
                (vec![0, 1], vec![1, 0]),
            ],
            3,
        )
    }

    #[test]
    fn zero_alpha_reproduces_empirical_frequencies() {
        let c = five_pairs();
        let model = train_channel(&c, Direction::SourceToTarget, 0.0).unwrap();
        // independent tally of (prev target, source token) -> target
        let mut tally: BTreeMap<(Token, Token), BTreeMap<Token, u64>> = BTreeMap::new();
        for (src, tgt) in c.pairs() {
            for t in 0..src.len() {
                let prev = if t == 0 { BOS } else { tgt[t - 1] };
                *tally.entry((prev, src[t])).or_default().entry(tgt[t]).or_default() += 1;
            }
        }
        for ((prev, input), outs) in &tally {
            let total: u64 = outs.values().sum();
            for o in 0..3 {
                let expected = *outs.get(&o).unwrap_or(&0) as f64 / total as f64;
                assert_eq!(model.prob(*prev, *input, o), expected);
            }
        }
    }

    #[test]
    fn conditionals_normalize_and_move_toward_uniform() {
        let c = five_pairs();
        let alphas = [0.0, 0.05, 0.5, 2.0, 20.0];
        let models: Vec<_> = alphas.iter().map(|&a| train_channel(&c, Direction::TargetToSource, a).unwrap()).collect();
        for m in &models {
            for (prev, input) in m.all_states() {
                let d = m.conditional(prev, input);
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        let uniform = 1.0 / 3.0;
        for (prev, input) in models[0].all_states() {
            for o in 0..3 {
                let gaps: Vec<f64> = models.iter().map(|m| (m.prob(prev, input, o) - uniform).abs()).collect();
                assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{gaps:?}");
            }
        }
    }

    #[test]
    fn score_is_product_of_conditionals() {
        let c = five_pairs();
        let m = train_channel(&c, Direction::SourceToTarget, 0.1).unwrap();
        let input = [2, 0, 1, 1];
        let output = [0, 1, 1, 2];
        let direct = m.prob(BOS, 2, 0) * m.prob(0, 0, 1) * m.prob(1, 1, 1) * m.prob(1, 1, 2);
        assert!((m.score(&output, &input).unwrap() - direct.ln()).abs() < 1e-12);

        assert_eq!(m.score(&[1], &[0]).unwrap(), m.prob(BOS, 0, 1).ln());

        // concatenation decomposes given the boundary state
        let (o1, o2) = output.split_at(2);
        let (i1, i2) = input.split_at(2);
        let mut tail = 0.0;
        let mut prev = o1[1];
        for (&o, &i) in o2.iter().zip(i2) {
            tail += m.prob(prev, i, o).ln();
            prev = o;
        }
        let whole = m.score(&output, &input).unwrap();
        assert!((whole - (m.score(o1, i1).unwrap() + tail)).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let bad = ParallelCorpus::new(vec![(vec![0, 1], vec![1])], 3, 3);
        assert!(bad.is_err());
        let m = train_channel(&five_pairs(), Direction::SourceToTarget, 0.1).unwrap();
        assert!(m.score(&[0, 1], &[1]).is_err());
        assert!(m.score(&[7], &[1]).is_err());
    }

    #[test]
    fn trained_channel_beats_uniform_on_held_out_pairs() {
        let mut rng = stream(21, Purpose::Test, 0);
        let mut draw = |n: usize| {
            (0..n)
                .map(|_| {
                    let len = rng.random_range(2..6);
                    let src: Vec<Token> = (0..len).map(|_| rng.random_range(0..4)).collect();
                    let tgt = src
                        .iter()
                        .map(|&s| if rng.random_bool(0.8) { (s + 1) % 4 } else { rng.random_range(0..4) })
                        .collect();
                    (src, tgt)
                })
                .collect::<Vec<_>>()
        };
        let train = ParallelCorpus::new(draw(400), 4, 4).unwrap();
        let held = draw(100);
        let m = train_channel(&train, Direction::SourceToTarget, 0.1).unwrap();
        let uniform = ChannelModel::explicit(Direction::SourceToTarget, 4, 4, |_, _| vec![0.25; 4]).unwrap();
        let ll = |model: &ChannelModel| held.iter().map(|(s, t)| model.score(t, s).unwrap()).sum::<f64>();
        assert!(ll(&m) >= ll(&uniform));
    }

    #[test]
    fn text_round_trip() {
        let m = train_channel(&five_pairs(), Direction::TargetToSource, 0.1).unwrap();
        let text = m.to_text();
        let back = ChannelModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);

        let e = ChannelModel::explicit(Direction::SourceToTarget, 2, 2, |_, i| {
            if i == 0 {
                vec![0.75, 0.25]
            } else {
                vec![0.125, 0.875]
            }
        })
        .unwrap();
        assert_eq!(ChannelModel::from_text(&e.to_text()).unwrap(), e);
    }
}
