//! On-disk formats: line-delimited JSON candidate records, tab-separated
//! corpora and one-sentence-per-line token files. Tokens are
//! whitespace-separated integer ids.

use std::io::{BufRead, Write};

use gammabt::manipulate::{Provenance, SyntheticPair};
use gammabt::scoring::CandidateSet;
use gammabt::{Error, Result, Token};

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn validation_error(line: usize, e: Error) -> Error {
    Error::Validation { line, message: e.to_string() }
}

/// One candidate set per non-blank line.
pub fn parse_candidate_records<R: BufRead>(reader: R) -> Result<Vec<CandidateSet>> {
    let mut sets = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let set: CandidateSet = serde_json::from_str(&line).map_err(|e| parse_error(line_no, e.to_string()))?;
        set.validate().map_err(|e| validation_error(line_no, e))?;
        sets.push(set);
    }
    Ok(sets)
}

pub fn write_candidate_records<W: Write>(sets: &[CandidateSet], mut writer: W) -> Result<()> {
    for set in sets {
        let line = serde_json::to_string(set).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn parse_tokens(line: usize, field: &str) -> Result<Vec<Token>> {
    let tokens = field
        .split_whitespace()
        .map(|t| t.parse::<Token>().map_err(|_| parse_error(line, format!("bad token '{t}'"))))
        .collect::<Result<Vec<_>>>()?;
    if tokens.is_empty() {
        return Err(parse_error(line, "empty sentence"));
    }
    Ok(tokens)
}

pub fn format_tokens(tokens: &[Token]) -> String {
    tokens.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// Rows of `source<TAB>target[<TAB>provenance]`, tab-split fields in order.
fn parse_tsv(text: &str) -> Result<Vec<(usize, Vec<&str>)>> {
    let rows: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split('\t').collect()))
        .collect();
    for (line, fields) in &rows {
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_error(*line, format!("expected 2 or 3 tab-separated fields, found {}", fields.len())));
        }
    }
    Ok(rows)
}

pub fn parse_parallel(text: &str) -> Result<Vec<(Vec<Token>, Vec<Token>)>> {
    parse_tsv(text)?.into_iter().map(|(line, f)| Ok((parse_tokens(line, f[0])?, parse_tokens(line, f[1])?))).collect()
}

/// Synthetic pairs; rows without a provenance column get `default`.
pub fn parse_synthetic(text: &str, default: Provenance) -> Result<Vec<SyntheticPair>> {
    parse_tsv(text)?
        .into_iter()
        .map(|(line, f)| {
            let provenance = match f.get(2) {
                Some(p) => p.trim().parse().map_err(|e: Error| parse_error(line, e.to_string()))?,
                None => default,
            };
            SyntheticPair::new(parse_tokens(line, f[0])?, parse_tokens(line, f[1])?, provenance)
                .map_err(|e| validation_error(line, e))
        })
        .collect()
}

pub fn format_parallel(pairs: &[(Vec<Token>, Vec<Token>)]) -> String {
    pairs.iter().map(|(s, t)| format!("{}\t{}\n", format_tokens(s), format_tokens(t))).collect()
}

pub fn format_synthetic(pairs: &[SyntheticPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("{}\t{}\t{}\n", format_tokens(&p.source), format_tokens(&p.target), p.provenance))
        .collect()
}

pub fn parse_sentences(text: &str) -> Result<Vec<Vec<Token>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            if l.contains('\t') {
                return Err(parse_error(i + 1, "tab in a one-sentence-per-line file"));
            }
            parse_tokens(i + 1, l)
        })
        .collect()
}

pub fn format_sentences(sentences: &[Vec<Token>]) -> String {
    sentences.iter().map(|s| format_tokens(s) + "\n").collect()
}
