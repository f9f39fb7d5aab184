use std::collections::BTreeMap;

use crate::error::{invalid, Result};

/// Counts observed after one context, over a fixed outcome set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CountRow {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl CountRow {
    fn new(outcomes: usize) -> Self {
        Self { counts: vec![0; outcomes], total: 0 }
    }
}

/// Conditional distributions `p(outcome | key)` either estimated from
/// add-alpha smoothed counts or given explicitly. Keys without a row get
/// the uniform distribution.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CondTable<K: Ord> {
    Counts { outcomes: usize, alpha: f64, rows: BTreeMap<K, CountRow> },
    Explicit { outcomes: usize, rows: BTreeMap<K, Vec<f64>> },
}

impl<K: Ord + Clone> CondTable<K> {
    pub fn counts(outcomes: usize, alpha: f64) -> Self {
        CondTable::Counts { outcomes, alpha, rows: BTreeMap::new() }
    }

    pub fn explicit(outcomes: usize, rows: BTreeMap<K, Vec<f64>>) -> Result<Self> {
        for row in rows.values() {
            if row.len() != outcomes {
                return Err(invalid(format!("row has {} entries, expected {outcomes}", row.len())));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(invalid("probabilities must be finite and non-negative"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("row sums to {total}, expected 1")));
            }
        }
        Ok(CondTable::Explicit { outcomes, rows })
    }

    pub fn add(&mut self, key: K, outcome: usize, n: u64) {
        if let CondTable::Counts { outcomes, rows, .. } = self {
            let row = rows.entry(key).or_insert_with(|| CountRow::new(*outcomes));
            row.counts[outcome] += n;
            row.total += n;
        }
    }

    pub fn prob(&self, key: &K, outcome: usize) -> f64 {
        match self {
            CondTable::Counts { outcomes, alpha, rows } => {
                let v = *outcomes as f64;
                match rows.get(key) {
                    Some(row) => {
                        let denom = row.total as f64 + alpha * v;
                        if denom > 0.0 {
                            (row.counts[outcome] as f64 + alpha) / denom
                        } else {
                            1.0 / v
                        }
                    }
                    None => 1.0 / v,
                }
            }
            CondTable::Explicit { outcomes, rows } => match rows.get(key) {
                Some(row) => row[outcome],
                None => 1.0 / *outcomes as f64,
            },
        }
    }

    pub fn distribution(&self, key: &K) -> Vec<f64> {
        match self {
            CondTable::Counts { outcomes, alpha, rows } => {
                let v = *outcomes as f64;
                match rows.get(key) {
                    Some(row) if row.total as f64 + alpha * v > 0.0 => {
                        let denom = row.total as f64 + alpha * v;
                        row.counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
                    }
                    _ => vec![1.0 / v; *outcomes],
                }
            }
            CondTable::Explicit { outcomes, rows } => {
                rows.get(key).cloned().unwrap_or_else(|| vec![1.0 / *outcomes as f64; *outcomes])
            }
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            CondTable::Counts { alpha, .. } => Some(*alpha),
            CondTable::Explicit { .. } => None,
        }
    }

    pub fn count_rows(&self) -> Option<&BTreeMap<K, CountRow>> {
        match self {
            CondTable::Counts { rows, .. } => Some(rows),
            CondTable::Explicit { .. } => None,
        }
    }

    pub fn explicit_rows(&self) -> Option<&BTreeMap<K, Vec<f64>>> {
        match self {
            CondTable::Explicit { rows, .. } => Some(rows),
            CondTable::Counts { .. } => None,
        }
    }

    pub fn insert_counts(&mut self, key: K, counts: Vec<u64>) -> Result<()> {
        match self {
            CondTable::Counts { outcomes, rows, .. } => {
                if counts.len() != *outcomes {
                    return Err(invalid("count row width does not match outcome count"));
                }
                let total = counts.iter().sum();
                rows.insert(key, CountRow { counts, total });
                Ok(())
            }
            CondTable::Explicit { .. } => Err(invalid("cannot add counts to an explicit table")),
        }
    }
}
