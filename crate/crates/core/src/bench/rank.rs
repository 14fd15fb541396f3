//! Per-dataset ranking of methods by accuracy and the average rank across
//! datasets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How equal accuracies within one dataset are ranked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Ties share the best rank and the next value skips past them
    /// (`0.9, 0.9, 0.5` ranks `1, 1, 3`).
    #[default]
    Competition,
    /// Ties are ranked by column order (`0.9, 0.9, 0.5` ranks `1, 2, 3`).
    First,
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieRule::Competition => "competition",
            TieRule::First => "first",
        })
    }
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "competition" => Ok(TieRule::Competition),
            "first" => Ok(TieRule::First),
            _ => Err(Error::Config(format!("unknown tie rule '{s}'"))),
        }
    }
}

/// Ranks of one row, 1 for the highest accuracy.
pub fn rank_row(acc: &[f64], rule: TieRule) -> Result<Vec<usize>> {
    if let Some(i) = acc.iter().position(|v| v.is_nan()) {
        return Err(Error::Contract(format!("accuracy in column {i} is NaN")));
    }
    Ok(match rule {
        TieRule::Competition => acc
            .iter()
            .map(|&a| 1 + acc.iter().filter(|&&b| b > a).count())
            .collect(),
        TieRule::First => {
            let mut order: Vec<usize> = (0..acc.len()).collect();
            order.sort_by(|&i, &j| acc[j].total_cmp(&acc[i]).then(i.cmp(&j)));
            let mut ranks = vec![0; acc.len()];
            for (r, i) in order.into_iter().enumerate() {
                ranks[i] = r + 1;
            }
            ranks
        }
    })
}

/// Mean rank of each column over the rows of a datasets x methods accuracy
/// matrix.
pub fn average_rank(acc: &[Vec<f64>], rule: TieRule) -> Result<Vec<f64>> {
    let Some(first) = acc.first() else {
        return Err(Error::Data("no datasets to rank".into()));
    };
    let m = first.len();
    let mut sums = vec![0.0; m];
    for (d, row) in acc.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Shape(format!(
                "dataset row {d} has {} methods, expected {m}",
                row.len()
            )));
        }
        for (s, r) in sums.iter_mut().zip(rank_row(row, rule)?) {
            *s += r as f64;
        }
    }
    Ok(sums.into_iter().map(|s| s / acc.len() as f64).collect())
}
