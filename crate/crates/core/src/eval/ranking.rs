use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{DriftlabError, Result};

/// Studentized-range quantiles divided by √2, for 2..=10 algorithms.
const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// H-scores of several algorithms over several settings (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub algorithms: Vec<String>,
    pub rows: Vec<String>,
    /// `scores[row][algorithm]`; higher is better.
    pub scores: Vec<Vec<f64>>,
}

impl RankTable {
    pub fn new(algorithms: Vec<String>, rows: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        let t = RankTable {
            algorithms,
            rows,
            scores,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let a = self.algorithms.len();
        if self.rows.len() != self.scores.len() {
            return Err(DriftlabError::DimensionMismatch {
                expected: self.rows.len(),
                found: self.scores.len(),
            });
        }
        for row in &self.scores {
            if row.len() != a {
                return Err(DriftlabError::DimensionMismatch {
                    expected: a,
                    found: row.len(),
                });
            }
            if row.iter().any(|s| !s.is_finite()) {
                return Err(DriftlabError::InvalidArgument("non-finite score in rank table".into()));
            }
        }
        Ok(())
    }

    /// Per-row ranks: 1 for the best score, ties share the average rank.
    pub fn ranks(&self) -> Vec<Vec<f64>> {
        self.scores.iter().map(|row| rank_row(row)).collect()
    }

    pub fn average_ranks(&self) -> Vec<f64> {
        let ranks = self.ranks();
        let n = ranks.len() as f64;
        (0..self.algorithms.len())
            .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }
}

fn rank_row(row: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && row[idx[j + 1]] == row[idx[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
}

pub fn friedman_test(table: &RankTable, alpha: f64) -> Result<FriedmanResult> {
    table.validate()?;
    let a = table.algorithms.len();
    let n = table.rows.len();
    if a < 2 || n < 2 {
        return Err(DriftlabError::InsufficientData(format!(
            "Friedman test needs at least 2 algorithms and 2 rows, got {a} and {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DriftlabError::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let (af, nf) = (a as f64, n as f64);
    let sum_sq: f64 = table.average_ranks().iter().map(|r| r * r).sum();
    let statistic = 12.0 * nf / (af * (af + 1.0)) * (sum_sq - af * (af + 1.0).powi(2) / 4.0);
    let chi = ChiSquared::new(af - 1.0).expect("positive degrees of freedom");
    let critical = chi.inverse_cdf(1.0 - alpha);
    Ok(FriedmanResult {
        statistic,
        critical,
        p_value: chi.sf(statistic),
        reject: statistic > critical,
    })
}

/// Critical value of the Nemenyi test for `a` algorithms.
pub fn nemenyi_q(a: usize, alpha: f64) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(DriftlabError::InvalidArgument(format!(
            "no Nemenyi table for alpha = {alpha} (use 0.05 or 0.10)"
        )));
    };
    if !(2..=10).contains(&a) {
        return Err(DriftlabError::InvalidArgument(format!(
            "q table exhausted: {a} algorithms (supported 2..=10)"
        )));
    }
    Ok(table[a - 2])
}

/// Critical difference of average ranks for `a` algorithms over `n` rows.
pub fn nemenyi_cd(a: usize, n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(DriftlabError::InsufficientData("no rows".into()));
    }
    let q = nemenyi_q(a, alpha)?;
    let af = a as f64;
    Ok(q * (af * (af + 1.0) / (6.0 * n as f64)).sqrt())
}
