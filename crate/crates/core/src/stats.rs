//! Rank-based comparison of several methods over several data splits:
//! average ranks, the Friedman statistic, the Iman-Davenport F statistic and
//! the two-tailed Bonferroni-Dunn critical difference.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{LccError, Result};

/// Per-split accuracies and their ranks (1 = best, ties share the mean rank).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    scores: Array2<f64>,
    ranks: Array2<f64>,
    method_names: Vec<String>,
}

impl RankTable {
    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.scores.view()
    }

    pub fn ranks(&self) -> ArrayView2<'_, f64> {
        self.ranks.view()
    }

    pub fn method_names(&self) -> &[String] {
        &self.method_names
    }

    pub fn split_count(&self) -> usize {
        self.ranks.nrows()
    }

    pub fn method_count(&self) -> usize {
        self.ranks.ncols()
    }

    /// `R_j`, the mean rank of each method over all splits.
    pub fn average_ranks(&self) -> Array1<f64> {
        self.ranks.mean_axis(Axis(0)).expect("table has rows")
    }
}

/// Ranks one row: higher score is better; tied scores get the mean of the
/// positions they occupy.
pub fn rank_row(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Rows are data splits, columns are methods.
pub fn compute_ranks(scores: Array2<f64>, method_names: Vec<String>) -> Result<RankTable> {
    let (rows, methods) = scores.dim();
    if rows < 2 || methods < 2 {
        return Err(LccError::DegenerateTable { rows, methods });
    }
    if method_names.len() != methods {
        return Err(LccError::LengthMismatch {
            expected: methods,
            found: method_names.len(),
        });
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(LccError::InvalidConfig("accuracy table contains non-finite values".into()));
    }
    let mut ranks = Array2::zeros((rows, methods));
    for (row, mut out) in scores.rows().into_iter().zip(ranks.rows_mut()) {
        let r = rank_row(&row.to_vec());
        out.assign(&Array1::from(r));
    }
    Ok(RankTable {
        scores,
        ranks,
        method_names,
    })
}

/// `chi2_F = 12N / (k(k+1)) * [sum_j R_j^2 - k(k+1)^2 / 4]`, `k = avg_ranks.len()`.
pub fn friedman_chi2(avg_ranks: &[f64], n: usize) -> f64 {
    let k = avg_ranks.len() as f64;
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    12.0 * n as f64 / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0)
}

/// `F_F = (N-1) chi2 / (N(k-1) - chi2)`.
pub fn iman_f(chi2: f64, k: usize, n: usize) -> Result<f64> {
    let capacity = n as f64 * (k as f64 - 1.0);
    let denominator = capacity - chi2;
    if denominator <= 0.0 {
        return Err(LccError::SingularDenominator { capacity, chi2 });
    }
    Ok((n as f64 - 1.0) * chi2 / denominator)
}

/// `CD = q_alpha * sqrt(k(k+1) / (6N))`.
pub fn critical_difference(q_alpha: f64, k: usize, n: usize) -> f64 {
    let k = k as f64;
    q_alpha * (k * (k + 1.0) / (6.0 * n as f64)).sqrt()
}

/// Upper-tail probability of the Friedman statistic (chi-square, `k-1` dof).
pub fn friedman_p_value(chi2: f64, k: usize) -> Option<f64> {
    let dist = ChiSquared::new(k as f64 - 1.0).ok()?;
    Some(dist.sf(chi2.max(0.0)))
}

/// Upper-tail probability of `F_F` under `F(k-1, (k-1)(N-1))`.
pub fn iman_p_value(f: f64, k: usize, n: usize) -> Option<f64> {
    let d1 = k as f64 - 1.0;
    let dist = FisherSnedecor::new(d1, d1 * (n as f64 - 1.0)).ok()?;
    Some(dist.sf(f.max(0.0)))
}

/// Two-tailed Bonferroni-Dunn critical values `q_alpha` for comparing against
/// a control, for `k = 2..=10` methods at `alpha = 0.05` and `0.10`.
const BONFERRONI_DUNN_05: [f64; 9] = [1.960, 2.241, 2.394, 2.498, 2.576, 2.638, 2.690, 2.734, 2.773];
const BONFERRONI_DUNN_10: [f64; 9] = [1.645, 1.960, 2.128, 2.241, 2.326, 2.394, 2.450, 2.498, 2.539];

/// Looks up `q_alpha`; `None` outside the bundled table.
pub fn bonferroni_dunn_q(k: usize, alpha: f64) -> Option<f64> {
    if !(2..=10).contains(&k) {
        return None;
    }
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &BONFERRONI_DUNN_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &BONFERRONI_DUNN_10
    } else {
        return None;
    };
    Some(table[k - 2])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    /// The row method has a significantly lower (better) average rank.
    Better,
    Worse,
    NotSignificant,
}

/// `result[a][b]` compares method `a` against method `b`.
pub fn significance_matrix(avg_ranks: &[f64], cd: f64) -> Vec<Vec<Significance>> {
    avg_ranks
        .iter()
        .map(|&ra| {
            avg_ranks
                .iter()
                .map(|&rb| {
                    if (ra - rb).abs() <= cd {
                        Significance::NotSignificant
                    } else if ra < rb {
                        Significance::Better
                    } else {
                        Significance::Worse
                    }
                })
                .collect()
        })
        .collect()
}

pub fn pairwise_significance(table: &RankTable, q_alpha: f64) -> Vec<Vec<Significance>> {
    let cd = critical_difference(q_alpha, table.method_count(), table.split_count());
    significance_matrix(table.average_ranks().as_slice().expect("contiguous"), cd)
}

/// Everything the statistical comparison produces, ready to serialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanReport {
    pub method_names: Vec<String>,
    pub splits: usize,
    pub average_ranks: Vec<f64>,
    pub chi2: f64,
    pub chi2_p_value: Option<f64>,
    /// Absent when every split ranks the methods identically (`chi2 = N(k-1)`).
    pub iman_f: Option<f64>,
    pub iman_p_value: Option<f64>,
    pub q_alpha: f64,
    pub critical_difference: f64,
    pub significance: Vec<Vec<Significance>>,
}

pub fn friedman_analysis(table: &RankTable, q_alpha: f64) -> FriedmanReport {
    let (n, k) = (table.split_count(), table.method_count());
    let average_ranks = table.average_ranks().to_vec();
    let chi2 = friedman_chi2(&average_ranks, n);
    let f = iman_f(chi2, k, n).ok();
    let cd = critical_difference(q_alpha, k, n);
    FriedmanReport {
        method_names: table.method_names().to_vec(),
        splits: n,
        chi2_p_value: friedman_p_value(chi2, k),
        iman_p_value: f.and_then(|f| iman_p_value(f, k, n)),
        iman_f: f,
        q_alpha,
        critical_difference: cd,
        significance: significance_matrix(&average_ranks, cd),
        average_ranks,
        chi2,
    }
}
