//! Validation-set score matrices: class-mean similarity (`W`, `Q`) and
//! confusion (`Z`, `R`).

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::domain::Label;
use crate::error::{LccError, Result};

/// Mean of the score rows belonging to each true label. Row `i` of the result
/// is the mean vector of class `i`; the number of classes is `scores.ncols()`.
pub fn mean_vectors(scores: ArrayView2<'_, f64>, labels: &[Label]) -> Result<Array2<f64>> {
    let l = scores.ncols();
    if scores.nrows() != labels.len() {
        return Err(LccError::LengthMismatch {
            expected: scores.nrows(),
            found: labels.len(),
        });
    }
    let mut sums = Array2::<f64>::zeros((l, l));
    let mut counts = vec![0usize; l];
    for (row, &y) in scores.rows().into_iter().zip(labels) {
        if y >= l {
            return Err(LccError::LabelOutOfRange {
                label: y,
                class_count: l,
            });
        }
        let mut acc = sums.row_mut(y);
        acc += &row;
        counts[y] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(LccError::MissingClass(c));
    }
    for (mut row, n) in sums.rows_mut().into_iter().zip(counts) {
        row /= n as f64;
    }
    Ok(sums)
}

/// Mean-squared distance between class means (`w`) and its normalized
/// similarity `q = 1 - w / max(w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrices {
    pub means: Array2<f64>,
    pub w: Array2<f64>,
    pub q: Array2<f64>,
}

/// `w_ij = (1/l) * sum_k (U_ik - U_jk)^2`, then `q_ij = 1 - w_ij / max(W)`.
///
/// The distance is the mean of squared coordinate differences, not its square
/// root.
pub fn similarity_matrix(means: ArrayView2<'_, f64>) -> Result<SimilarityMatrices> {
    let l = means.nrows();
    if l < 2 {
        return Err(LccError::TooFewClasses(l));
    }
    let width = means.ncols() as f64;
    let mut w = Array2::<f64>::zeros((l, l));
    for i in 0..l {
        for j in (i + 1)..l {
            let d: f64 = means
                .row(i)
                .iter()
                .zip(means.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / width;
            w[[i, j]] = d;
            w[[j, i]] = d;
        }
    }
    let max = w.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(LccError::DegenerateMeans);
    }
    let q = w.mapv(|v| 1.0 - v / max);
    Ok(SimilarityMatrices {
        means: means.to_owned(),
        w,
        q,
    })
}

/// Counts `z[true][predicted]` and row-normalized rates `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrices {
    pub z: Array2<u64>,
    pub r: Array2<f64>,
}

impl ConfusionMatrices {
    /// Fraction of samples on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.z.sum();
        if total == 0 {
            return 0.0;
        }
        let hits: u64 = self.z.diag().sum();
        hits as f64 / total as f64
    }
}

/// Rows of classes absent from `true_labels` stay all-zero in `r`.
pub fn confusion_matrix(true_labels: &[Label], predicted: &[Label], l: usize) -> Result<ConfusionMatrices> {
    if true_labels.len() != predicted.len() {
        return Err(LccError::LengthMismatch {
            expected: true_labels.len(),
            found: predicted.len(),
        });
    }
    let mut z = Array2::<u64>::zeros((l, l));
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if let Some(&label) = [t, p].iter().find(|&&v| v >= l) {
            return Err(LccError::LabelOutOfRange { label, class_count: l });
        }
        z[[t, p]] += 1;
    }
    let mut r = Array2::<f64>::zeros((l, l));
    for i in 0..l {
        let total: u64 = z.row(i).sum();
        if total > 0 {
            for j in 0..l {
                r[[i, j]] = z[[i, j]] as f64 / total as f64;
            }
        }
    }
    Ok(ConfusionMatrices { z, r })
}

/// Writes a square matrix as CSV: a header `label,<names...>` followed by one
/// row per label, prefixed with its name.
pub fn write_matrix_csv<W: Write, T: ToString>(
    out: W,
    matrix: ArrayView2<'_, T>,
    label_names: &[String],
) -> Result<()> {
    if matrix.nrows() != label_names.len() || matrix.ncols() != label_names.len() {
        return Err(LccError::LengthMismatch {
            expected: label_names.len(),
            found: matrix.nrows(),
        });
    }
    let io = |e: csv::Error| LccError::MalformedDocument(e.to_string());
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend(label_names.iter().cloned());
    writer.write_record(&header).map_err(io)?;
    for (name, row) in label_names.iter().zip(matrix.rows()) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(ToString::to_string));
        writer.write_record(&record).map_err(io)?;
    }
    writer.flush().map_err(|e| LccError::MalformedDocument(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn singleton_means_are_the_rows() {
        let scores = array![[1.0, 0.0], [0.0, 1.0]];
        let means = mean_vectors(scores.view(), &[0, 1]).unwrap();
        assert_eq!(means, scores);
    }

    #[test]
    fn midpoint_mean() {
        let scores = array![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
        let means = mean_vectors(scores.view(), &[0, 0, 1]).unwrap();
        assert_eq!(means.row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn mean_requires_every_class() {
        let scores = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(mean_vectors(scores.view(), &[0, 0]), Err(LccError::MissingClass(1)));
    }

    #[test]
    fn two_class_similarity_by_hand() {
        // w01 = ((1-0)^2 + (0-1)^2) / 2 = 1
        let m = similarity_matrix(array![[1.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert_eq!(m.w[[0, 1]], 1.0);
        assert_eq!(m.q[[0, 1]], 0.0);
        assert_eq!(m.q[[0, 0]], 1.0);
        assert_eq!(m.q[[1, 1]], 1.0);
    }

    #[test]
    fn identical_means_are_degenerate() {
        let err = similarity_matrix(array![[0.5, 0.5], [0.5, 0.5]].view()).unwrap_err();
        assert_eq!(err, LccError::DegenerateMeans);
    }

    #[test]
    fn single_class_rejected() {
        assert_eq!(similarity_matrix(array![[1.0]].view()), Err(LccError::TooFewClasses(1)));
    }

    #[test]
    fn confusion_by_hand() {
        let m = confusion_matrix(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(m.z, array![[1, 1], [0, 1]]);
        assert_eq!(m.r, array![[0.5, 0.5], [0.0, 1.0]]);
    }

    #[test]
    fn perfect_predictor_gives_identity() {
        let labels = [0, 1, 2, 2, 1];
        let m = confusion_matrix(&labels, &labels, 3).unwrap();
        assert_eq!(m.r, Array2::<f64>::eye(3));
        assert_eq!(m.accuracy(), 1.0);
    }

    #[test]
    fn absent_class_row_stays_zero() {
        let m = confusion_matrix(&[0, 0], &[0, 1], 3).unwrap();
        assert_eq!(m.r.row(2).to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(
            confusion_matrix(&[0], &[0, 1], 2),
            Err(LccError::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion_matrix(&[0, 3], &[0, 1], 2),
            Err(LccError::LabelOutOfRange { label: 3, .. })
        ));
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        let names = vec!["cat".to_string(), "dog".to_string()];
        write_matrix_csv(&mut buf, array![[1.0, 0.2], [0.2, 1.0]].view(), &names).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "label,cat,dog\ncat,1,0.2\ndog,0.2,1\n");
    }
}
