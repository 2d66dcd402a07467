//! Kernel SVM on precomputed kernel matrices.

pub mod cv;
pub mod metrics;
pub mod smo;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate_grid, cross_validate_values, stratified_folds, CvReport, GridSpec};
pub use metrics::{auc_binary, roc_auc, Averaging};
pub use smo::{train, BinaryModel, SmoParams};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::Matrix;

/// Sorted distinct labels.
pub fn class_labels(labels: &[i64]) -> Vec<i64> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// One machine for two classes (positive = larger label), one-vs-rest
/// machines otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kernel: KernelSpec,
    /// Factor applied to inner products before the kernel.
    pub gram_scale: f64,
    pub c_param: f64,
    pub class_labels: Vec<i64>,
    pub machines: Vec<BinaryModel>,
}

pub(crate) fn machine_targets(labels: &[i64], classes: &[i64]) -> Vec<Vec<f64>> {
    let signed = |positive: i64| labels.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect();
    if classes.len() == 2 {
        vec![signed(classes[1])]
    } else {
        classes.iter().map(|&c| signed(c)).collect()
    }
}

pub(crate) fn train_machines(kernel: &Matrix, labels: &[i64], classes: &[i64], c_param: f64, params: SmoParams) -> Result<Vec<BinaryModel>> {
    machine_targets(labels, classes)
        .iter()
        .map(|targets| smo::train_with(kernel, targets, c_param, params))
        .collect()
}

impl TrainedModel {
    pub fn fit(kernel_matrix: &Matrix, labels: &[i64], c_param: f64, kernel: KernelSpec, gram_scale: f64) -> Result<Self> {
        if labels.len() != kernel_matrix.rows() {
            return Err(Error::DimensionMismatch(format!("{} labels for a {}-sample kernel", labels.len(), kernel_matrix.rows())));
        }
        let classes = class_labels(labels);
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }
        let machines = train_machines(kernel_matrix, labels, &classes, c_param, SmoParams::default())?;
        Ok(TrainedModel { kernel, gram_scale, c_param, class_labels: classes, machines })
    }

    /// `m × machines` decision scores for kernel rows `K(x_test, x_train)`.
    pub fn decision_scores(&self, kernel_rows: &Matrix) -> Result<Matrix> {
        let columns: Vec<Vec<f64>> = self.machines.iter().map(|m| m.predict(kernel_rows)).collect::<Result<_>>()?;
        Ok(Matrix::from_fn(kernel_rows.rows(), columns.len(), |i, j| columns[j][i]))
    }

    pub fn predict_labels(&self, kernel_rows: &Matrix) -> Result<Vec<i64>> {
        let scores = self.decision_scores(kernel_rows)?;
        Ok((0..scores.rows())
            .map(|i| {
                if self.class_labels.len() == 2 {
                    self.class_labels[usize::from(scores.get(i, 0) > 0.0)]
                } else {
                    let best = (0..scores.cols()).max_by(|&a, &b| scores.get(i, a).total_cmp(&scores.get(i, b))).unwrap_or(0);
                    self.class_labels[best]
                }
            })
            .collect())
    }

    pub fn support_count(&self) -> usize {
        let mut all: Vec<usize> = self.machines.iter().flat_map(|m| m.support_indices.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }
}
