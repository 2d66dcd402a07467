//! Stratified k-fold cross-validation with a grid search over C and a kernel
//! parameter (polynomial degree, or RBF width when a sigma grid is given),
//! all built from a Gram matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc_binary, roc_auc, Averaging};
use super::{class_labels, train_machines, SmoParams};
use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::kernel::KernelSpec;
use crate::linalg::rng::domain;
use crate::linalg::{MaskRng, Matrix};

/// Fold shuffles use `MaskRng::new(seed, FOLDS, 0)` with this default seed.
pub const DEFAULT_FOLD_SEED: u64 = 20_231_005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub c_grid: Vec<f64>,
    pub degree_grid: Vec<u32>,
    /// Polynomial offset `v`.
    pub offset: f64,
    /// Non-empty switches the search from polynomial degrees to RBF widths.
    pub sigma_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// `None` picks micro averaging for balanced and macro for imbalanced classes.
    pub averaging: Option<Averaging>,
    /// Divide inner products by the mean Gram diagonal before the kernel.
    pub normalize_gram: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            c_grid: (-4..=10).map(|e| 2f64.powi(e)).collect(),
            degree_grid: (1..=5).collect(),
            offset: 1.0,
            sigma_grid: Vec::new(),
            folds: 5,
            seed: DEFAULT_FOLD_SEED,
            averaging: None,
            normalize_gram: true,
        }
    }
}

impl GridSpec {
    pub fn combinations(&self) -> usize {
        self.c_grid.len() * self.kernels().len()
    }

    /// Candidate kernels in search order.
    pub fn kernels(&self) -> Vec<KernelSpec> {
        if self.sigma_grid.is_empty() {
            self.degree_grid.iter().map(|&degree| KernelSpec::Polynomial { offset: self.offset, degree }).collect()
        } else {
            self.sigma_grid.iter().map(|&sigma| KernelSpec::Rbf { sigma }).collect()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() || self.kernels().is_empty() {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Config(format!("C grid value {c} is not positive")));
        }
        for kernel in self.kernels() {
            kernel.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub best_c: f64,
    pub best_kernel: KernelSpec,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub averaging: Averaging,
    pub gram_scale: f64,
    pub evaluated: usize,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per class, indices are shuffled and dealt round-robin into `folds`
/// buckets, continuing the deal across classes. Folds come back sorted.
pub fn stratified_folds(labels: &[i64], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut rng = MaskRng::new(seed, domain::FOLDS, 0);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for class in class_labels(labels) {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::Stratification { label: class, count: members.len(), folds });
        }
        rng.shuffle(&mut members);
        for idx in members {
            out[next % folds].push(idx);
            next += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// Gram scale used when `normalize_gram` is set.
pub fn gram_scale(gram: &Matrix) -> f64 {
    let diag = gram.diagonal();
    let mean = diag.iter().sum::<f64>() / diag.len().max(1) as f64;
    if mean > 0.0 {
        1.0 / mean
    } else {
        1.0
    }
}

pub(crate) fn resolve_averaging(labels: &[i64], requested: Option<Averaging>) -> Averaging {
    requested.unwrap_or_else(|| {
        let classes = class_labels(labels);
        let counts: Vec<usize> = classes.iter().map(|c| labels.iter().filter(|l| *l == c).count()).collect();
        let (min, max) = (counts.iter().min().copied().unwrap_or(0), counts.iter().max().copied().unwrap_or(0));
        if max - min <= 1 {
            Averaging::Micro
        } else {
            Averaging::Macro
        }
    })
}

struct FoldData {
    train_kernel: Matrix,
    test_rows: Matrix,
    train_labels: Vec<i64>,
    test_labels: Vec<i64>,
}

fn split(kernel: &Matrix, labels: &[i64], test: &[usize]) -> FoldData {
    let mut in_test = vec![false; labels.len()];
    for &i in test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..labels.len()).filter(|&i| !in_test[i]).collect();
    FoldData {
        train_kernel: kernel.select(&train, &train),
        test_rows: kernel.select(test, &train),
        train_labels: train.iter().map(|&i| labels[i]).collect(),
        test_labels: test.iter().map(|&i| labels[i]).collect(),
    }
}

fn fold_auc(fold: &FoldData, classes: &[i64], c: f64, averaging: Averaging) -> Result<f64> {
    let machines = train_machines(&fold.train_kernel, &fold.train_labels, classes, c, SmoParams::default())?;
    if classes.len() == 2 {
        let scores = machines[0].predict(&fold.test_rows)?;
        let positive: Vec<bool> = fold.test_labels.iter().map(|&l| l == classes[1]).collect();
        return auc_binary(&scores, &positive);
    }
    let columns: Vec<Vec<f64>> = machines.iter().map(|m| m.predict(&fold.test_rows)).collect::<Result<_>>()?;
    let scores = Matrix::from_fn(fold.test_rows.rows(), classes.len(), |i, j| columns[j][i]);
    let index: Vec<usize> = fold
        .test_labels
        .iter()
        .map(|l| classes.binary_search(l).expect("test label among training classes"))
        .collect();
    roc_auc(&scores, &index, averaging)
}

/// Fold AUCs of every C on one precomputed kernel: `result[c][fold]`.
pub fn evaluate_kernel(kernel: &Matrix, labels: &[i64], c_grid: &[f64], folds: &[Vec<usize>], averaging: Averaging) -> Result<Vec<Vec<f64>>> {
    let classes = class_labels(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let fold_data: Vec<FoldData> = folds.iter().map(|test| split(kernel, labels, test)).collect();
    let tasks: Vec<(usize, usize)> = (0..c_grid.len()).flat_map(|c| (0..folds.len()).map(move |f| (c, f))).collect();
    let aucs: Vec<f64> = tasks
        .par_iter()
        .map(|&(c, f)| fold_auc(&fold_data[f], &classes, c_grid[c], averaging))
        .collect::<Result<_>>()?;
    Ok(aucs.chunks(folds.len()).map(<[f64]>::to_vec).collect())
}

/// Grid search by mean fold AUC; ties go to the earlier C, then the earlier
/// kernel parameter.
pub fn cross_validate_grid(gram: &GramMatrix, labels: &[i64], grid: &GridSpec) -> Result<CvReport> {
    cross_validate_values(gram.values(), labels, grid)
}

/// [`cross_validate_grid`] on a bare inner-product matrix.
pub fn cross_validate_values(gram: &Matrix, labels: &[i64], grid: &GridSpec) -> Result<CvReport> {
    grid.validate()?;
    if labels.len() != gram.rows() || gram.rows() != gram.cols() {
        return Err(Error::DimensionMismatch(format!("{} labels for a {:?} gram", labels.len(), gram.shape())));
    }
    let folds = stratified_folds(labels, grid.folds, grid.seed)?;
    let averaging = resolve_averaging(labels, grid.averaging);
    let scale = if grid.normalize_gram { gram_scale(gram) } else { 1.0 };
    let scaled = gram.scale(scale);

    let kernels = grid.kernels();
    // table[kernel][c] = fold aucs
    let mut table = Vec::with_capacity(kernels.len());
    for spec in &kernels {
        let kernel = spec.from_gram(&scaled)?;
        table.push(evaluate_kernel(&kernel, labels, &grid.c_grid, &folds, averaging)?);
    }

    let mut best: Option<(f64, KernelSpec, Vec<f64>, f64, f64)> = None;
    for (ci, &c) in grid.c_grid.iter().enumerate() {
        for (ki, spec) in kernels.iter().enumerate() {
            let aucs = &table[ki][ci];
            let (mean, std) = mean_std(aucs);
            if best.as_ref().is_none_or(|b| mean > b.3) {
                best = Some((c, *spec, aucs.clone(), mean, std));
            }
        }
    }
    let (best_c, best_kernel, fold_aucs, mean_auc, std_auc) = best.expect("non-empty grid");
    Ok(CvReport { best_c, best_kernel, fold_aucs, mean_auc, std_auc, averaging, gram_scale: scale, evaluated: grid.combinations() })
}
