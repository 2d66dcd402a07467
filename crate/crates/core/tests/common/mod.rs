//! Independent reference implementations for the test targets. Nothing here
//! calls into the library's arithmetic; matrices come in and out as plain
//! row-major data.

#![allow(dead_code, clippy::needless_range_loop)]

use flake_core::linalg::rng::domain;
use flake_core::linalg::MaskRng;
use flake_core::svm::Averaging;
use flake_core::{DataMatrix, Matrix};

pub fn rng(stream: u64) -> MaskRng {
    MaskRng::new(0x0AC1E, domain::TESTING, stream)
}

pub fn gaussian_data(rng: &mut MaskRng, n: usize, f: usize) -> DataMatrix {
    DataMatrix::unlabeled(rng.normal_matrix(n, f))
}

/// `A · Bᵀ` by the textbook triple loop.
pub fn naive_outer(a: &Matrix, b: &Matrix) -> Vec<Vec<f64>> {
    assert_eq!(a.cols(), b.cols());
    (0..a.rows())
        .map(|i| {
            (0..b.rows())
                .map(|j| {
                    let mut acc = 0.0;
                    for t in 0..a.cols() {
                        acc += a.get(i, t) * b.get(j, t);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn rel_frobenius(actual: &Matrix, expected: &[Vec<f64>]) -> f64 {
    assert_eq!(actual.rows(), expected.len());
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (i, row) in expected.iter().enumerate() {
        assert_eq!(row.len(), actual.cols());
        for (j, &e) in row.iter().enumerate() {
            diff += (actual.get(i, j) - e).powi(2);
            norm += e * e;
        }
    }
    if norm == 0.0 {
        diff.sqrt()
    } else {
        (diff / norm).sqrt()
    }
}

pub fn max_abs(actual: &Matrix, expected: &[Vec<f64>]) -> f64 {
    expected
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &e)| (i, j, e)))
        .map(|(i, j, e)| (actual.get(i, j) - e).abs())
        .fold(0.0, f64::max)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..n {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// `(NᵀN)⁻¹ Nᵀ` for a tall full-column-rank `N`, column by column.
pub fn pinv_normal_equations(n: &Matrix) -> Vec<Vec<f64>> {
    let (k, f) = n.shape();
    let ntn: Vec<Vec<f64>> = (0..f).map(|i| (0..f).map(|j| (0..k).map(|t| n.get(t, i) * n.get(t, j)).sum()).collect()).collect();
    let mut out = vec![vec![0.0; k]; f];
    for col in 0..k {
        let rhs: Vec<f64> = (0..f).map(|i| n.get(col, i)).collect();
        let x = solve(ntn.clone(), rhs).expect("full column rank");
        for i in 0..f {
            out[i][col] = x[i];
        }
    }
    out
}

/// Dual objective `Σα − ½ Σ_ij α_i α_j y_i y_j K_ij`.
pub fn dual_value(kernel: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Exact maximum of the C-SVM dual by enumerating which variables sit at 0,
/// at C, or strictly inside. For each assignment the free variables solve
/// the equality-constrained stationarity system; infeasible candidates are
/// discarded. Requires a positive definite kernel.
pub fn svm_dual_exhaustive(kernel: &[Vec<f64>], y: &[f64], c: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    assert!(n <= 10, "3^n enumeration");
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i][j];
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    for code in 0..3usize.pow(n as u32) {
        // 0: at zero, 1: at C, 2: free.
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let bound_y: f64 = (0..n).filter(|&i| state[i] == 1).map(|i| y[i] * c).sum();
        if free.is_empty() {
            if bound_y.abs() > 1e-12 {
                continue;
            }
        } else {
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut b = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[r][s] = q(i, j);
                }
                a[r][m] = y[i];
                a[m][r] = y[i];
                b[r] = 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q(i, j) * c).sum::<f64>();
            }
            b[m] = -bound_y;
            let Some(x) = solve(a, b) else { continue };
            if free.iter().enumerate().any(|(r, _)| x[r] < -1e-12 || x[r] > c + 1e-12) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = x[r].clamp(0.0, c);
            }
        }
        let value = dual_value(kernel, y, &alpha);
        if value > best.0 {
            best = (value, alpha);
        }
    }
    best
}

/// Fraction of (positive, negative) pairs ordered correctly, ties one half.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

pub fn pairwise_roc_auc(scores: &Matrix, labels: &[usize], averaging: Averaging) -> f64 {
    let (n, classes) = scores.shape();
    match averaging {
        Averaging::Macro => {
            let mut total = 0.0;
            for c in 0..classes {
                let column: Vec<f64> = (0..n).map(|i| scores.get(i, c)).collect();
                let positive: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                total += pairwise_auc(&column, &positive);
            }
            total / classes as f64
        }
        Averaging::Micro => {
            let mut pooled = Vec::new();
            let mut positive = Vec::new();
            for i in 0..n {
                for c in 0..classes {
                    pooled.push(scores.get(i, c));
                    positive.push(labels[i] == c);
                }
            }
            pairwise_auc(&pooled, &positive)
        }
    }
}

/// Squared-exponential kernel on rows; positive definite for distinct points.
pub fn rbf_rows(points: &Matrix, width: f64) -> Vec<Vec<f64>> {
    let n = points.rows();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d2: f64 = (0..points.cols()).map(|t| (points.get(i, t) - points.get(j, t)).powi(2)).sum();
                    (-d2 / (2.0 * width * width)).exp()
                })
                .collect()
        })
        .collect()
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).expect("rectangular")
}
