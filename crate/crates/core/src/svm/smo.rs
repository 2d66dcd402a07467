//! Sequential minimal optimization for the C-SVM dual on a precomputed kernel.
//!
//! Minimizes `½ αᵀQα − 1ᵀα` subject to `0 ≤ α ≤ C` and `yᵀα = 0`, with
//! `Q_ij = y_i y_j K_ij`. Each step takes `i = argmax_{I_up} −y_t G_t` and
//! picks `j` in `I_low` by the largest second-order decrease `b²/a`, as in
//! libsvm (lowest index on ties), then solves the two-variable subproblem
//! analytically. The solver stops when `m(α) − M(α) < tolerance`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoParams {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams { tolerance: 1e-3, max_iterations: 10_000_000 }
    }
}

/// Two-class kernel machine: `score(x) = Σ α_i y_i K(x, x_i) + bias`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub alphas: Vec<f64>,
    pub targets: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub c_param: f64,
    pub iterations: usize,
    pub objective: f64,
}

impl BinaryModel {
    /// Decision scores for rows of `K(x_test, x_train)`.
    pub fn predict(&self, kernel_rows: &Matrix) -> Result<Vec<f64>> {
        if kernel_rows.cols() != self.alphas.len() {
            return Err(Error::DimensionMismatch(format!(
                "kernel rows have {} columns, model was trained on {} samples",
                kernel_rows.cols(),
                self.alphas.len()
            )));
        }
        let coef: Vec<(usize, f64)> =
            self.support_indices.iter().map(|&i| (i, self.alphas[i] * self.targets[i])).collect();
        Ok((0..kernel_rows.rows())
            .map(|t| {
                let row = kernel_rows.row(t);
                coef.iter().map(|&(i, c)| c * row[i]).sum::<f64>() + self.bias
            })
            .collect())
    }

    /// `Σ α_i y_i`, zero at any feasible point.
    pub fn dual_residual(&self) -> f64 {
        self.alphas.iter().zip(&self.targets).map(|(a, y)| a * y).sum()
    }
}

/// Dual objective `Σα − ½ αᵀQα` (maximization form).
pub fn dual_objective(kernel: &Matrix, targets: &[f64], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        let row = kernel.row(i);
        let mut acc = 0.0;
        for j in 0..n {
            acc += alphas[j] * targets[j] * row[j];
        }
        quad += alphas[i] * targets[i] * acc;
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

fn check_inputs(kernel: &Matrix, targets: &[f64], c_param: f64) -> Result<()> {
    let n = targets.len();
    if kernel.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("kernel is {:?}, expected {n}x{n}", kernel.shape())));
    }
    if !(c_param.is_finite() && c_param > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {c_param}")));
    }
    if let Some(bad) = targets.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidLabels(format!("binary targets must be +1 or -1, got {bad}")));
    }
    if !(targets.contains(&1.0) && targets.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn train(kernel: &Matrix, targets: &[f64], c_param: f64) -> Result<BinaryModel> {
    Solver::new(kernel, targets, c_param, SmoParams::default())?.run(None)
}

pub fn train_with(kernel: &Matrix, targets: &[f64], c_param: f64, params: SmoParams) -> Result<BinaryModel> {
    Solver::new(kernel, targets, c_param, params)?.run(None)
}

/// Like [`train`], also returning the dual objective after every step.
pub fn train_traced(kernel: &Matrix, targets: &[f64], c_param: f64) -> Result<(BinaryModel, Vec<f64>)> {
    let mut trace = Vec::new();
    let model = Solver::new(kernel, targets, c_param, SmoParams::default())?.run(Some(&mut trace))?;
    Ok((model, trace))
}

struct Solver<'a> {
    kernel: &'a Matrix,
    y: &'a [f64],
    c: f64,
    params: SmoParams,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(kernel: &'a Matrix, y: &'a [f64], c: f64, params: SmoParams) -> Result<Self> {
        check_inputs(kernel, y, c)?;
        let n = y.len();
        Ok(Solver { kernel, y, c, params, alpha: vec![0.0; n], grad: vec![-1.0; n] })
    }

    #[inline]
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.kernel.get(i, j)
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 { self.alpha[t] < self.c } else { self.alpha[t] > 0.0 }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 { self.alpha[t] > 0.0 } else { self.alpha[t] < self.c }
    }

    fn select_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.y.len();
        let mut i = None;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            let v = -self.y[t] * self.grad[t];
            if self.in_up(t) && v > g_max {
                g_max = v;
                i = Some(t);
            }
        }
        let i = i?;
        let q_ii = self.kernel.get(i, i);
        let row_i = self.kernel.row(i);
        let mut j = None;
        let mut g_min = f64::INFINITY;
        let mut best = f64::INFINITY;
        for (t, &k_it) in row_i.iter().enumerate() {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.y[t] * self.grad[t];
            g_min = g_min.min(v);
            let b = g_max - v;
            if b > 0.0 {
                let mut a = q_ii + self.kernel.get(t, t) - 2.0 * k_it;
                if a <= 0.0 {
                    a = TAU;
                }
                let gain = -(b * b) / a;
                if gain < best {
                    best = gain;
                    j = Some(t);
                }
            }
        }
        if !g_min.is_finite() {
            return None;
        }
        // With no strictly violating partner the gap is already non-positive.
        Some((i, j.unwrap_or(i), g_max - g_min))
    }

    fn objective(&self) -> f64 {
        // −(½ αᵀQα − 1ᵀα) = −½ αᵀ(G − 1)
        -0.5 * self.alpha.iter().zip(&self.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    }

    fn step(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let q_ii = self.q(i, i);
        let q_jj = self.q(j, j);
        let q_ij = self.q(i, j);
        let (mut a_i, mut a_j) = (old_i, old_j);

        if self.y[i] != self.y[j] {
            let mut quad = q_ii + q_jj + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = a_i - a_j;
            a_i += delta;
            a_j += delta;
            if diff > 0.0 {
                if a_j < 0.0 {
                    a_j = 0.0;
                    a_i = diff;
                }
            } else if a_i < 0.0 {
                a_i = 0.0;
                a_j = -diff;
            }
            if diff > 0.0 {
                if a_i > c {
                    a_i = c;
                    a_j = c - diff;
                }
            } else if a_j > c {
                a_j = c;
                a_i = c + diff;
            }
        } else {
            let mut quad = q_ii + q_jj - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = a_i + a_j;
            a_i -= delta;
            a_j += delta;
            if sum > c {
                if a_i > c {
                    a_i = c;
                    a_j = sum - c;
                }
            } else if a_j < 0.0 {
                a_j = 0.0;
                a_i = sum;
            }
            if sum > c {
                if a_j > c {
                    a_j = c;
                    a_i = sum - c;
                }
            } else if a_i < 0.0 {
                a_i = 0.0;
                a_j = sum;
            }
        }

        self.alpha[i] = a_i;
        self.alpha[j] = a_j;
        let d_i = a_i - old_i;
        let d_j = a_j - old_j;
        let (y_i, y_j) = (self.y[i], self.y[j]);
        let row_i = self.kernel.row(i);
        let row_j = self.kernel.row(j);
        for t in 0..self.grad.len() {
            self.grad[t] += self.y[t] * (y_i * row_i[t] * d_i + y_j * row_j[t] * d_j);
        }
    }

    fn bias(&self) -> f64 {
        let mut upper = f64::INFINITY;
        let mut lower = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..self.y.len() {
            let yg = self.y[t] * self.grad[t];
            if self.alpha[t] >= self.c {
                if self.y[t] < 0.0 { upper = upper.min(yg) } else { lower = lower.max(yg) }
            } else if self.alpha[t] <= 0.0 {
                if self.y[t] > 0.0 { upper = upper.min(yg) } else { lower = lower.max(yg) }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        let rho = if free > 0 { free_sum / free as f64 } else { (upper + lower) / 2.0 };
        -rho
    }

    fn run(mut self, mut trace: Option<&mut Vec<f64>>) -> Result<BinaryModel> {
        let mut iterations = 0;
        while let Some((i, j, gap)) = self.select_pair() {
            if gap < self.params.tolerance {
                break;
            }
            if iterations >= self.params.max_iterations {
                return Err(Error::NoConvergence { iterations });
            }
            self.step(i, j);
            iterations += 1;
            if let Some(trace) = trace.as_deref_mut() {
                trace.push(self.objective());
            }
        }
        let bias = self.bias();
        let objective = self.objective();
        let support_indices = (0..self.alpha.len()).filter(|&t| self.alpha[t] > 0.0).collect();
        Ok(BinaryModel {
            alphas: self.alpha,
            targets: self.y.to_vec(),
            bias,
            support_indices,
            c_param: self.c,
            iterations,
            objective,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rng::domain;
    use crate::linalg::MaskRng;

    fn linear_kernel(points: &Matrix) -> Matrix {
        points.matmul_transpose(points).unwrap()
    }

    #[test]
    fn symmetric_two_point_problem() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let model = train(&linear_kernel(&x), &[1.0, -1.0], 1.0).unwrap();
        assert_eq!(model.support_indices, vec![0, 1]);
        assert!(model.bias.abs() < 1e-12);
        assert!((model.alphas[0] - 0.5).abs() < 1e-12);
        let at_zero = model.predict(&Matrix::zeros(1, 2)).unwrap();
        assert!(at_zero[0].abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_row_scores_bias() {
        let x = Matrix::from_rows(&[vec![2.0], vec![1.5], vec![-1.0]]).unwrap();
        let model = train(&linear_kernel(&x), &[1.0, 1.0, -1.0], 10.0).unwrap();
        assert_eq!(model.predict(&Matrix::zeros(1, 3)).unwrap()[0], model.bias);
        assert!(model.predict(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn separable_support_vectors_sit_on_margin() {
        let mut rng = MaskRng::new(5, domain::TESTING, 0);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let shift = if i % 2 == 0 { 3.0 } else { -3.0 };
                vec![shift + 0.5 * rng.normal(), rng.normal()]
            })
            .collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let k = linear_kernel(&x);
        let model = train(&k, &y, 1e3).unwrap();
        let scores = model.predict(&k).unwrap();
        for &i in &model.support_indices {
            assert!((scores[i] * y[i]) >= 1.0 - 1e-3, "margin violated at {i}: {}", scores[i] * y[i]);
        }
        for i in 0..20 {
            assert!(scores[i] * y[i] > 0.0);
        }
    }

    #[test]
    fn dual_constraint_and_box_hold() {
        for seed in 0..5 {
            let mut rng = MaskRng::new(seed, domain::TESTING, 3);
            let x = rng.normal_matrix(30, 3);
            let y: Vec<f64> = (0..30).map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 }).collect();
            if !(y.contains(&1.0) && y.contains(&-1.0)) {
                continue;
            }
            let model = train(&linear_kernel(&x), &y, 0.5).unwrap();
            assert!(model.dual_residual().abs() < 1e-6);
            assert!(model.alphas.iter().all(|&a| (0.0..=0.5).contains(&a)));
        }
    }

    #[test]
    fn input_errors() {
        let k = Matrix::identity(2);
        assert!(matches!(train(&k, &[1.0, 1.0], 1.0), Err(Error::SingleClass)));
        assert!(matches!(train(&k, &[1.0, 0.0], 1.0), Err(Error::InvalidLabels(_))));
        assert!(train(&k, &[1.0, -1.0], 0.0).is_err());
        assert!(train(&Matrix::identity(3), &[1.0, -1.0], 1.0).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut rng = MaskRng::new(1, domain::TESTING, 0);
        let x = rng.normal_matrix(40, 2);
        let y: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let params = SmoParams { tolerance: 1e-3, max_iterations: 1 };
        assert!(matches!(train_with(&linear_kernel(&x), &y, 10.0, params), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn objective_never_decreases() {
        let mut rng = MaskRng::new(2, domain::TESTING, 0);
        let x = rng.normal_matrix(40, 4);
        let y: Vec<f64> = (0..40).map(|i| if x.get(i, 0) + 0.3 * rng.normal() > 0.0 { 1.0 } else { -1.0 }).collect();
        let k = linear_kernel(&x).map(|v| (v + 1.0).powi(2));
        let (model, trace) = train_traced(&k, &y, 2.0).unwrap();
        assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0)));
        assert!((model.objective - dual_objective(&k, &y, &model.alphas)).abs() < 1e-8 * model.objective.abs().max(1.0));
    }
}
