//! Dense linear algebra used by the masking scheme: economy SVD, the
//! Moore–Penrose left inverse, the symmetric square root of `N·Nᵀ`, seeded
//! full-rank and orthogonal matrices.
//!
//! Decompositions are delegated to `nalgebra`; everything else is plain
//! row-major arithmetic on [`Matrix`].

mod matrix;
pub mod rng;

use serde::{Deserialize, Serialize};

pub use matrix::Matrix;
pub use rng::MaskRng;

use crate::error::{Error, Result};

/// A full-rank draw must have `σ_min > RANK_TOLERANCE · σ_max`.
pub const RANK_TOLERANCE: f64 = 1e-8;

const SVD_MAX_ITERATIONS: usize = 10_000;
const FULL_RANK_ATTEMPTS: u64 = 8;

/// Economy-size singular value decomposition `m = u · diag(s) · vt`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let r = self.s.len();
        Matrix::from_fn(self.u.rows(), self.vt.cols(), |i, j| {
            (0..r).map(|l| self.u.get(i, l) * self.s[l] * self.vt.get(l, j)).sum()
        })
    }

    /// `σ_min / σ_max`, zero for an all-zero matrix.
    pub fn condition_ratio(&self) -> f64 {
        match (self.s.first(), self.s.last()) {
            (Some(&max), Some(&min)) if max > 0.0 => min / max,
            _ => 0.0,
        }
    }
}

/// Mask shape: `features` plaintext columns are lifted to `width` masked columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskDims {
    pub features: usize,
    pub width: usize,
}

impl MaskDims {
    pub fn new(features: usize, width: usize) -> Result<Self> {
        if features == 0 || width <= features {
            return Err(Error::InvalidMaskDims { features, width });
        }
        Ok(MaskDims { features, width })
    }

    /// `k = 2f`.
    pub fn doubled(features: usize) -> Result<Self> {
        MaskDims::new(features, features.saturating_mul(2))
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.is_empty() {
        return Err(Error::InvalidMatrix("svd of an empty matrix".into()));
    }
    let decomposition = m
        .to_nalgebra()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::NumericFailure(format!("svd did not converge within {SVD_MAX_ITERATIONS} iterations")))?;
    let u = decomposition.u.expect("u requested");
    let vt = decomposition.v_t.expect("v_t requested");
    let s = decomposition.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let u = Matrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let vt = Matrix::from_fn(order.len(), vt.ncols(), |i, j| vt[(order[i], j)]);
    let s = order.iter().map(|&i| s[i].max(0.0)).collect();
    Ok(SvdResult { u, s, vt })
}

fn full_column_rank_svd(n: &Matrix) -> Result<SvdResult> {
    if n.rows() < n.cols() {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let decomposition = svd(n)?;
    let ratio = decomposition.condition_ratio();
    if ratio <= RANK_TOLERANCE {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(decomposition)
}

/// Standard-normal `k × f` matrix of rank `f`, a pure function of `(seed, dims)`.
///
/// A draw failing the rank check is replaced by the draw of the next stream
/// index, up to eight attempts.
pub fn random_full_rank(seed: u64, dims: MaskDims) -> Result<Matrix> {
    let dims = MaskDims::new(dims.features, dims.width)?;
    let mut last_ratio = 0.0;
    for attempt in 0..FULL_RANK_ATTEMPTS {
        let mut rng = MaskRng::new(seed, rng::domain::MASK_MATRIX, attempt);
        let candidate = rng.normal_matrix(dims.width, dims.features);
        match full_column_rank_svd(&candidate) {
            Ok(_) => return Ok(candidate),
            Err(Error::RankDeficient { ratio }) => last_ratio = ratio,
            Err(other) => return Err(other),
        }
    }
    Err(Error::RankDeficient { ratio: last_ratio })
}

/// Moore–Penrose pseudoinverse `V · S⁻¹ · Uᵀ` of a full-column-rank matrix,
/// which is a left inverse: `pinv(n) · n = I`.
pub fn pseudo_inverse(n: &Matrix) -> Result<Matrix> {
    let SvdResult { u, s, vt } = full_column_rank_svd(n)?;
    let r = s.len();
    Ok(Matrix::from_fn(vt.cols(), u.rows(), |i, j| {
        (0..r).map(|l| vt.get(l, i) * u.get(j, l) / s[l]).sum()
    }))
}

/// `(n·nᵀ)^½ = U · S · Uᵀ` from the economy SVD of `n`.
///
/// Only the upper triangle is computed; the lower one is mirrored, so the
/// result is exactly symmetric.
pub fn sym_sqrt(n: &Matrix) -> Result<Matrix> {
    let SvdResult { u, s, .. } = full_column_rank_svd(n)?;
    let k = u.rows();
    let r = s.len();
    let mut out = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v: f64 = (0..r).map(|l| u.get(i, l) * s[l] * u.get(j, l)).sum();
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// Seeded `f × f` orthogonal matrix: the Q factor of a Gaussian matrix with
/// columns sign-normalized so that R has a positive diagonal.
pub fn random_orthogonal(seed: u64, f: usize) -> Result<Matrix> {
    if f == 0 {
        return Err(Error::InvalidMatrix("orthogonal matrix of order 0".into()));
    }
    let mut rng = MaskRng::new(seed, rng::domain::ORTHOGONAL, 0);
    let gaussian = rng.normal_matrix(f, f).to_nalgebra();
    let qr = gaussian.qr();
    let q = qr.q();
    let r = qr.r();
    Ok(Matrix::from_fn(f, f, |i, j| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    }))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let mut values: Vec<f64> = m.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// PSD up to `λ_min ≥ −tol · max(λ_max, 0)`.
pub fn is_psd(m: &Matrix, tol: f64) -> Result<bool> {
    let values = symmetric_eigenvalues(m)?;
    let (Some(&min), Some(&max)) = (values.first(), values.last()) else {
        return Ok(true);
    };
    Ok(min >= -tol * max.max(0.0))
}

pub fn determinant(m: &Matrix) -> f64 {
    m.to_nalgebra().determinant()
}
