//! Kernel matrices derived purely from inner products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `(xᵀy + offset)^degree`
    Polynomial { offset: f64, degree: u32 },
    /// `exp(−‖x − y‖² / (2σ²))`
    Rbf { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { offset, degree } => {
                if !(offset.is_finite() && offset >= 0.0) {
                    Err(Error::InvalidKernel(format!("polynomial offset must be >= 0, got {offset}")))
                } else if degree == 0 {
                    Err(Error::InvalidKernel("polynomial degree must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Rbf { sigma } => {
                if sigma.is_finite() && sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidKernel(format!("rbf sigma must be > 0, got {sigma}")))
                }
            }
        }
    }

    /// Kernel between two sample sets given their cross inner products and
    /// the squared norms of each set (needed only by the RBF kernel).
    pub fn from_inner_products(&self, cross: &Matrix, left_norms: &[f64], right_norms: &[f64]) -> Result<Matrix> {
        self.validate()?;
        if left_norms.len() != cross.rows() || right_norms.len() != cross.cols() {
            return Err(Error::DimensionMismatch("norm vectors do not match the cross product".into()));
        }
        Ok(match *self {
            KernelSpec::Linear => cross.clone(),
            KernelSpec::Polynomial { offset, degree } => polynomial(cross, offset, degree),
            KernelSpec::Rbf { sigma } => Matrix::from_fn(cross.rows(), cross.cols(), |i, j| {
                rbf_entry(left_norms[i], cross.get(i, j), right_norms[j], sigma)
            }),
        })
    }

    /// Square kernel matrix over the samples of a Gram matrix.
    pub fn from_gram(&self, gram: &Matrix) -> Result<Matrix> {
        let diag = gram.diagonal();
        self.from_inner_products(gram, &diag, &diag)
    }
}

fn polynomial(values: &Matrix, offset: f64, degree: u32) -> Matrix {
    let degree = degree as i32;
    values.map(|g| (g + offset).powi(degree))
}

fn rbf_entry(g_ii: f64, g_ij: f64, g_jj: f64, sigma: f64) -> f64 {
    let distance = (g_ii - 2.0 * g_ij + g_jj).max(0.0);
    (-distance / (2.0 * sigma * sigma)).exp()
}

/// Entrywise `(g_ij + v)^p`.
pub fn poly_kernel(gram: &GramMatrix, offset: f64, degree: u32) -> Result<Matrix> {
    KernelSpec::Polynomial { offset, degree }.from_gram(gram.values())
}

/// Entrywise `exp(−(g_ii − 2 g_ij + g_jj) / (2σ²))`.
pub fn rbf_kernel(gram: &GramMatrix, sigma: f64) -> Result<Matrix> {
    KernelSpec::Rbf { sigma }.from_gram(gram.values())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_identity_and_direct_formula() {
        let g = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let k = KernelSpec::Polynomial { offset: 0.0, degree: 1 }.from_gram(&g).unwrap();
        assert_eq!(k, g);
        let k2 = KernelSpec::Polynomial { offset: 1.0, degree: 2 }.from_gram(&g).unwrap();
        assert_eq!(k2.get(0, 0), 9.0);
    }

    #[test]
    fn rbf_diagonal_and_identical_unit_vectors() {
        let g = Matrix::from_rows(&[vec![1.0, 1.0, 0.2], vec![1.0, 1.0, 0.2], vec![0.2, 0.2, 4.0]]).unwrap();
        let k = KernelSpec::Rbf { sigma: 0.7 }.from_gram(&g).unwrap();
        for i in 0..3 {
            assert_eq!(k.get(i, i), 1.0);
        }
        assert_eq!(k.get(0, 1), 1.0);
        assert!(k.get(0, 2) < 1.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(KernelSpec::Polynomial { offset: -1.0, degree: 2 }.validate().is_err());
        assert!(KernelSpec::Polynomial { offset: 0.0, degree: 0 }.validate().is_err());
        assert!(KernelSpec::Rbf { sigma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Rbf { sigma: -2.0 }.validate().is_err());
        assert!(KernelSpec::Linear.validate().is_ok());
    }

    #[test]
    fn serde_shape() {
        let spec = KernelSpec::Polynomial { offset: 1.0, degree: 3 };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"polynomial","offset":1.0,"degree":3}"#);
        assert_eq!(serde_json::from_str::<KernelSpec>(&json).unwrap(), spec);
    }
}
