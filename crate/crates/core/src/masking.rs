//! Input-party side of the scheme.
//!
//! All parties derive the same `k × f` mask `N` from the shared seed. Each
//! party then holds its own left inverse `L_P` (`L_P · N = I_f`) drawn from
//! the affine family `L0 + M · (I_k − N · L0)` around the pseudoinverse `L0`,
//! and publishes `D · L_P · (N·Nᵀ)^½`, an `n × k` matrix. For any two parties
//! the product of their masked matrices equals the plaintext product
//! `D_P · D_Qᵀ`, because `L_P · N·Nᵀ · L_Qᵀ = I`.
//!
//! Note that `L_P · (N·Nᵀ)^½` is the same matrix (`V · Uᵀ` in terms of the SVD
//! of `N`) for every member of the left-inverse family: the perturbation lies
//! in the null space of `(N·Nᵀ)^½`. Per-iteration regeneration of `L_P`
//! therefore changes the published bytes only at rounding level.

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::rng::domain;
use crate::linalg::{self, MaskDims, MaskRng, Matrix};
use crate::PartyId;

#[derive(Clone, Debug)]
pub struct MaskContext {
    seed: u64,
    dims: MaskDims,
    party_id: PartyId,
    private_seed: u64,
    iteration: u32,
    n_mask: Matrix,
    pinv: Matrix,
    left_inv: Matrix,
    sqrt_nnt: Matrix,
}

/// `n × k` masked payload. Carries no trace of the plaintext feature count.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedMatrix {
    pub payload: Matrix,
    pub party_id: PartyId,
    pub iteration: u32,
}

impl MaskedMatrix {
    pub fn sample_count(&self) -> usize {
        self.payload.rows()
    }

    pub fn width(&self) -> usize {
        self.payload.cols()
    }
}

pub fn build_mask_context(seed: u64, dims: MaskDims, party_id: PartyId, private_seed: u64) -> Result<MaskContext> {
    let n_mask = linalg::random_full_rank(seed, dims)?;
    let pinv = linalg::pseudo_inverse(&n_mask)?;
    let sqrt_nnt = linalg::sym_sqrt(&n_mask)?;
    let mut rng = party_rng(private_seed, 0);
    let left_inv = randomize_left_inverse(&n_mask, &pinv, &mut rng)?;
    Ok(MaskContext { seed, dims, party_id, private_seed, iteration: 0, n_mask, pinv, left_inv, sqrt_nnt })
}

fn party_rng(private_seed: u64, iteration: u32) -> MaskRng {
    MaskRng::new(private_seed, domain::LEFT_INVERSE, u64::from(iteration))
}

/// Draws a fresh Gaussian `f × k` perturbation `M` and returns
/// `l0 + M · (I − n_mask · l0)`.
pub fn randomize_left_inverse(n_mask: &Matrix, l0: &Matrix, rng: &mut MaskRng) -> Result<Matrix> {
    let perturbation = rng.normal_matrix(n_mask.cols(), n_mask.rows());
    left_inverse_with(n_mask, l0, &perturbation)
}

/// Member of the left-inverse family selected by `perturbation` (`f × k`).
pub fn left_inverse_with(n_mask: &Matrix, l0: &Matrix, perturbation: &Matrix) -> Result<Matrix> {
    let k = n_mask.rows();
    if l0.shape() != (n_mask.cols(), k) || perturbation.shape() != l0.shape() {
        return Err(Error::DimensionMismatch(format!(
            "left inverse family for {}x{} mask: l0 {:?}, perturbation {:?}",
            k,
            n_mask.cols(),
            l0.shape(),
            perturbation.shape()
        )));
    }
    let complement = Matrix::identity(k).sub(&n_mask.matmul(l0)?)?;
    l0.add(&perturbation.matmul(&complement)?)
}

impl MaskContext {
    /// Next iteration: same `N` and `(N·Nᵀ)^½`, freshly drawn `L_P`.
    pub fn advance_iteration(&self) -> Result<MaskContext> {
        let iteration = self
            .iteration
            .checked_add(1)
            .ok_or_else(|| Error::Protocol("iteration counter overflow".into()))?;
        let mut rng = party_rng(self.private_seed, iteration);
        let left_inv = randomize_left_inverse(&self.n_mask, &self.pinv, &mut rng)?;
        Ok(MaskContext { iteration, left_inv, ..self.clone() })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> MaskDims {
        self.dims
    }

    pub fn party_id(&self) -> &PartyId {
        &self.party_id
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn n_mask(&self) -> &Matrix {
        &self.n_mask
    }

    pub fn left_inv(&self) -> &Matrix {
        &self.left_inv
    }

    pub fn sqrt_nnt(&self) -> &Matrix {
        &self.sqrt_nnt
    }
}

/// Rejects samples whose every feature is zero; returns the offending rows.
pub fn validate_rows(data: &DataMatrix) -> Result<()> {
    let rows: Vec<usize> = (0..data.samples())
        .filter(|&i| data.features.row(i).iter().all(|v| *v == 0.0))
        .collect();
    if rows.is_empty() {
        Ok(())
    } else {
        Err(Error::ZeroRows { rows })
    }
}

/// `data · L_P · (N·Nᵀ)^½`.
pub fn mask(data: &DataMatrix, ctx: &MaskContext) -> Result<MaskedMatrix> {
    if data.feature_count() != ctx.dims.features {
        return Err(Error::DimensionMismatch(format!(
            "data has {} features, mask context expects {}",
            data.feature_count(),
            ctx.dims.features
        )));
    }
    validate_rows(data)?;
    let transform = ctx.left_inv.matmul(&ctx.sqrt_nnt)?;
    Ok(MaskedMatrix {
        payload: data.features.matmul(&transform)?,
        party_id: ctx.party_id.clone(),
        iteration: ctx.iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> PartyId {
        s.parse().unwrap()
    }

    fn sample(seed: u64, n: usize, f: usize) -> DataMatrix {
        DataMatrix::unlabeled(MaskRng::new(seed, domain::TESTING, 0).normal_matrix(n, f))
    }

    #[test]
    fn shared_mask_private_inverse() {
        let dims = MaskDims::new(3, 6).unwrap();
        let a = build_mask_context(42, dims, pid("A"), 1).unwrap();
        let b = build_mask_context(42, dims, pid("B"), 2).unwrap();
        assert_eq!(a.n_mask().as_slice(), b.n_mask().as_slice());
        assert!(a.left_inv().max_abs_diff(b.left_inv()) > 1e-3);
        for ctx in [&a, &b] {
            let product = ctx.left_inv().matmul(ctx.n_mask()).unwrap();
            assert!(product.max_abs_diff(&Matrix::identity(3)) < 1e-8);
        }
    }

    #[test]
    fn zero_perturbation_gives_pseudoinverse() {
        let n = linalg::random_full_rank(5, MaskDims::new(2, 5).unwrap()).unwrap();
        let l0 = linalg::pseudo_inverse(&n).unwrap();
        let l = left_inverse_with(&n, &l0, &Matrix::zeros(2, 5)).unwrap();
        assert!(l.max_abs_diff(&l0) < 1e-15);
    }

    #[test]
    fn random_perturbations_stay_left_inverses() {
        let n = linalg::random_full_rank(5, MaskDims::new(4, 9).unwrap()).unwrap();
        let l0 = linalg::pseudo_inverse(&n).unwrap();
        let mut rng = MaskRng::new(77, domain::TESTING, 0);
        let l1 = randomize_left_inverse(&n, &l0, &mut rng).unwrap();
        let l2 = randomize_left_inverse(&n, &l0, &mut rng).unwrap();
        assert!(l1.max_abs_diff(&l2) > 1e-3);
        for l in [l1, l2] {
            assert!(l.matmul(&n).unwrap().max_abs_diff(&Matrix::identity(4)) < 1e-8);
        }
    }

    #[test]
    fn advance_keeps_mask_and_refreshes_inverse() {
        let ctx = build_mask_context(3, MaskDims::new(2, 4).unwrap(), pid("A"), 9).unwrap();
        let next = ctx.advance_iteration().unwrap();
        assert_eq!(next.iteration(), 1);
        assert_eq!(next.n_mask().as_slice(), ctx.n_mask().as_slice());
        assert_eq!(next.sqrt_nnt().as_slice(), ctx.sqrt_nnt().as_slice());
        assert!(next.left_inv().max_abs_diff(ctx.left_inv()) > 1e-3);
    }

    #[test]
    fn validate_rows_reports_zero_rows() {
        let ok = DataMatrix::unlabeled(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        assert!(validate_rows(&ok).is_ok());
        let bad = DataMatrix::unlabeled(Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap());
        match validate_rows(&bad) {
            Err(Error::ZeroRows { rows }) => assert_eq!(rows, vec![0]),
            other => panic!("expected zero-row error, got {other:?}"),
        }
        assert!(validate_rows(&sample(1, 1000, 20)).is_ok());
    }

    #[test]
    fn mask_shape_and_tags() {
        let ctx = build_mask_context(1, MaskDims::new(2, 4).unwrap(), pid("A"), 0).unwrap();
        let data = DataMatrix::unlabeled(Matrix::from_rows(&[vec![0.5, -1.0]]).unwrap());
        let masked = mask(&data, &ctx).unwrap();
        assert_eq!(masked.payload.shape(), (1, 4));
        assert_eq!(masked.party_id, pid("A"));
        assert_eq!(masked.iteration, 0);

        let wrong = sample(2, 3, 3);
        assert!(matches!(mask(&wrong, &ctx), Err(Error::DimensionMismatch(_))));
        let zero = DataMatrix::unlabeled(Matrix::zeros(1, 2));
        assert!(matches!(mask(&zero, &ctx), Err(Error::ZeroRows { .. })));
    }

    #[test]
    fn k_twice_f_builds() {
        let ctx = build_mask_context(8, MaskDims::doubled(5).unwrap(), pid("A"), 0).unwrap();
        let masked = mask(&sample(4, 7, 5), &ctx).unwrap();
        assert_eq!(masked.width(), 10);
    }

    #[test]
    fn masked_products_match_plaintext() {
        let dims = MaskDims::new(5, 8).unwrap();
        let a_ctx = build_mask_context(10, dims, pid("A"), 100).unwrap();
        let b_ctx = build_mask_context(10, dims, pid("B"), 200).unwrap();
        let a = sample(1, 6, 5);
        let b = sample(2, 4, 5);
        let masked = mask(&a, &a_ctx).unwrap().payload.matmul_transpose(&mask(&b, &b_ctx).unwrap().payload).unwrap();
        let plain = a.features.matmul_transpose(&b.features).unwrap();
        assert!(masked.relative_frobenius_error(&plain) < 1e-8);
    }

    #[test]
    fn rotated_data_with_rotated_inverse_gives_same_payload() {
        let dims = MaskDims::new(4, 7).unwrap();
        let ctx = build_mask_context(12, dims, pid("A"), 5).unwrap();
        let a = sample(3, 5, 4);
        let o = linalg::random_orthogonal(99, 4).unwrap();
        let rotated = a.rotated(&o).unwrap();
        // L' = Oᵀ·L_A
        let transform = o.transpose().matmul(ctx.left_inv()).unwrap().matmul(ctx.sqrt_nnt()).unwrap();
        let payload = rotated.features.matmul(&transform).unwrap();
        let original = mask(&a, &ctx).unwrap().payload;
        assert!(payload.max_abs_diff(&original) < 1e-10);
    }
}
