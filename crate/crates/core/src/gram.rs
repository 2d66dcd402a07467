//! Function-party side: the block Gram matrix over masked payloads and its
//! incremental maintenance.
//!
//! The matrix is organised in *segments*, one per masked batch, in arrival
//! order. A party owns one segment per batch it contributed; new samples of a
//! known party and new parties both append a segment, so existing entries are
//! never recomputed. The function party keeps every masked batch in a
//! [`PayloadStore`] aligned with the segment list, because appending a batch
//! needs its products with all earlier batches.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::masking::MaskedMatrix;
use crate::PartyId;

/// Symmetry tolerance for assembled Gram matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// `λ_min ≥ −PSD_TOLERANCE · λ_max`.
pub const PSD_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub party_id: PartyId,
    pub sample_count: usize,
    pub iteration: u32,
}

/// Row and column ranges of every block, keyed by the ordered party pair.
pub type BlockIndex = BTreeMap<(PartyId, PartyId), Vec<(Range<usize>, Range<usize>)>>;

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    segments: Vec<Segment>,
    offsets: Vec<usize>,
    values: Matrix,
}

/// Segment-aligned masked batches retained by the function party.
#[derive(Clone, Debug, Default)]
pub struct PayloadStore {
    batches: Vec<MaskedMatrix>,
}

impl PayloadStore {
    pub fn new() -> Self {
        PayloadStore::default()
    }

    pub fn batches(&self) -> &[MaskedMatrix] {
        &self.batches
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn contains_party(&self, party: &PartyId) -> bool {
        self.batches.iter().any(|b| &b.party_id == party)
    }

    pub fn rows_of(&self, party: &PartyId) -> usize {
        self.batches.iter().filter(|b| &b.party_id == party).map(MaskedMatrix::sample_count).sum()
    }
}

/// `a.payload · b.payloadᵀ`.
pub fn cross_block(a: &MaskedMatrix, b: &MaskedMatrix) -> Result<Matrix> {
    if a.width() != b.width() {
        return Err(Error::WidthMismatch { left: a.width(), right: b.width() });
    }
    a.payload.matmul_transpose(&b.payload)
}

/// All upper-triangle blocks `(i, j)`, `i ≤ j`, of a set of batches.
pub fn all_blocks(batches: &[MaskedMatrix]) -> Result<BTreeMap<(usize, usize), Matrix>> {
    let pairs: Vec<(usize, usize)> =
        (0..batches.len()).flat_map(|i| (i..batches.len()).map(move |j| (i, j))).collect();
    pairs
        .into_par_iter()
        .map(|(i, j)| cross_block(&batches[i], &batches[j]).map(|m| ((i, j), m)))
        .collect()
}

/// Assembles a Gram matrix from upper-triangle blocks; the lower triangle is
/// filled by transposition.
pub fn assemble_gram(blocks: &BTreeMap<(usize, usize), Matrix>, segments: Vec<Segment>) -> Result<GramMatrix> {
    let s = segments.len();
    let missing: Vec<(usize, usize)> =
        (0..s).flat_map(|i| (i..s).map(move |j| (i, j))).filter(|key| !blocks.contains_key(key)).collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteGram { missing });
    }
    let (offsets, total) = offsets_of(&segments);
    let mut values = Matrix::zeros(total, total);
    for (&(i, j), block) in blocks {
        if i >= s || j >= s || i > j {
            return Err(Error::DimensionMismatch(format!("block ({i}, {j}) outside the upper triangle of {s} segments")));
        }
        if block.shape() != (segments[i].sample_count, segments[j].sample_count) {
            return Err(Error::DimensionMismatch(format!(
                "block ({i}, {j}) is {:?}, segments need {:?}",
                block.shape(),
                (segments[i].sample_count, segments[j].sample_count)
            )));
        }
        for r in 0..block.rows() {
            for c in 0..block.cols() {
                let v = block.get(r, c);
                values.set(offsets[i] + r, offsets[j] + c, v);
                values.set(offsets[j] + c, offsets[i] + r, v);
            }
        }
    }
    Ok(GramMatrix { segments, offsets, values })
}

/// Full Gram matrix over `batches`, in the given order.
pub fn gram_from_payloads(batches: &[MaskedMatrix]) -> Result<GramMatrix> {
    let blocks = all_blocks(batches)?;
    assemble_gram(&blocks, batches.iter().map(segment_of).collect())
}

/// Builds the initial Gram matrix and a store holding the batches.
pub fn initial_state(batches: Vec<MaskedMatrix>) -> Result<(GramMatrix, PayloadStore)> {
    let gram = gram_from_payloads(&batches)?;
    Ok((gram, PayloadStore { batches }))
}

fn segment_of(m: &MaskedMatrix) -> Segment {
    Segment { party_id: m.party_id.clone(), sample_count: m.sample_count(), iteration: m.iteration }
}

fn offsets_of(segments: &[Segment]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(segments.len());
    let mut total = 0;
    for seg in segments {
        offsets.push(total);
        total += seg.sample_count;
    }
    (offsets, total)
}

impl GramMatrix {
    pub fn empty() -> Self {
        GramMatrix { segments: Vec::new(), offsets: Vec::new(), values: Matrix::zeros(0, 0) }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn size(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn parties(&self) -> Vec<PartyId> {
        let mut out: Vec<PartyId> = Vec::new();
        for seg in &self.segments {
            if !out.contains(&seg.party_id) {
                out.push(seg.party_id.clone());
            }
        }
        out
    }

    pub fn has_party(&self, party: &PartyId) -> bool {
        self.segments.iter().any(|s| &s.party_id == party)
    }

    pub fn segment_range(&self, index: usize) -> Range<usize> {
        let start = self.offsets[index];
        start..start + self.segments[index].sample_count
    }

    /// Row and column ranges of the block between segments `i` and `j`.
    pub fn block_range(&self, i: usize, j: usize) -> (Range<usize>, Range<usize>) {
        (self.segment_range(i), self.segment_range(j))
    }

    /// Block-index map keyed by party pairs; a party with several segments
    /// contributes several ranges.
    pub fn block_index(&self) -> BlockIndex {
        let mut index: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for i in 0..self.segments.len() {
            for j in 0..self.segments.len() {
                index
                    .entry((self.segments[i].party_id.clone(), self.segments[j].party_id.clone()))
                    .or_default()
                    .push(self.block_range(i, j));
            }
        }
        index
    }

    /// Global row indices owned by `party`, in matrix order.
    pub fn party_rows(&self, party: &PartyId) -> Vec<usize> {
        (0..self.segments.len())
            .filter(|&i| &self.segments[i].party_id == party)
            .flat_map(|i| self.segment_range(i))
            .collect()
    }

    /// Symmetry within [`SYMMETRY_TOLERANCE`] and PSD within [`PSD_TOLERANCE`].
    pub fn validate(&self) -> Result<()> {
        if !self.values.is_symmetric(SYMMETRY_TOLERANCE) {
            return Err(Error::NumericFailure("gram matrix is not symmetric".into()));
        }
        if !linalg::is_psd(&self.values, PSD_TOLERANCE)? {
            return Err(Error::NumericFailure("gram matrix is not positive semi-definite".into()));
        }
        Ok(())
    }

    /// Same segments, values scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> GramMatrix {
        GramMatrix { values: self.values.scale(factor), ..self.clone() }
    }

    fn check_store(&self, store: &PayloadStore) -> Result<()> {
        let aligned = store.batches.len() == self.segments.len()
            && store.batches.iter().zip(&self.segments).all(|(b, s)| b.party_id == s.party_id && b.sample_count() == s.sample_count);
        if aligned {
            Ok(())
        } else {
            Err(Error::StoreMismatch(format!(
                "{} stored batches for {} segments",
                store.batches.len(),
                self.segments.len()
            )))
        }
    }

    /// Appends `batch` as a new segment: its products with every stored
    /// batch plus its own block. Existing entries are copied, not recomputed.
    fn append(&mut self, batch: MaskedMatrix, store: &mut PayloadStore) -> Result<()> {
        if let Some(first) = store.batches.first() {
            if first.width() != batch.width() {
                return Err(Error::WidthMismatch { left: first.width(), right: batch.width() });
            }
        }
        let crosses: Vec<Matrix> =
            store.batches.par_iter().map(|old| cross_block(old, &batch)).collect::<Result<_>>()?;
        let own = cross_block(&batch, &batch)?;

        let old_total = self.size();
        let added = batch.sample_count();
        let total = old_total + added;
        let mut values = Matrix::zeros(total, total);
        for r in 0..old_total {
            for c in 0..old_total {
                values.set(r, c, self.values.get(r, c));
            }
        }
        for (seg, cross) in crosses.iter().enumerate() {
            let offset = self.offsets[seg];
            for r in 0..cross.rows() {
                for c in 0..added {
                    let v = cross.get(r, c);
                    values.set(offset + r, old_total + c, v);
                    values.set(old_total + c, offset + r, v);
                }
            }
        }
        for r in 0..added {
            for c in 0..added {
                values.set(old_total + r, old_total + c, own.get(r, c));
            }
        }

        self.offsets.push(old_total);
        self.segments.push(segment_of(&batch));
        self.values = values;
        store.batches.push(batch);
        Ok(())
    }
}

/// Integrates new samples `x_masked` of an already registered party.
///
/// An empty batch leaves the matrix untouched and is not stored.
pub fn extend_with_data(gram: &mut GramMatrix, x_masked: MaskedMatrix, store: &mut PayloadStore) -> Result<()> {
    gram.check_store(store)?;
    if !gram.has_party(&x_masked.party_id) {
        return Err(Error::UnknownParty(x_masked.party_id));
    }
    if x_masked.sample_count() == 0 {
        return Ok(());
    }
    gram.append(x_masked, store)
}

/// Registers a new party with its first masked batch.
pub fn add_party(gram: &mut GramMatrix, d_masked: MaskedMatrix, store: &mut PayloadStore) -> Result<()> {
    gram.check_store(store)?;
    if gram.has_party(&d_masked.party_id) {
        return Err(Error::DuplicateParty(d_masked.party_id));
    }
    if d_masked.sample_count() == 0 {
        return Err(Error::InvalidMatrix(format!("party {} joined without samples", d_masked.party_id)));
    }
    gram.append(d_masked, store)
}

/// Drops every segment of `party` together with its stored batches.
pub fn remove_party(gram: &mut GramMatrix, party: &PartyId, store: &mut PayloadStore) -> Result<()> {
    gram.check_store(store)?;
    if !gram.has_party(party) {
        return Err(Error::UnknownParty(party.clone()));
    }
    let keep: Vec<usize> =
        (0..gram.segments.len()).filter(|&i| &gram.segments[i].party_id != party).flat_map(|i| gram.segment_range(i)).collect();
    gram.values = gram.values.select(&keep, &keep);
    gram.segments.retain(|s| &s.party_id != party);
    gram.offsets = offsets_of(&gram.segments).0;
    store.batches.retain(|b| &b.party_id != party);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rng::domain;
    use crate::linalg::{MaskDims, MaskRng};
    use crate::masking::build_mask_context;

    fn pid(s: &str) -> PartyId {
        s.parse().unwrap()
    }

    fn masked(party: &str, rows: usize, seed: u64) -> MaskedMatrix {
        MaskedMatrix {
            payload: MaskRng::new(seed, domain::TESTING, 0).normal_matrix(rows, 6),
            party_id: pid(party),
            iteration: 0,
        }
    }

    #[test]
    fn cross_block_width_mismatch() {
        let a = masked("A", 2, 1);
        let mut b = masked("B", 2, 2);
        b.payload = Matrix::zeros(2, 5);
        assert!(matches!(cross_block(&a, &b), Err(Error::WidthMismatch { left: 6, right: 5 })));
    }

    #[test]
    fn diagonal_block_is_symmetric_psd() {
        let a = masked("A", 5, 1);
        let block = cross_block(&a, &a).unwrap();
        assert!(block.is_symmetric(0.0));
        assert!(linalg::is_psd(&block, PSD_TOLERANCE).unwrap());
    }

    #[test]
    fn unit_rows_give_unit_entry() {
        let dims = MaskDims::new(3, 5).unwrap();
        let row = vec![0.6, 0.0, 0.8];
        let data = crate::data::DataMatrix::unlabeled(Matrix::from_rows(&[row]).unwrap());
        let a = crate::masking::mask(&data, &build_mask_context(4, dims, pid("A"), 1).unwrap()).unwrap();
        let b = crate::masking::mask(&data, &build_mask_context(4, dims, pid("B"), 2).unwrap()).unwrap();
        assert!((cross_block(&a, &b).unwrap().get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_blocks_are_reported() {
        let batches = vec![masked("A", 2, 1), masked("B", 3, 2)];
        let mut blocks = all_blocks(&batches).unwrap();
        blocks.remove(&(0, 1));
        let segments = batches.iter().map(segment_of).collect();
        match assemble_gram(&blocks, segments) {
            Err(Error::IncompleteGram { missing }) => assert_eq!(missing, vec![(0, 1)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_party_gram_is_its_block() {
        let a = masked("A", 4, 1);
        let g = gram_from_payloads(std::slice::from_ref(&a)).unwrap();
        assert_eq!(g.values(), &cross_block(&a, &a).unwrap());
        assert_eq!(g.parties(), vec![pid("A")]);
    }

    #[test]
    fn block_index_tiles_the_matrix() {
        let (g, _) = initial_state(vec![masked("A", 2, 1), masked("B", 3, 2), masked("C", 1, 3)]).unwrap();
        let mut covered = vec![0u32; g.size() * g.size()];
        for ranges in g.block_index().values() {
            for (rows, cols) in ranges {
                for r in rows.clone() {
                    for c in cols.clone() {
                        covered[r * g.size() + c] += 1;
                    }
                }
            }
        }
        assert!(covered.iter().all(|&n| n == 1));
    }

    #[test]
    fn extend_with_empty_batch_is_noop() {
        let (mut g, mut store) = initial_state(vec![masked("A", 2, 1), masked("B", 3, 2)]).unwrap();
        let before = g.clone();
        let empty = MaskedMatrix { payload: Matrix::zeros(0, 6), party_id: pid("A"), iteration: 1 };
        extend_with_data(&mut g, empty, &mut store).unwrap();
        assert_eq!(g, before);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn extend_keeps_old_entries_bit_identical() {
        let (mut g, mut store) = initial_state(vec![masked("A", 2, 1), masked("B", 3, 2)]).unwrap();
        let before = g.values().clone();
        extend_with_data(&mut g, masked("B", 4, 3), &mut store).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(g.values().get(r, c).to_bits(), before.get(r, c).to_bits());
            }
        }
        assert_eq!(g.size(), 9);
        assert_eq!(g.party_rows(&pid("B")), vec![2, 3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn extend_rejects_unknown_party_and_add_rejects_known() {
        let (mut g, mut store) = initial_state(vec![masked("A", 2, 1)]).unwrap();
        assert!(matches!(extend_with_data(&mut g, masked("Z", 1, 2), &mut store), Err(Error::UnknownParty(_))));
        assert!(matches!(add_party(&mut g, masked("A", 1, 2), &mut store), Err(Error::DuplicateParty(_))));
        assert!(matches!(remove_party(&mut g, &pid("Z"), &mut store), Err(Error::UnknownParty(_))));
    }

    #[test]
    fn add_then_remove_round_trips() {
        let (mut g, mut store) = initial_state(vec![masked("A", 2, 1), masked("B", 3, 2)]).unwrap();
        let before = g.clone();
        add_party(&mut g, masked("C", 1, 3), &mut store).unwrap();
        assert_eq!(g.size(), 6);
        remove_party(&mut g, &pid("C"), &mut store).unwrap();
        assert_eq!(g, before);
        assert!(!store.contains_party(&pid("C")));
    }

    #[test]
    fn removing_only_party_empties() {
        let (mut g, mut store) = initial_state(vec![masked("A", 3, 1)]).unwrap();
        remove_party(&mut g, &pid("A"), &mut store).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.size(), 0);
        assert!(store.is_empty());
    }

    #[test]
    fn store_misalignment_is_detected() {
        let (mut g, _) = initial_state(vec![masked("A", 3, 1)]).unwrap();
        let mut other = PayloadStore::new();
        assert!(matches!(extend_with_data(&mut g, masked("A", 1, 2), &mut other), Err(Error::StoreMismatch(_))));
    }
}
