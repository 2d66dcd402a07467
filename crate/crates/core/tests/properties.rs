mod common;

use proptest::prelude::*;

use flake_core::gram::gram_from_payloads;
use flake_core::linalg::MaskDims;
use flake_core::masking::{build_mask_context, mask};
use flake_core::protocol::session::{chunk_frames, decode_chunk_end, encode_chunk_end, reassemble};
use flake_core::protocol::wire::chunk_ranges;
use flake_core::protocol::{decode_matrix, Frame, SeedEnvelope};
use flake_core::svm::stratified_folds;
use flake_core::{DataMatrix, Matrix, PartyId};

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (0..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1e6..1e6f64, r * c).prop_map(move |data| Matrix::from_vec(r, c, data).unwrap())
    })
}

fn party_id() -> impl Strategy<Value = PartyId> {
    "[!-~]{1,8}".prop_map(|s| s.parse().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn truncated_frames_are_rejected(payload in prop::collection::vec(any::<u8>(), 0..64), id in party_id(), cut in any::<prop::sample::Index>()) {
        let bytes = Frame::new(flake_core::protocol::MsgType::Hello, id, 3, payload).encode();
        let cut = cut.index(bytes.len());
        prop_assert!(Frame::decode(&bytes[..cut]).is_err());
        let mut extended = bytes.clone();
        extended.push(0);
        prop_assert!(Frame::decode(&extended).is_err());
    }

    #[test]
    fn chunking_reassembles_exactly(m in matrix(40, 6), chunk in 1usize..17) {
        let ranges = chunk_ranges(m.rows(), chunk).unwrap();
        prop_assert_eq!(ranges.len(), m.rows().div_ceil(chunk));
        prop_assert!(ranges.windows(2).all(|w| w[0].1 == w[1].0));
        let masked = flake_core::MaskedMatrix { payload: m.clone(), party_id: "P".parse().unwrap(), iteration: 0 };
        let frames = chunk_frames(&masked, chunk).unwrap();
        let parts: Vec<Matrix> = frames.iter().map(|f| decode_matrix(&f.payload).unwrap()).collect();
        prop_assert_eq!(reassemble(&parts, m.cols()).unwrap(), m);
    }

    #[test]
    fn chunk_end_round_trips(labels in prop::collection::vec(any::<i64>(), 0..50), keep in any::<bool>(), extra in 0usize..1000) {
        let rows = labels.len();
        let labels = keep.then_some(labels);
        let payload = encode_chunk_end(rows, labels.as_deref());
        prop_assert_eq!(decode_chunk_end(&payload).unwrap(), (rows, labels.clone()));
        let unlabeled = encode_chunk_end(rows + extra, None);
        prop_assert_eq!(decode_chunk_end(&unlabeled).unwrap(), (rows + extra, None));
        if let Some(labels) = labels {
            prop_assert!(decode_chunk_end(&encode_chunk_end(rows + 1 + extra, Some(&labels))).is_err());
        }
    }

    #[test]
    fn envelope_bytes_round_trip(s in party_id(), r in party_id(), ct in prop::collection::vec(any::<u8>(), 0..200), sig in prop::collection::vec(any::<u8>(), 0..80)) {
        let env = SeedEnvelope { sender: s, recipient: r, ciphertext: ct, signature: sig };
        prop_assert_eq!(SeedEnvelope::from_bytes(&env.to_bytes()).unwrap(), env);
    }

    #[test]
    fn folds_partition_and_stratify(counts in prop::collection::vec(5usize..30, 2..5), folds in 2usize..6, seed in any::<u64>()) {
        let labels: Vec<i64> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c as i64 * 7 - 3, n)).collect();
        let out = stratified_folds(&labels, folds, seed).unwrap();
        prop_assert_eq!(out.len(), folds);
        let mut all: Vec<usize> = out.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (c, &n) in counts.iter().enumerate() {
            let label = c as i64 * 7 - 3;
            let per_fold: Vec<usize> = out.iter().map(|f| f.iter().filter(|&&i| labels[i] == label).count()).collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class of {} split as {:?}", n, per_fold);
        }
    }

    #[test]
    fn masked_gram_equals_plaintext(f in 1usize..6, extra in 1usize..6, sizes in prop::collection::vec(1usize..12, 2..5), seed in any::<u64>()) {
        let dims = MaskDims::new(f, f + extra).unwrap();
        let mut r = common::rng(seed);
        let parts: Vec<DataMatrix> = sizes.iter().map(|&n| common::gaussian_data(&mut r, n, f)).collect();
        let masked: Vec<_> = parts
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let ctx = build_mask_context(seed, dims, format!("Q{i}").parse().unwrap(), seed ^ i as u64).unwrap();
                let out = mask(d, &ctx).unwrap();
                assert_eq!(out.width(), f + extra);
                out
            })
            .collect();
        let g = gram_from_payloads(&masked).unwrap();
        let refs: Vec<&DataMatrix> = parts.iter().collect();
        let all = DataMatrix::concat(&refs).unwrap();
        prop_assert!(common::rel_frobenius(g.values(), &common::naive_outer(&all.features, &all.features)) < 1e-8);
        prop_assert!(g.values().is_symmetric(1e-8));
    }
}
