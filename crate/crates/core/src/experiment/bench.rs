//! Stage timings on a single-threaded math pool.
//!
//! Stage boundaries: masking is the mask multiplication of one input party
//! (context construction excluded); gram is every block product plus
//! assembly; training is the whole cross-validated grid search.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{party_ids, ExperimentConfig};
use crate::data::{gen_synthetic, DataMatrix};
use crate::error::{Error, Result};
use crate::gram::{self, GramMatrix};
use crate::linalg::{MaskDims, Matrix};
use crate::masking::{self, MaskContext, MaskedMatrix};
use crate::svm::cross_validate_grid;
use crate::svm::cv::mean_std;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub mean_s: f64,
    pub std_s: f64,
}

impl StageStats {
    fn of(values: &[f64]) -> Self {
        let (mean_s, std_s) = mean_std(values);
        StageStats { mean_s, std_s }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSample {
    pub size: usize,
    pub repeat: usize,
    pub masking_s: f64,
    pub gram_s: f64,
    pub training_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming {
    pub round: usize,
    /// Rows masked by each party this round.
    pub new_rows: usize,
    pub total_rows: usize,
    pub masking_s: f64,
    pub gram_s: f64,
    /// Relative Frobenius distance to a from-scratch assembly over the same
    /// payloads.
    pub recompute_error: f64,
    /// Relative Frobenius distance to the plaintext Gram matrix.
    pub plaintext_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub size: usize,
    pub repeats: usize,
    pub samples: Vec<TimingSample>,
    pub masking: StageStats,
    pub gram: StageStats,
    pub training: StageStats,
    pub rounds: Vec<RoundTiming>,
}

fn single_threaded<T: Send>(job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
        .install(job)
}

fn dims_for(config: &ExperimentConfig) -> Result<MaskDims> {
    match config.k {
        Some(k) => MaskDims::new(config.features, k),
        None => MaskDims::doubled(config.features),
    }
}

fn contexts(config: &ExperimentConfig, dims: MaskDims) -> Result<Vec<MaskContext>> {
    party_ids(config.parties)
        .into_iter()
        .enumerate()
        .map(|(i, id)| masking::build_mask_context(config.mask_seed(), dims, id, config.seed.wrapping_add(1 + i as u64)))
        .collect()
}

fn timed<T>(job: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = job()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn one_run(config: &ExperimentConfig, parts: &[DataMatrix], ctxs: &[MaskContext], labels: &[i64]) -> Result<(f64, f64, f64)> {
    let (first, masking_s) = timed(|| masking::mask(&parts[0], &ctxs[0]))?;
    let mut batches = vec![first];
    for (part, ctx) in parts.iter().zip(ctxs).skip(1) {
        batches.push(masking::mask(part, ctx)?);
    }
    let (gram, gram_s) = timed(|| gram::gram_from_payloads(&batches))?;
    let (_, training_s) = timed(|| cross_validate_grid(&gram, labels, &config.grid()))?;
    Ok((masking_s, gram_s, training_s))
}

/// For each total sample count in `sizes`, `repeats` timed runs of the
/// in-process pipeline split evenly over `config.parties`.
pub fn run_scaling_benchmark(config: &ExperimentConfig, sizes: &[usize], repeats: usize) -> Result<Vec<TimingReport>> {
    if repeats == 0 || sizes.is_empty() {
        return Err(Error::Config("need at least one size and one repeat".into()));
    }
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("benchmark sizes must be ascending".into()));
    }
    let dims = dims_for(config)?;
    single_threaded(|| {
        let ctxs = contexts(config, dims)?;
        let mut reports = Vec::with_capacity(sizes.len());
        for &size in sizes {
            let data = gen_synthetic(size, config.features, config.classes, config.separation, config.seed)?;
            let labels = data.labels.clone().expect("synthetic data is labelled");
            let parts = data.partition(config.parties);
            let mut samples = Vec::with_capacity(repeats);
            for repeat in 0..repeats {
                let (masking_s, gram_s, training_s) = one_run(config, &parts, &ctxs, &labels)?;
                samples.push(TimingSample { size, repeat, masking_s, gram_s, training_s });
            }
            let stage = |f: fn(&TimingSample) -> f64| StageStats::of(&samples.iter().map(f).collect::<Vec<_>>());
            reports.push(TimingReport {
                size,
                repeats,
                masking: stage(|s| s.masking_s),
                gram: stage(|s| s.gram_s),
                training: stage(|s| s.training_s),
                samples,
                rounds: Vec::new(),
            });
        }
        Ok(reports)
    })
}

/// Starts every party with `start_n` samples, then runs `rounds` update
/// rounds in which each party masks and contributes `increment` new samples.
/// Every round is checked against a from-scratch assembly.
pub fn run_update_iterations(config: &ExperimentConfig, start_n: usize, increment: usize, rounds: usize) -> Result<TimingReport> {
    if rounds < 2 {
        return Err(Error::Config(format!("need at least 2 update rounds, got {rounds}")));
    }
    if start_n == 0 {
        return Err(Error::Config("start_n must be positive".into()));
    }
    let per_party = start_n + rounds * increment;
    let dims = dims_for(config)?;
    single_threaded(|| {
        let data = gen_synthetic(config.parties * per_party, config.features, config.classes, config.separation, config.seed)?;
        let parts = data.partition(config.parties);
        let mut ctxs = contexts(config, dims)?;
        let slice = |p: usize, round: usize| -> DataMatrix {
            let (start, end) = if round == 0 { (0, start_n) } else { (start_n + (round - 1) * increment, start_n + round * increment) };
            parts[p].rows(start, end)
        };

        let mut timings = Vec::with_capacity(rounds + 1);
        let mut state: Option<(GramMatrix, gram::PayloadStore)> = None;
        let mut seen: Vec<DataMatrix> = Vec::new();
        for round in 0..=rounds {
            if round > 0 {
                ctxs = ctxs.iter().map(MaskContext::advance_iteration).collect::<Result<_>>()?;
            }
            let new: Vec<DataMatrix> = (0..config.parties).map(|p| slice(p, round)).collect();
            let (first, masking_s) = timed(|| masking::mask(&new[0], &ctxs[0]))?;
            let mut batches: Vec<MaskedMatrix> = vec![first];
            for (part, ctx) in new.iter().zip(&ctxs).skip(1) {
                batches.push(masking::mask(part, ctx)?);
            }
            let ((), gram_s) = timed(|| {
                match &mut state {
                    None => state = Some(gram::initial_state(batches)?),
                    Some((g, store)) => {
                        for batch in batches {
                            gram::extend_with_data(g, batch, store)?;
                        }
                    }
                }
                Ok(())
            })?;
            seen.extend(new);

            let (g, store) = state.as_ref().expect("state after a round");
            let recompute = gram::gram_from_payloads(store.batches())?;
            let plain_rows: Vec<&DataMatrix> = seen.iter().collect();
            let plain = DataMatrix::concat(&plain_rows)?;
            let oracle: Matrix = plain.features.matmul_transpose(&plain.features)?;
            timings.push(RoundTiming {
                round,
                new_rows: if round == 0 { start_n } else { increment },
                total_rows: g.size(),
                masking_s,
                gram_s,
                recompute_error: g.values().relative_frobenius_error(recompute.values()),
                plaintext_error: g.values().relative_frobenius_error(&oracle),
            });
        }
        let masking: Vec<f64> = timings.iter().map(|r| r.masking_s).collect();
        let gram_t: Vec<f64> = timings.iter().map(|r| r.gram_s).collect();
        Ok(TimingReport {
            size: config.parties * per_party,
            repeats: 1,
            samples: Vec::new(),
            masking: StageStats::of(&masking),
            gram: StageStats::of(&gram_t),
            training: StageStats { mean_s: 0.0, std_s: 0.0 },
            rounds: timings,
        })
    })
}
