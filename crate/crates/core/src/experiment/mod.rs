//! Desk-scale experiments: synthetic data, federated and naive pipelines,
//! timing benchmarks and update rounds.

pub mod bench;
pub mod launch;
pub mod report;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::data::{gen_synthetic, DataMatrix};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::svm::cv::{cross_validate_values, DEFAULT_FOLD_SEED};
use crate::svm::{Averaging, CvReport, GridSpec};
use crate::PartyId;

pub use bench::{run_scaling_benchmark, run_update_iterations, RoundTiming, StageStats, TimingReport, TimingSample};
pub use launch::{run_federated, LoopbackOutcome, PartyLauncher, SessionPlan};
pub use report::{emit_report, read_report, CvRecord, ReportFormat, Tabular};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Federated,
    Naive,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub parties: usize,
    pub samples_per_party: usize,
    pub features: usize,
    pub classes: usize,
    /// Masked width; `2 · features` when unset.
    pub k: Option<usize>,
    /// Kernel family. The polynomial degree and RBF width are searched over
    /// `degree_grid` / `sigma_grid`; the RBF `sigma` is the fallback grid.
    pub kernel: KernelSpec,
    pub c_grid: Vec<f64>,
    pub degree_grid: Vec<u32>,
    pub sigma_grid: Vec<f64>,
    pub folds: usize,
    pub averaging: Option<Averaging>,
    pub normalize_gram: bool,
    pub seed: u64,
    /// Distance between the two closest class means, in noise standard
    /// deviations.
    pub separation: f64,
    pub mode: Mode,
    pub output: Option<PathBuf>,
    pub chunk_rows: usize,
    pub timeout_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        ExperimentConfig {
            parties: 3,
            samples_per_party: 300,
            features: 20,
            classes: 2,
            k: None,
            kernel: KernelSpec::Polynomial { offset: grid.offset, degree: 1 },
            c_grid: grid.c_grid,
            degree_grid: grid.degree_grid,
            sigma_grid: Vec::new(),
            folds: grid.folds,
            averaging: None,
            normalize_gram: true,
            seed: 1,
            separation: 2.0,
            mode: Mode::Both,
            output: None,
            chunk_rows: crate::protocol::session::DEFAULT_CHUNK_ROWS,
            timeout_s: crate::protocol::session::DEFAULT_TIMEOUT.as_secs_f64(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != Mode::Naive && self.parties < 2 {
            return Err(Error::Config(format!("federated mode needs at least 2 parties, got {}", self.parties)));
        }
        if self.parties == 0 || self.features == 0 || self.classes < 2 {
            return Err(Error::Config("need parties >= 1, features >= 1 and classes >= 2".into()));
        }
        if self.samples_per_party < self.classes * self.folds {
            return Err(Error::Config(format!(
                "samples_per_party {} < classes {} x folds {}",
                self.samples_per_party, self.classes, self.folds
            )));
        }
        if let Some(k) = self.k {
            crate::linalg::MaskDims::new(self.features, k)?;
        }
        if self.chunk_rows == 0 || self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(Error::Config("chunk_rows and timeout_s must be positive".into()));
        }
        self.kernel.validate()?;
        self.grid().kernels().iter().try_for_each(KernelSpec::validate)
    }

    pub fn grid(&self) -> GridSpec {
        let (offset, degree_grid, sigma_grid) = match self.kernel {
            KernelSpec::Linear => (0.0, vec![1], Vec::new()),
            KernelSpec::Polynomial { offset, .. } => (offset, self.degree_grid.clone(), Vec::new()),
            KernelSpec::Rbf { sigma } => {
                let sigmas = if self.sigma_grid.is_empty() { vec![sigma] } else { self.sigma_grid.clone() };
                (0.0, Vec::new(), sigmas)
            }
        };
        GridSpec {
            c_grid: self.c_grid.clone(),
            degree_grid,
            offset,
            sigma_grid,
            folds: self.folds,
            seed: DEFAULT_FOLD_SEED ^ self.seed,
            averaging: self.averaging,
            normalize_gram: self.normalize_gram,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }

    pub fn total_samples(&self) -> usize {
        self.parties * self.samples_per_party
    }

    /// Shared mask seed used by the leader.
    pub fn mask_seed(&self) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)
    }

    /// Synthetic samples split evenly across the parties, in party order.
    pub fn party_data(&self) -> Result<Vec<DataMatrix>> {
        let data = gen_synthetic(self.total_samples(), self.features, self.classes, self.separation, self.seed)?;
        Ok(data.partition(self.parties))
    }
}

/// `P01`, `P02`, ...; zero padded so lexicographic order is party order.
pub fn party_ids(count: usize) -> Vec<PartyId> {
    (1..=count).map(|i| PartyId::new(format!("P{i:02}")).expect("short ascii id")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub cv: CvReport,
    /// One input party, mask multiplication only.
    pub masking_s: f64,
    pub gram_s: f64,
    pub training_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub federated: Option<PipelineResult>,
    pub naive: Option<PipelineResult>,
    /// `|mean_fed − mean_naive|`.
    pub mean_auc_difference: Option<f64>,
    pub max_fold_auc_difference: Option<f64>,
    /// Relative Frobenius distance between the federated and plaintext Gram.
    pub gram_relative_error: Option<f64>,
}

impl ExperimentReport {
    pub fn records(&self) -> Vec<CvRecord> {
        let mut out = Vec::new();
        if let Some(fed) = &self.federated {
            out.push(CvRecord::new("federated", fed));
        }
        if let Some(naive) = &self.naive {
            out.push(CvRecord::new("naive", naive));
        }
        out
    }
}

/// Centralised baseline on the concatenated plaintext.
pub fn run_naive(config: &ExperimentConfig, parts: &[DataMatrix]) -> Result<(PipelineResult, crate::linalg::Matrix)> {
    let refs: Vec<&DataMatrix> = parts.iter().collect();
    let all = DataMatrix::concat(&refs)?;
    let labels = all.labels.clone().ok_or_else(|| Error::InvalidLabels("naive pipeline needs labels".into()))?;
    let start = Instant::now();
    let gram = all.features.matmul_transpose(&all.features)?;
    let gram_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let cv = cross_validate_values(&gram, &labels, &config.grid())?;
    let training_s = start.elapsed().as_secs_f64();
    Ok((PipelineResult { cv, masking_s: 0.0, gram_s, training_s }, gram))
}

pub fn run_experiment(config: &ExperimentConfig, launcher: &PartyLauncher) -> Result<ExperimentReport> {
    config.validate()?;
    run_experiment_on(config, &config.party_data()?, launcher)
}

/// [`run_experiment`] on given per-party data (for example a loaded CSV)
/// instead of synthetic samples. Sample and feature counts of `config` are
/// ignored.
pub fn run_experiment_on(config: &ExperimentConfig, parts: &[DataMatrix], launcher: &PartyLauncher) -> Result<ExperimentReport> {
    let mut report = ExperimentReport {
        config: config.clone(),
        federated: None,
        naive: None,
        mean_auc_difference: None,
        max_fold_auc_difference: None,
        gram_relative_error: None,
    };
    let mut fed_gram = None;
    if config.mode != Mode::Naive {
        let (result, gram) = run_federated(config, parts, launcher)?;
        report.federated = Some(result);
        fed_gram = Some(gram);
    }
    if config.mode != Mode::Federated {
        let (result, gram) = run_naive(config, parts)?;
        if let Some(fed) = &fed_gram {
            report.gram_relative_error = Some(fed.relative_frobenius_error(&gram));
        }
        report.naive = Some(result);
    }
    if let (Some(fed), Some(naive)) = (&report.federated, &report.naive) {
        report.mean_auc_difference = Some((fed.cv.mean_auc - naive.cv.mean_auc).abs());
        report.max_fold_auc_difference =
            Some(fed.cv.fold_aucs.iter().zip(&naive.cv.fold_aucs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    if let Some(path) = &config.output {
        emit_report(&report.records(), path, ReportFormat::from_path(path))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        assert_eq!(config.grid().combinations(), 75);
        assert!(ExperimentConfig { parties: 1, ..config.clone() }.validate().is_err());
        ExperimentConfig { parties: 1, mode: Mode::Naive, ..config.clone() }.validate().unwrap();
        assert!(ExperimentConfig { samples_per_party: 9, ..config.clone() }.validate().is_err());
        assert!(ExperimentConfig { k: Some(20), ..config.clone() }.validate().is_err());
    }

    #[test]
    fn config_json_round_trip_with_partial_input() {
        let config: ExperimentConfig = serde_json::from_str(r#"{"parties": 4, "kernel": {"kind": "rbf", "sigma": 2.0}}"#).unwrap();
        assert_eq!(config.parties, 4);
        assert_eq!(config.grid().sigma_grid, vec![2.0]);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(back, config);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"partys": 4}"#).is_err());
    }

    #[test]
    fn party_ids_sort_in_party_order() {
        let ids = party_ids(12);
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert_eq!(ids[0].as_str(), "P01");
    }

    #[test]
    fn naive_mode_is_deterministic() {
        let config = ExperimentConfig {
            samples_per_party: 30,
            features: 4,
            c_grid: vec![1.0],
            degree_grid: vec![1, 2],
            mode: Mode::Naive,
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&config, &PartyLauncher::Threads).unwrap();
        let b = run_experiment(&config, &PartyLauncher::Threads).unwrap();
        assert!(a.federated.is_none());
        assert_eq!(a.naive.as_ref().unwrap().cv, b.naive.as_ref().unwrap().cv);
    }
}
