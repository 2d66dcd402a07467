//! CSV and JSON-lines output of flat report records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::bench::{RoundTiming, TimingReport, TimingSample};
use super::PipelineResult;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::svm::{Averaging, CvReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

impl ReportFormat {
    /// `.jsonl` / `.json` select JSON lines, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => ReportFormat::Jsonl,
            _ => ReportFormat::Csv,
        }
    }
}

/// Record with a fixed column list, so an empty series still gets a header.
pub trait Tabular {
    fn header() -> &'static [&'static str];
}

pub fn emit_report<T: Serialize + Tabular>(records: &[T], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let file = File::create(path.as_ref())?;
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
            writer.write_record(T::header())?;
            for record in records {
                writer.serialize(record)?;
            }
            writer.flush()?;
        }
        ReportFormat::Jsonl => {
            let mut writer = BufWriter::new(file);
            for record in records {
                serde_json::to_writer(&mut writer, record)?;
                writer.write_all(b"\n")?;
            }
            writer.flush()?;
        }
    }
    Ok(())
}

pub fn read_report<T: DeserializeOwned>(path: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<T>> {
    let file = File::open(path.as_ref())?;
    match format {
        ReportFormat::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            reader.deserialize().map(|r| r.map_err(Error::from)).collect()
        }
        ReportFormat::Jsonl => BufReader::new(file)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|line| Ok(serde_json::from_str(&line?)?))
            .collect(),
    }
}

/// One cross-validation outcome with its stage timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub pipeline: String,
    pub best_c: f64,
    pub kernel: String,
    pub offset: Option<f64>,
    pub degree: Option<u32>,
    pub sigma: Option<f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// Semicolon separated.
    pub fold_aucs: String,
    pub averaging: Averaging,
    pub gram_scale: f64,
    pub evaluated: usize,
    pub masking_s: f64,
    pub gram_s: f64,
    pub training_s: f64,
}

impl Tabular for CvRecord {
    fn header() -> &'static [&'static str] {
        &[
            "pipeline", "best_c", "kernel", "offset", "degree", "sigma", "mean_auc", "std_auc", "fold_aucs", "averaging", "gram_scale",
            "evaluated", "masking_s", "gram_s", "training_s",
        ]
    }
}

impl CvRecord {
    pub fn new(pipeline: &str, result: &PipelineResult) -> Self {
        let cv = &result.cv;
        let (kernel, offset, degree, sigma) = match cv.best_kernel {
            KernelSpec::Linear => ("linear", None, None, None),
            KernelSpec::Polynomial { offset, degree } => ("polynomial", Some(offset), Some(degree), None),
            KernelSpec::Rbf { sigma } => ("rbf", None, None, Some(sigma)),
        };
        CvRecord {
            pipeline: pipeline.to_string(),
            best_c: cv.best_c,
            kernel: kernel.to_string(),
            offset,
            degree,
            sigma,
            mean_auc: cv.mean_auc,
            std_auc: cv.std_auc,
            fold_aucs: cv.fold_aucs.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            averaging: cv.averaging,
            gram_scale: cv.gram_scale,
            evaluated: cv.evaluated,
            masking_s: result.masking_s,
            gram_s: result.gram_s,
            training_s: result.training_s,
        }
    }

    pub fn cv_report(&self) -> Result<CvReport> {
        let best_kernel = match (self.kernel.as_str(), self.offset, self.degree, self.sigma) {
            ("linear", ..) => KernelSpec::Linear,
            ("polynomial", Some(offset), Some(degree), _) => KernelSpec::Polynomial { offset, degree },
            ("rbf", _, _, Some(sigma)) => KernelSpec::Rbf { sigma },
            _ => return Err(Error::Config(format!("incomplete kernel description {:?}", self.kernel))),
        };
        let fold_aucs = if self.fold_aucs.is_empty() {
            Vec::new()
        } else {
            self.fold_aucs
                .split(';')
                .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad fold auc {v:?}"))))
                .collect::<Result<_>>()?
        };
        Ok(CvReport {
            best_c: self.best_c,
            best_kernel,
            fold_aucs,
            mean_auc: self.mean_auc,
            std_auc: self.std_auc,
            averaging: self.averaging,
            gram_scale: self.gram_scale,
            evaluated: self.evaluated,
        })
    }
}

impl Tabular for TimingSample {
    fn header() -> &'static [&'static str] {
        &["size", "repeat", "masking_s", "gram_s", "training_s"]
    }
}

impl Tabular for RoundTiming {
    fn header() -> &'static [&'static str] {
        &["round", "new_rows", "total_rows", "masking_s", "gram_s", "recompute_error", "plaintext_error"]
    }
}

/// Mean and standard deviation of one stage at one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub size: usize,
    pub stage: String,
    pub repeats: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

impl Tabular for StageRecord {
    fn header() -> &'static [&'static str] {
        &["size", "stage", "repeats", "mean_s", "std_s"]
    }
}

impl TimingReport {
    pub fn stage_records(&self) -> Vec<StageRecord> {
        [("masking", self.masking), ("gram", self.gram), ("training", self.training)]
            .into_iter()
            .map(|(stage, s)| StageRecord { size: self.size, stage: stage.into(), repeats: self.repeats, mean_s: s.mean_s, std_s: s.std_s })
            .collect()
    }
}
