//! Plaintext sample matrices, the synthetic blob generator and CSV I/O.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::rng::domain;
use crate::linalg::{MaskRng, Matrix};

/// `n × f` samples (rows) by features (columns), with optional integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    pub features: Matrix,
    pub labels: Option<Vec<i64>>,
}

impl DataMatrix {
    pub fn new(features: Matrix, labels: Option<Vec<i64>>) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != features.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    features.rows()
                )));
            }
        }
        Ok(DataMatrix { features, labels })
    }

    pub fn unlabeled(features: Matrix) -> Self {
        DataMatrix { features, labels: None }
    }

    pub fn samples(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn rows(&self, start: usize, end: usize) -> DataMatrix {
        DataMatrix {
            features: self.features.row_range(start, end),
            labels: self.labels.as_ref().map(|l| l[start..end].to_vec()),
        }
    }

    /// Multiplies the features by `rotation` on the right.
    pub fn rotated(&self, rotation: &Matrix) -> Result<DataMatrix> {
        Ok(DataMatrix { features: self.features.matmul(rotation)?, labels: self.labels.clone() })
    }

    /// Vertical concatenation; labels are kept only if every part has them.
    pub fn concat(parts: &[&DataMatrix]) -> Result<DataMatrix> {
        let features = Matrix::vstack(&parts.iter().map(|p| &p.features).collect::<Vec<_>>())?;
        let labels = parts
            .iter()
            .map(|p| p.labels.clone())
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat());
        Ok(DataMatrix { features, labels })
    }

    /// Splits into contiguous nearly equal partitions.
    pub fn partition(&self, parts: usize) -> Vec<DataMatrix> {
        let n = self.samples();
        (0..parts)
            .map(|p| self.rows(p * n / parts, (p + 1) * n / parts))
            .collect()
    }
}

/// Balanced Gaussian blobs.
///
/// Sample `i` belongs to class `i mod classes`, so class sizes differ by at
/// most one. Class means are standard-normal draws rescaled so that the
/// closest pair of means is exactly `separation` apart; within-class noise
/// is unit-variance isotropic. Labels are `0..classes`.
pub fn gen_synthetic(n: usize, f: usize, classes: usize, separation: f64, seed: u64) -> Result<DataMatrix> {
    if classes == 0 || classes > n {
        return Err(Error::Config(format!("cannot draw {classes} classes from {n} samples")));
    }
    if f == 0 {
        return Err(Error::Config("synthetic data needs at least one feature".into()));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::Config(format!("invalid class separation {separation}")));
    }
    let mut rng = MaskRng::new(seed, domain::SYNTHETIC, 0);
    let mut means = rng.normal_matrix(classes, f);
    if classes > 1 {
        let mut closest = f64::INFINITY;
        for a in 0..classes {
            for b in a + 1..classes {
                let d: f64 = means.row(a).iter().zip(means.row(b)).map(|(x, y)| (x - y).powi(2)).sum();
                closest = closest.min(d.sqrt());
            }
        }
        if closest > 0.0 {
            means = means.scale(separation / closest);
        }
    }

    let mut noise = MaskRng::new(seed, domain::SYNTHETIC, 1);
    let mut data = Vec::with_capacity(n * f);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        loop {
            let row: Vec<f64> = means.row(class).iter().map(|m| m + noise.normal()).collect();
            if row.iter().any(|v| *v != 0.0) {
                data.extend(row);
                break;
            }
        }
        labels.push(class as i64);
    }
    DataMatrix::new(Matrix::from_vec(n, f, data)?, Some(labels))
}

/// Reads a numeric CSV with a header row; `label_column` names the integer
/// label column, all other columns are features.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let label_index = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Csv(format!("missing label column {name:?}")))?,
        ),
        None => None,
    };
    let feature_count = headers.len() - usize::from(label_index.is_some());
    if feature_count == 0 {
        return Err(Error::Csv("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if Some(col) == label_index {
                let label = cell.parse::<i64>().map_err(|_| {
                    Error::Csv(format!("row {}: label {cell:?} is not an integer", line + 1))
                })?;
                labels.push(label);
            } else {
                let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Csv(format!("row {}, column {:?}: {cell:?} is not a finite number", line + 1, &headers[col]))
                })?;
                values.push(v);
            }
        }
        rows += 1;
    }
    let features = Matrix::from_vec(rows, feature_count, values)?;
    DataMatrix::new(features, label_index.map(|_| labels))
}

/// Writes features as `x0..x{f-1}` followed by a `label` column when present.
pub fn write_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = (0..data.feature_count()).map(|j| format!("x{j}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    writer.write_record(&header)?;
    for i in 0..data.samples() {
        let mut record: Vec<String> = data.features.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = &data.labels {
            record.push(labels[i].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a bare matrix as CSV with `c0..` headers.
pub fn write_matrix_csv(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record((0..m.cols()).map(|j| format!("c{j}")))?;
    for i in 0..m.rows() {
        writer.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn synthetic_is_balanced_and_deterministic() {
        let d = gen_synthetic(1000, 20, 4, 4.0, 9).unwrap();
        assert_eq!(d.features.shape(), (1000, 20));
        let labels = d.labels.as_ref().unwrap();
        for c in 0..4 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 250);
        }
        let again = gen_synthetic(1000, 20, 4, 4.0, 9).unwrap();
        assert_eq!(d.features.as_slice(), again.features.as_slice());
        assert!(gen_synthetic(3, 2, 4, 1.0, 0).is_err());
    }

    #[test]
    fn remainder_is_round_robin() {
        let d = gen_synthetic(10, 2, 3, 1.0, 1).unwrap();
        let labels = d.labels.unwrap();
        let counts: Vec<usize> = (0..3).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
        assert_eq!(counts, vec![4, 3, 3]);
    }

    fn fixture(contents: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file
    }

    #[test]
    fn loads_three_row_fixture() {
        let file = fixture("a,b,y\n1.0,2.0,0\n3,4,1\n-1e-3,5,1\n");
        let d = load_csv(file.path(), Some("y")).unwrap();
        assert_eq!(d.features.shape(), (3, 2));
        assert_eq!(d.labels.unwrap(), vec![0, 1, 1]);
        assert_eq!(d.features.get(2, 0), -1e-3);
    }

    #[test]
    fn csv_errors() {
        let ragged = fixture("a,b,y\n1,2,0\n3,1\n");
        assert!(matches!(load_csv(ragged.path(), Some("y")), Err(Error::Csv(_))));
        let text = fixture("a,b,y\n1,abc,0\n");
        assert!(matches!(load_csv(text.path(), Some("y")), Err(Error::Csv(_))));
        let missing = fixture("a,b\n1,2\n");
        assert!(matches!(load_csv(missing.path(), Some("y")), Err(Error::Csv(_))));
        let bad_label = fixture("a,y\n1,0.5\n");
        assert!(load_csv(bad_label.path(), Some("y")).is_err());
    }

    #[test]
    fn zero_rows_load_fine() {
        let file = fixture("a,b,y\n0,0,1\n1,2,0\n");
        let d = load_csv(file.path(), Some("y")).unwrap();
        assert_eq!(d.features.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn write_then_read_round_trips() {
        let d = gen_synthetic(25, 3, 2, 2.0, 5).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, file.path()).unwrap();
        let back = load_csv(file.path(), Some("label")).unwrap();
        assert_eq!(back, d);
    }
}
