//! File formats: sample, prediction and comparison CSVs with JSON sidecars.
//!
//! CSVs are UTF-8 with a header row and LF line endings; reals are written
//! in shortest round-trip decimal form. Every CSV at `path` has its metadata
//! in `path.json`, carrying a `schema_version` field.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Ensemble, WeightedSample};
use crate::error::{Error, Result};
use crate::predictions::PredictedCdf;
use crate::stats::ComparisonReport;

pub const SCHEMA_VERSION: u32 = 1;

pub const SAMPLE_COLUMNS: [&str; 6] = ["ensemble", "theta_deg", "weight", "within_cutoff", "chain_id", "attempt"];
pub const PREDICTION_COLUMNS: [&str; 2] = ["theta_deg", "cdf"];
pub const COMPARISON_COLUMNS: [&str; 5] = ["theta_deg", "cdf_pred", "cdf_sim", "delta", "stderr"];

/// Sidecar path for a data file: `samples.csv` → `samples.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<&File>) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, |w| w.write_all(&bytes))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut bytes = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut bytes);
        for r in rows {
            w.serialize(r).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, |w| w.write_all(&bytes))
}

fn read_csv<R: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<R>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    for (k, &want) in columns.iter().enumerate() {
        match headers.get(k) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::Schema {
                    file: path.into(),
                    detail: format!("column {} is '{got}', expected '{want}'", k + 1),
                })
            }
            None => return Err(Error::Schema { file: path.into(), detail: format!("missing column '{want}'") }),
        }
    }
    if headers.len() > columns.len() {
        return Err(Error::Schema {
            file: path.into(),
            detail: format!("unexpected column '{}'", &headers[columns.len()]),
        });
    }
    reader.deserialize().map(|r| r.map_err(|e| Error::csv(path, e))).collect()
}

/// One row of a sample file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub ensemble: Ensemble,
    pub theta_deg: f64,
    pub weight: f64,
    pub within_cutoff: bool,
    pub chain_id: u64,
    pub attempt: u64,
}

impl SampleRecord {
    pub fn new(sample: &WeightedSample, chain_id: u64, attempt: u64) -> Self {
        SampleRecord {
            ensemble: sample.ensemble,
            theta_deg: sample.theta_deg,
            weight: sample.weight,
            within_cutoff: sample.within_cutoff,
            chain_id,
            attempt,
        }
    }

    pub fn sample(&self) -> WeightedSample {
        WeightedSample {
            ensemble: self.ensemble,
            theta_deg: self.theta_deg,
            weight: self.weight,
            within_cutoff: self.within_cutoff,
        }
    }
}

pub fn write_samples(path: &Path, records: impl IntoIterator<Item = SampleRecord>) -> Result<()> {
    write_csv(path, records)
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRecord>> {
    read_csv(path, &SAMPLE_COLUMNS)
}

/// Samples grouped by chain, chains in order of first appearance.
pub fn group_by_chain(records: &[SampleRecord]) -> Vec<(u64, Vec<WeightedSample>)> {
    let mut out: Vec<(u64, Vec<WeightedSample>)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(id, _)| *id == r.chain_id) {
            Some((_, v)) => v.push(r.sample()),
            None => out.push((r.chain_id, vec![r.sample()])),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub theta_deg: f64,
    pub cdf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMetadata {
    pub schema_version: u32,
    pub version: String,
    pub ensemble: Ensemble,
    pub prediction: PredictedCdf,
}

pub fn write_prediction(path: &Path, ensemble: Ensemble, pred: &PredictedCdf) -> Result<()> {
    write_csv(path, pred.grid.iter().zip(&pred.values).map(|(&theta_deg, &cdf)| PredictionRow { theta_deg, cdf }))?;
    let meta = PredictionMetadata {
        schema_version: SCHEMA_VERSION,
        version: crate::VERSION.to_string(),
        ensemble,
        prediction: pred.clone(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a prediction CSV and its sidecar and checks they agree.
pub fn read_prediction(path: &Path) -> Result<(Ensemble, PredictedCdf)> {
    let rows: Vec<PredictionRow> = read_csv(path, &PREDICTION_COLUMNS)?;
    let meta_path = sidecar_path(path);
    let meta: PredictionMetadata = read_json(&meta_path)?;
    check_schema(&meta_path, meta.schema_version)?;
    let pred = PredictedCdf {
        grid: rows.iter().map(|r| r.theta_deg).collect(),
        values: rows.iter().map(|r| r.cdf).collect(),
        ..meta.prediction
    };
    if pred.grid != meta.prediction.grid {
        return Err(Error::Schema {
            file: path.into(),
            detail: "theta_deg column differs from the sidecar grid".into(),
        });
    }
    Ok((meta.ensemble, pred))
}

pub fn check_schema(path: &Path, version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Schema {
            file: path.into(),
            detail: format!("schema_version {version}, expected {SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

pub fn write_comparison(path: &Path, report: &ComparisonReport) -> Result<()> {
    write_csv(path, report.rows.iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/s.csv")), PathBuf::from("out/s.csv.json"));
    }

    #[test]
    fn samples_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let records = vec![
            SampleRecord {
                ensemble: Ensemble::Half,
                theta_deg: 0.1 + 0.2,
                weight: 1e-300,
                within_cutoff: true,
                chain_id: 0,
                attempt: 5,
            },
            SampleRecord {
                ensemble: Ensemble::Half,
                theta_deg: 89.999_999_999_1,
                weight: std::f64::consts::PI,
                within_cutoff: false,
                chain_id: 1,
                attempt: 6,
            },
        ];
        write_samples(&path, records.clone()).unwrap();
        assert_eq!(read_samples(&path).unwrap(), records);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("ensemble,theta_deg,weight,within_cutoff,chain_id,attempt\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn schema_errors_name_the_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "ensemble,theta,weight,within_cutoff,chain_id,attempt\n").unwrap();
        let err = read_samples(&path).unwrap_err().to_string();
        assert!(err.contains("theta") && err.contains("theta_deg"), "{err}");
        std::fs::write(&path, "theta_deg\n1.0\n").unwrap();
        let err = read_csv::<PredictionRow>(&path, &PREDICTION_COLUMNS).unwrap_err().to_string();
        assert!(err.contains("missing column 'cdf'"), "{err}");
    }

    #[test]
    fn grouping_keeps_chain_order() {
        let r = |c, a| SampleRecord {
            ensemble: Ensemble::Full,
            theta_deg: 1.0,
            weight: 1.0,
            within_cutoff: true,
            chain_id: c,
            attempt: a,
        };
        let groups = group_by_chain(&[r(2, 0), r(0, 0), r(2, 1)]);
        assert_eq!(groups.iter().map(|(c, v)| (*c, v.len())).collect::<Vec<_>>(), vec![(2, 2), (0, 1)]);
    }
}
