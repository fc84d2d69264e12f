use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One benchmark observation; one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub filter: String,
    pub api: String,
    pub op: String,
    pub mode: String,
    pub log_slots: u32,
    pub load_factor: f64,
    pub threads: usize,
    pub dist: String,
    pub seed: u64,
    pub items: u64,
    pub wall_seconds: f64,
    pub ops_per_sec: f64,
    pub fpr: Option<f64>,
    pub bits_per_item: f64,
    /// Naive time over this row's time, for map-reduce counting rows.
    pub speedup: Option<f64>,
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Input(e.to_string())
}

/// Serializes records, with a header row, to any writer.
pub fn write_records(out: impl Write, records: &[MetricsRecord], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in records {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Appends to `path`; the header is written only when the file is new or empty.
pub fn append_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    write_records(file, records, fresh)
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    r.deserialize().map(|row| row.map_err(io)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(fpr: Option<f64>) -> MetricsRecord {
        MetricsRecord {
            filter: "tcf".into(),
            api: "point".into(),
            op: "insert".into(),
            mode: "naive".into(),
            log_slots: 20,
            load_factor: 0.9,
            threads: 4,
            dist: "uniform".into(),
            seed: 1,
            items: 943_718,
            wall_seconds: 0.25,
            ops_per_sec: 3.7e6,
            fpr,
            bits_per_item: 17.9,
            speedup: None,
        }
    }

    #[test]
    fn append_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        append_csv(&path, &[sample(None)]).unwrap();
        append_csv(&path, &[sample(Some(0.0004))]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("filter,")).count(), 1);
        assert_eq!(read_csv(&path).unwrap(), vec![sample(None), sample(Some(0.0004))]);
    }
}
