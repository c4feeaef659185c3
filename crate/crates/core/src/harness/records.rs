use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::MetricRecord;

use super::AggregateRow;

/// Version of the record CSV layout. The first line of a records file is
/// `# splinemoco-records v<version> n_projections=<N>`.
pub const SCHEMA_VERSION: u32 = 1;

fn schema_line(n_projections: usize) -> String {
    format!("# splinemoco-records v{SCHEMA_VERSION} n_projections={n_projections}")
}

/// Reads the schema line; returns the projection count it declares.
pub fn read_schema(path: &Path) -> Result<usize> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(f).read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let bad = || Error::InvalidArgument(format!("{}: missing or unsupported schema line", path.display()));
    let rest = line.trim().strip_prefix("# splinemoco-records v").ok_or_else(bad)?;
    let (version, n) = rest.split_once(" n_projections=").ok_or_else(bad)?;
    if version.parse::<u32>().map_err(|_| bad())? != SCHEMA_VERSION {
        return Err(bad());
    }
    n.parse().map_err(|_| bad())
}

pub fn read_records(path: &Path) -> Result<Vec<MetricRecord>> {
    read_schema(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Appends records to `path`, creating it with schema line and header first
/// when it does not exist yet.
pub struct RecordWriter {
    path: PathBuf,
    file: File,
    header_pending: bool,
}

impl RecordWriter {
    pub fn open(path: &Path, n_projections: usize) -> Result<Self> {
        let exists = path.exists() && std::fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false);
        if exists {
            let n = read_schema(path)?;
            if n != n_projections {
                return Err(Error::InvalidArgument(format!(
                    "{} was written for {n} projections, config has {n_projections}",
                    path.display()
                )));
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if !exists {
            writeln!(file, "{}", schema_line(n_projections)).map_err(|e| Error::io(path, e))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
            header_pending: !exists,
        })
    }

    pub fn append(&mut self, record: &MetricRecord) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(self.header_pending)
            .from_writer(Vec::new());
        w.serialize(record)?;
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        self.file.write_all(&bytes).and_then(|_| self.file.flush()).map_err(|e| Error::io(&self.path, e))?;
        self.header_pending = false;
        Ok(())
    }
}

/// Replaces `path` with exactly `records` (schema line, header, rows).
pub fn write_records(path: &Path, records: &[MetricRecord], n_projections: usize) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    if tmp.exists() {
        std::fs::remove_file(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    {
        let mut w = RecordWriter::open(&tmp, n_projections)?;
        for r in records {
            w.append(r)?;
        }
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64) -> MetricRecord {
        MetricRecord {
            scan_seed: seed,
            cutoff: 0.1 / 3.0,
            n_nodes: 10,
            rpe_before_mm: 2.0,
            rpe_after_mm: 1.0,
            rpe_before_raw_mm: 2.5,
            rpe_after_raw_mm: 1.5,
            ssim_before: 0.6,
            ssim_after: 0.7,
            rpe_ratio: 0.5,
            rpe_ratio_raw: 0.6,
            ssim_ratio: 0.7 / 0.6,
        }
    }

    #[test]
    fn append_and_read_back_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        RecordWriter::open(&path, 120).unwrap().append(&record(0)).unwrap();
        RecordWriter::open(&path, 120).unwrap().append(&record(1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# splinemoco-records v1 n_projections=120\nscan_seed,cutoff,n_nodes,"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_records(&path).unwrap(), vec![record(0), record(1)]);
        assert_eq!(read_schema(&path).unwrap(), 120);
        assert!(RecordWriter::open(&path, 180).is_err());
    }

    #[test]
    fn undefined_ratio_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let mut r = record(0);
        r.rpe_ratio = f64::NAN;
        write_records(&path, &[r], 60).unwrap();
        assert!(read_records(&path).unwrap()[0].rpe_ratio.is_nan());
    }

    #[test]
    fn rewrite_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records(&path, &[record(0), record(1)], 60).unwrap();
        write_records(&path, &[record(2)], 60).unwrap();
        assert_eq!(read_records(&path).unwrap(), vec![record(2)]);
    }

    #[test]
    fn files_without_schema_line_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        std::fs::write(&path, "scan_seed,cutoff\n").unwrap();
        assert!(read_records(&path).is_err());
    }
}
