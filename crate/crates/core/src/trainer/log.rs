use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRecord {
    pub fn line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.epoch, self.split, self.metric, self.value)
    }

    pub fn parse(line: &str) -> Option<Self> {
        let mut cols = line.split('\t');
        let rec = Self {
            epoch: cols.next()?.parse().ok()?,
            split: cols.next()?.to_string(),
            metric: cols.next()?.to_string(),
            value: cols.next()?.parse().ok()?,
        };
        cols.next().is_none().then_some(rec)
    }
}

/// Per-epoch metrics, optionally mirrored to an append-only file with one
/// `epoch  split  metric  value` line (tab separated) per record.
#[derive(Clone, Debug, Default)]
pub struct MetricLog {
    path: Option<PathBuf>,
    pub records: Vec<MetricRecord>,
}

impl MetricLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
            records: Vec::new(),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn record(&mut self, epoch: usize, split: &str, metric: &str, value: f64) -> Result<()> {
        let rec = MetricRecord {
            epoch,
            split: split.to_string(),
            metric: metric.to_string(),
            value,
        };
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            writeln!(f, "{}", rec.line()).map_err(|e| Error::io(path, e))?;
        }
        log::debug!("{}", rec.line());
        self.records.push(rec);
        Ok(())
    }

    pub fn values(&self, split: &str, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.split == split && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appends_parseable_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.log");
        let mut log = MetricLog::to_file(&path);
        log.record(1, "dev", "accuracy", 0.25).unwrap();
        log.record(2, "train", "loss", 1.5).unwrap();
        let mut again = MetricLog::to_file(&path);
        again.record(3, "dev", "accuracy", 0.5).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let recs: Vec<MetricRecord> = text.lines().map(|l| MetricRecord::parse(l).unwrap()).collect();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].line(), "1\tdev\taccuracy\t0.25");
        assert_eq!(recs[2].value, 0.5);
        assert_eq!(log.values("dev", "accuracy"), vec![0.25]);
    }
}
