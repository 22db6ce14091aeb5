//! CDR-style traffic CSV files: `cell_id,timestamp,traffic`.
//!
//! Timestamps are either ISO-8601 (UTC assumed when no offset is given) or
//! integer epoch milliseconds; the format is detected from the first data
//! row and must not change within a file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bafdp_core::data::{RepairReport, TrafficSeries};
use chrono::{DateTime, NaiveDateTime};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: expected header `cell_id,timestamp,traffic`, found `{found}`")]
    Header { path: PathBuf, found: String },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("{path}: {source}")]
    Series {
        path: PathBuf,
        source: bafdp_core::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampFormat {
    Iso8601,
    EpochMillis,
}

/// Per-cell repair statistics of one load.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub timestamp_format: TimestampFormat,
    pub cells: Vec<(String, RepairReport)>,
}

impl LoadReport {
    pub fn interpolated_total(&self) -> usize {
        self.cells.iter().map(|(_, r)| r.interpolated.len()).sum()
    }

    /// Human-readable summary, one line per cell.
    pub fn render(&self) -> String {
        let mut out = format!(
            "timestamps: {:?}\ncells: {}\ninterpolated hours: {}\n",
            self.timestamp_format,
            self.cells.len(),
            self.interpolated_total()
        );
        for (cell, r) in &self.cells {
            let _ = writeln!(
                out,
                "  {cell}: rows={} interpolated={} duplicates={} out_of_order={}",
                r.rows,
                r.interpolated.len(),
                r.duplicates,
                r.out_of_order
            );
        }
        out
    }
}

fn parse_iso(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|dt| dt.and_utc().timestamp_millis())
}

fn parse_timestamp(s: &str, format: TimestampFormat) -> Option<i64> {
    match format {
        TimestampFormat::EpochMillis => s.parse::<i64>().ok(),
        TimestampFormat::Iso8601 => parse_iso(s),
    }
}

/// Reads every cell's series, repairing gaps by interpolation.
pub fn load_cdr_csv(path: &Path) -> Result<(Vec<TrafficSeries>, LoadReport), CsvError> {
    let file = std::fs::File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["cell_id", "timestamp", "traffic"] {
        return Err(CsvError::Header {
            path: path.to_path_buf(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let malformed = |line: u64, reason: String| CsvError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut format = None;
    let mut rows: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
        }
        let ts = &record[1];
        let fmt = *format.get_or_insert(if ts.parse::<i64>().is_ok() {
            TimestampFormat::EpochMillis
        } else {
            TimestampFormat::Iso8601
        });
        let ms = parse_timestamp(ts, fmt)
            .ok_or_else(|| malformed(line, format!("timestamp `{ts}` is not {fmt:?}")))?;
        let traffic: f64 = record[2]
            .parse()
            .map_err(|_| malformed(line, format!("traffic `{}` is not a number", &record[2])))?;
        if !(traffic.is_finite() && traffic >= 0.0) {
            return Err(malformed(line, format!("traffic `{}` must be nonnegative", &record[2])));
        }
        rows.entry(record[0].to_string()).or_default().push((ms, traffic));
    }
    let format = format.ok_or_else(|| CsvError::Empty {
        path: path.to_path_buf(),
    })?;
    let mut series = Vec::with_capacity(rows.len());
    let mut cells = Vec::with_capacity(rows.len());
    for (cell, obs) in rows {
        let (s, report) =
            TrafficSeries::from_observations(cell.clone(), &obs).map_err(|source| CsvError::Series {
                path: path.to_path_buf(),
                source,
            })?;
        if report.duplicates > 0 || report.out_of_order > 0 {
            log::warn!(
                "{}: cell {cell}: {} duplicate and {} out-of-order rows summed into hourly bins",
                path.display(),
                report.duplicates,
                report.out_of_order
            );
        }
        series.push(s);
        cells.push((cell, report));
    }
    Ok((
        series,
        LoadReport {
            timestamp_format: format,
            cells,
        },
    ))
}

/// Writes series with epoch-millisecond timestamps. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_cdr_csv(path: &Path, series: &[TrafficSeries]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell_id", "timestamp", "traffic"])?;
    for s in series {
        for (k, v) in s.values.iter().enumerate() {
            let ms = s.hour(k) * 3_600_000;
            w.write_record([s.cell_id.as_str(), &ms.to_string(), &v.to_string()])?;
        }
    }
    w.flush().map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_rows_one_cell() {
        let f = file("cell_id,timestamp,traffic\na,2013-11-01T00:00:00Z,1.5\na,2013-11-01T01:00:00Z,2\n");
        let (s, r) = load_cdr_csv(f.path()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].values, vec![1.5, 2.0]);
        assert_eq!(r.timestamp_format, TimestampFormat::Iso8601);
        assert_eq!(r.interpolated_total(), 0);
    }

    #[test]
    fn gap_flagged() {
        let f = file("cell_id,timestamp,traffic\na,0,1\na,7200000,3\nb,0,4\n");
        let (s, r) = load_cdr_csv(f.path()).unwrap();
        assert_eq!(s[0].values, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.interpolated_total(), 1);
        assert_eq!(r.timestamp_format, TimestampFormat::EpochMillis);
        assert!(r.render().contains("interpolated hours: 1"));
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = file("cell_id,timestamp,traffic\na,0,1\na,3600000,abc\n");
        let e = load_cdr_csv(f.path()).unwrap_err();
        assert!(matches!(e, CsvError::Malformed { line: 3, .. }), "{e}");
        let f = file("cell_id,timestamp,traffic\na,0,1\na,2013-11-01T01:00:00Z,1\n");
        assert!(matches!(load_cdr_csv(f.path()).unwrap_err(), CsvError::Malformed { line: 3, .. }));
        let f = file("cell,ts,v\na,0,1\n");
        assert!(matches!(load_cdr_csv(f.path()).unwrap_err(), CsvError::Header { .. }));
    }
}
