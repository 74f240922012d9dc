//! Vehicle-count CSV ingestion.
//!
//! Expected schema: a UTF-8 file with the exact header
//! `station_id,window_start,vehicle_count`, ISO-8601 UTC timestamps and
//! non-negative counts. `(station_id, window_start)` must be unique.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::CliError;

/// One aggregation window of one station.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsRecord {
    pub station_id: String,
    pub window_start: DateTime<Utc>,
    pub vehicle_count: u64,
}

pub const COUNTS_HEADER: [&str; 3] = ["station_id", "window_start", "vehicle_count"];

pub fn ingest_counts_csv(path: &Path) -> Result<Vec<CountsRecord>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|err| CliError::Parse(format!("{}: {err}", path.display())))?;

    let header = reader
        .headers()
        .map_err(|err| CliError::Parse(format!("{}: {err}", path.display())))?;
    if header != COUNTS_HEADER.as_slice() {
        return Err(CliError::Parse(format!(
            "{}: header must be `{}`, got `{}`",
            path.display(),
            COUNTS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut records = Vec::new();
    let mut seen: HashMap<(String, DateTime<Utc>), u64> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|err| CliError::Parse(format!("{}: {err}", path.display())))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            return Err(CliError::Parse(format!(
                "line {line}: expected 3 fields, got {}",
                row.len()
            )));
        }

        let station_id = row[0].to_string();
        if station_id.is_empty() {
            return Err(CliError::Validation(format!(
                "line {line}: empty station_id"
            )));
        }

        let window_start = DateTime::parse_from_rfc3339(&row[1])
            .map_err(|err| {
                CliError::Parse(format!("line {line}: bad window_start `{}`: {err}", &row[1]))
            })?
            .with_timezone(&Utc);

        let raw_count: i64 = row[2].parse().map_err(|_| {
            CliError::Parse(format!("line {line}: bad vehicle_count `{}`", &row[2]))
        })?;
        if raw_count < 0 {
            return Err(CliError::Validation(format!(
                "line {line}: negative vehicle_count {raw_count}"
            )));
        }

        let key = (station_id.clone(), window_start);
        if let Some(&first_line) = seen.get(&key) {
            return Err(CliError::Validation(format!(
                "duplicate (station_id, window_start) = ({station_id}, {window_start}): lines {first_line} and {line}"
            )));
        }
        seen.insert(key, line);

        records.push(CountsRecord {
            station_id,
            window_start,
            vehicle_count: raw_count as u64,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn header_only_file_is_empty() {
        let file = write_csv("station_id,window_start,vehicle_count\n");
        assert!(ingest_counts_csv(file.path()).unwrap().is_empty());
    }

    #[test]
    fn single_record_parses() {
        let file = write_csv(
            "station_id,window_start,vehicle_count\nS7,2017-05-01T08:00:00Z,42\n",
        );
        let records = ingest_counts_csv(file.path()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].station_id, "S7");
        assert_eq!(records[0].vehicle_count, 42);
        assert_eq!(
            records[0].window_start,
            DateTime::parse_from_rfc3339("2017-05-01T08:00:00Z").unwrap()
        );
    }

    #[test]
    fn duplicate_window_names_both_lines() {
        let file = write_csv(
            "station_id,window_start,vehicle_count\n\
             S7,2017-05-01T08:00:00Z,42\n\
             S8,2017-05-01T08:00:00Z,10\n\
             S7,2017-05-01T08:00:00Z,43\n",
        );
        let err = ingest_counts_csv(file.path()).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("lines 2 and 4"), "{message}");
    }

    #[test]
    fn negative_count_is_a_validation_error() {
        let file = write_csv(
            "station_id,window_start,vehicle_count\nS7,2017-05-01T08:00:00Z,-3\n",
        );
        let err = ingest_counts_csv(file.path()).unwrap_err();
        assert!(err.to_string().contains("negative vehicle_count"));
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let bad_timestamp = write_csv(
            "station_id,window_start,vehicle_count\nS7,yesterday,3\n",
        );
        let err = ingest_counts_csv(bad_timestamp.path()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        let bad_header = write_csv("station,window,count\nS7,2017-05-01T08:00:00Z,3\n");
        assert!(ingest_counts_csv(bad_header.path()).is_err());
    }
}
