//! Agent x instance grids, literature bounds and reports.

mod bounds;
mod grid;
mod report;

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::instance::ValidationReport;

pub use bounds::{
    embedded_bounds, lookup, published_averages, BoundsEntry, Dataset, PublishedAverages,
};
pub use grid::{run_grid, CellOutput, GridOptions, RunRecord};
pub use report::{csv_header, report, Report, CSV_SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("instance {name} is invalid: {report}")]
    InvalidInstance {
        name: String,
        report: ValidationReport,
    },
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("no records to report")]
    NoRecords,
    #[error("record line {line}: {source}")]
    Record {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// One JSON object per line.
pub fn write_records<W: Write>(mut out: W, records: &[RunRecord]) -> Result<(), HarnessError> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<RunRecord>, HarnessError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|source| HarnessError::Record {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let records = vec![RunRecord {
            instance: "ta41".into(),
            agent: "softmax:a4:0.05".into(),
            seed: Some(3),
            wall_budget: 60.0,
            makespan: Some(2400),
            lower_bound: 2005,
            episodes: 1234,
            wall_time: 60.01,
            engine_steps_per_second: 2.5e6,
            valid: true,
            error: None,
        }];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        assert_eq!(read_records(&buf[..]).unwrap(), records);
        assert!(matches!(
            read_records(&b"\n{oops}\n"[..]),
            Err(HarnessError::Record { line: 2, .. })
        ));
    }
}
