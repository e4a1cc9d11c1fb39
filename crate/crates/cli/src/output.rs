//! Result files: the `μ_T` table as CSV and run summaries as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use boundary_walk::{ArithmeticMode, CheckReport, FiniteMeasure, GroupSpec, Weight};
use serde::{Deserialize, Serialize};

use crate::config::RawGroup;
use crate::error::CliError;

pub const TABLE_FILE: &str = "mu_t.csv";
pub const SUMMARY_FILE: &str = "mu_t.json";
pub const REPORT_FILE: &str = "report.json";
pub const ENTROPY_FILE: &str = "entropy.csv";

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::internal(format!("csv: {e}"))
}

/// Rows in canonical element order with a running cumulative weight.
pub fn write_table<S: Weight>(path: &Path, measure: &FiniteMeasure<S>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["element", "weight", "weight_decimal", "cumulative"]).map_err(csv_err)?;
    let mut cumulative = S::zero();
    for (g, weight) in measure.iter() {
        cumulative = cumulative + weight.clone();
        w.write_record([g.to_string(), weight.to_literal(), weight.as_f64().to_string(), cumulative.as_f64().to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`] back into a measure.
pub fn read_table<S: Weight>(path: &Path, group: GroupSpec) -> Result<FiniteMeasure<S>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let line = i + 2;
        let bad = |what: String| CliError::Parse { file: path.display().to_string(), line, column: 1, message: what };
        let (Some(element), Some(weight)) = (record.get(0), record.get(1)) else {
            return Err(bad("expected element and weight columns".into()));
        };
        let g = group.parse_element(element).map_err(|e| bad(format!("bad element `{element}` for {group}: {}", e.message)))?;
        let w = S::parse_literal(weight).map_err(|e| bad(format!("bad weight `{weight}`: {e}")))?;
        entries.push((g, w));
    }
    FiniteMeasure::from_weights(group, entries).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Everything about a transform run except the table itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub group: RawGroup,
    pub group_name: String,
    pub mode: String,
    pub rule: String,
    pub method: String,
    pub seed: u64,
    pub samples: Option<u64>,
    pub epsilon: String,
    pub max_horizon: usize,
    pub horizon: usize,
    pub stopped_mass: String,
    pub mass_deficit: String,
    pub mass_deficit_decimal: f64,
    pub mean_stopping_time: f64,
    pub truncated: bool,
    pub support_size: usize,
    pub table: String,
}

impl Summary {
    pub fn mode(&self) -> Result<ArithmeticMode, CliError> {
        self.mode.parse().map_err(|_| CliError::usage(format!("summary has unknown mode `{}`", self.mode)))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(format!("json: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Resolves a compare argument to `(table, summary)`: a directory holding
/// both files, or a table with its summary next to it.
pub fn result_paths(arg: &Path) -> (PathBuf, PathBuf) {
    if arg.is_dir() {
        (arg.join(TABLE_FILE), arg.join(SUMMARY_FILE))
    } else {
        (arg.to_path_buf(), arg.with_extension("json"))
    }
}

pub fn read_summary(path: &Path) -> Result<Summary, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read summary {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        file: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[derive(Debug, Serialize)]
pub struct ReportRecord<'a> {
    pub name: &'a str,
    pub points_tested: usize,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: &'static str,
    pub pass: bool,
    pub seeds: &'a [u64],
    pub note: &'a str,
}

impl<'a> From<&'a CheckReport> for ReportRecord<'a> {
    fn from(r: &'a CheckReport) -> Self {
        ReportRecord {
            name: &r.name,
            points_tested: r.points_tested,
            residual: r.max_residual.is_finite().then_some(r.max_residual),
            tolerance: r.tolerance.is_finite().then_some(r.tolerance),
            status: r.status.as_str(),
            pass: r.passed(),
            seeds: &r.seeds,
            note: &r.note,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use boundary_walk::{GroupElement, Rational};

    #[test]
    fn table_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let g = GroupSpec::free(2).unwrap();
        let mu = FiniteMeasure::<Rational>::uniform(g, &g.generators()).unwrap().power(2);
        write_table(&path, &mu).unwrap();
        assert_eq!(read_table::<Rational>(&path, g).unwrap(), mu);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("element,weight,weight_decimal,cumulative\n"));
        assert!(!text.contains('\r'));
        assert!(text.lines().last().unwrap().ends_with(",1"));
    }

    #[test]
    fn table_round_trip_float() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let z = GroupSpec::integers(1).unwrap();
        let mu = FiniteMeasure::<f64>::from_weights(z, [(GroupElement::int(3), 0.1), (GroupElement::int(-2), 0.9)]).unwrap();
        write_table(&path, &mu).unwrap();
        assert_eq!(read_table::<f64>(&path, z).unwrap(), mu);
    }
}
