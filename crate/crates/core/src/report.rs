//! JSON and CSV output for experiment reports.
//!
//! JSON keys follow struct field order, so the same report always produces the
//! same bytes. `serde_json` would silently write NaN as `null`; reports are
//! therefore scanned first and rejected, naming the offending field.
//!
//! CSV files are comma separated with a header row; reals are written with
//! 17 significant digits (`{:.16e}`).

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub trait Report: Serialize {
    /// Dotted path of the first non-finite real in the report, if any.
    fn non_finite_field(&self) -> Option<String>;
}

pub(crate) fn check_real(name: &str, value: f64) -> Option<String> {
    (!value.is_finite()).then(|| name.to_string())
}

pub(crate) fn check_reals(name: &str, values: &[f64]) -> Option<String> {
    values
        .iter()
        .position(|v| !v.is_finite())
        .map(|i| format!("{name}[{i}]"))
}

pub fn serialize_report<R: Report + ?Sized>(report: &R) -> Result<String> {
    if let Some(field) = report.non_finite_field() {
        return Err(Error::NonFiniteField(field));
    }
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn write_report<R: Report + ?Sized>(path: &Path, report: &R) -> Result<()> {
    let text = serialize_report(report)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn format_real(value: f64) -> String {
    format!("{value:.16e}")
}

/// One singular value per line under a `singular_value` header.
pub fn write_singular_values_csv<W: Write>(out: W, singular_values: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["singular_value"])?;
    for &s in singular_values {
        writer.write_record([format_real(s)])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
