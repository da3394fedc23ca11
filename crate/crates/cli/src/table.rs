//! CSV reading and writing of multichannel series.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use freqband::TimeSeries;

use crate::error::{CliError, Result};

/// Reads a rectangular numeric table: rows are times, columns channels. A
/// first row in which no field parses as a number is taken as a header and
/// supplies the channel names.
pub fn read_csv(path: &Path) -> Result<TimeSeries> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(file)
}

pub fn parse_csv<R: Read>(input: R) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut names: Option<Vec<String>> = None;
    let mut width = 0;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        if i == 0 && !record.iter().any(|f| f.parse::<f64>().is_ok()) {
            names = Some(record.iter().map(str::to_owned).collect());
            width = record.len();
            continue;
        }
        if width == 0 {
            width = record.len();
        }
        if record.len() != width {
            return Err(CliError::Data(format!(
                "row {row} has {} field{}, expected {width}",
                record.len(),
                if record.len() == 1 { "" } else { "s" }
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!("row {row}, column {}: cannot parse {field:?} as a number", j + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("row {row}, column {}: value {field:?} is not finite", j + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 || width == 0 {
        return Err(CliError::Data("no numeric rows".into()));
    }
    let ts = TimeSeries::new(values, width)?;
    Ok(match names {
        Some(n) => ts.with_names(n)?,
        None => ts,
    })
}

/// Column names, falling back to `x1, x2, ...`.
pub fn column_names(ts: &TimeSeries) -> Vec<String> {
    match ts.names() {
        Some(n) => n.to_vec(),
        None => (1..=ts.channels()).map(|c| format!("x{c}")).collect(),
    }
}

/// Writes a header row and every value with 17 significant digits, which
/// reads back to the same `f64`.
pub fn write_csv<W: Write>(ts: &TimeSeries, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::Data(format!("writing CSV: {e}"));
    writer.write_record(column_names(ts)).map_err(fail)?;
    for t in 0..ts.len() {
        writer.write_record(ts.row(t).iter().map(|v| format!("{v:.16e}"))).map_err(fail)?;
    }
    writer.flush().map_err(|e| CliError::Data(format!("writing CSV: {e}")))?;
    Ok(())
}
