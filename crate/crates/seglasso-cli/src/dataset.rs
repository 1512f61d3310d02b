//! CSV dataset ingestion: header-addressed columns, one row per observation,
//! rows grouped by series and sorted by time. Diagnostics carry the 1-based
//! data row number.

use std::path::Path;

use seglasso::series::{Series, SeriesSet};

use crate::CliError;

pub fn parse_dataset(path: &Path) -> Result<SeriesSet<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("series_id")
        .ok_or_else(|| CliError::input(format!("{}: missing column 'series_id'", path.display())))?;
    let time_col = col("time")
        .ok_or_else(|| CliError::input(format!("{}: missing column 'time'", path.display())))?;
    let value_col = col("value")
        .ok_or_else(|| CliError::input(format!("{}: missing column 'value'", path.display())))?;
    let cov_col = col("covariate");

    struct Partial {
        id: String,
        times: Vec<f64>,
        values: Vec<f64>,
        covariates: Vec<f64>,
    }
    let mut done: Vec<Partial> = Vec::new();
    let mut current: Option<Partial> = None;

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record =
            record.map_err(|e| CliError::input(format!("row {row}: {e}")))?;
        let field = |idx: usize, name: &str| -> Result<&str, CliError> {
            let raw = record
                .get(idx)
                .ok_or_else(|| CliError::input(format!("row {row}: missing '{name}' cell")))?;
            if raw.trim().is_empty() {
                return Err(CliError::input(format!("row {row}: empty '{name}' cell")));
            }
            Ok(raw.trim())
        };
        let numeric = |idx: usize, name: &str| -> Result<f64, CliError> {
            let raw = field(idx, name)?;
            raw.parse::<f64>().map_err(|_| {
                CliError::input(format!("row {row}: '{name}' is not numeric: '{raw}'"))
            })
        };
        let id = field(id_col, "series_id")?.to_string();
        let time = numeric(time_col, "time")?;
        let value = numeric(value_col, "value")?;
        let covariate = match cov_col {
            Some(c) => numeric(c, "covariate")?,
            None => time,
        };

        let start_new = match &current {
            Some(p) => p.id != id,
            None => true,
        };
        if start_new {
            if let Some(p) = current.take() {
                done.push(p);
            }
            if done.iter().any(|d| d.id == id) {
                return Err(CliError::input(format!(
                    "row {row}: series '{id}' reappears after other series; rows must be grouped"
                )));
            }
            current = Some(Partial {
                id,
                times: Vec::new(),
                values: Vec::new(),
                covariates: Vec::new(),
            });
        }
        let p = current.as_mut().unwrap();
        if let Some(&last) = p.times.last() {
            if time <= last {
                return Err(CliError::input(format!(
                    "row {row}: time {time} not increasing within series '{}' (previous {last})",
                    p.id
                )));
            }
        }
        p.times.push(time);
        p.values.push(value);
        p.covariates.push(covariate);
    }
    if let Some(p) = current.take() {
        done.push(p);
    }
    if done.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    let series = done
        .into_iter()
        .map(|p| Series::new(p.id, p.times, p.values, Some(p.covariates)))
        .collect::<seglasso::Result<Vec<_>>>()
        .map_err(CliError::from)?;
    SeriesSet::new(series).map_err(CliError::from)
}

/// Writes a SeriesSet in the dataset format (with a covariate column iff any
/// series has covariates distinct from its times).
pub fn write_dataset(set: &SeriesSet<f64>, path: &Path) -> Result<(), CliError> {
    let has_cov = set.series().iter().any(|s| s.covariates != s.times);
    let mut out = String::new();
    out.push_str(if has_cov { "series_id,time,value,covariate\n" } else { "series_id,time,value\n" });
    for s in set.series() {
        for i in 0..s.times.len() {
            if has_cov {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s.id, s.times[i], s.values[i], s.covariates[i]
                ));
            } else {
                out.push_str(&format!("{},{},{}\n", s.id, s.times[i], s.values[i]));
            }
        }
    }
    crate::document::atomic_write(path, out.as_bytes())
}
