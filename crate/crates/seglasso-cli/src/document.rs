//! Machine-readable result documents. One JSON document per `fit`/`select`
//! invocation, self-contained: it embeds the resolved configuration so the
//! run can be replayed from the document alone. The schema ships at
//! `schema/result.schema.json`.

use std::io::Write as _;
use std::path::Path;

use seglasso::dictionary::DictionaryMatrix;
use seglasso::fit::ModelFit;
use seglasso::selection::SelectionResult;
use seglasso::series::SeriesSet;
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::CliError;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::input(format!("{}: {e}", parent.display())))?;
        }
    }
    let tmp = path.with_extension("part");
    let io = |e: std::io::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut file = std::fs::File::create(&tmp).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

fn series_block(set: &SeriesSet<f64>, fit: &ModelFit<f64>) -> Vec<Value> {
    set.series()
        .iter()
        .zip(fit.segmentation.per_series())
        .map(|(series, seg)| {
            let breakpoints: Vec<Value> = seg
                .ends
                .iter()
                .map(|&end| {
                    json!({
                        "index": end,
                        "time": series.times[end - 1],
                    })
                })
                .collect();
            json!({
                "id": series.id,
                "breakpoints": breakpoints,
                "segment_means": seg.means,
            })
        })
        .collect()
}

fn functional_block(dict: &DictionaryMatrix<f64>, fit: &ModelFit<f64>) -> Vec<Value> {
    fit.functional
        .active_set
        .iter()
        .map(|&id| {
            json!({
                "id": id,
                "label": dict.labels()[id - 1],
                "coefficient": fit.functional.lambda[id - 1],
            })
        })
        .collect()
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// mBIC values per swept K; +∞ (perfect fit) serializes as null with a
/// degenerate marker.
fn sweep_block(selection: &SelectionResult<f64>) -> Vec<Value> {
    selection
        .sweep
        .iter()
        .map(|entry| {
            json!({
                "k": entry.k,
                "mbic": finite_or_null(entry.mbic),
                "degenerate": !entry.mbic.is_finite(),
                "converged": entry.fit.converged,
            })
        })
        .collect()
}

pub struct DocumentInputs<'a> {
    pub command: &'a str,
    pub input_path: &'a Path,
    pub config: &'a FileConfig,
    pub set: &'a SeriesSet<f64>,
    pub dict: Option<&'a DictionaryMatrix<f64>>,
    pub fit: &'a ModelFit<f64>,
    pub selection: Option<&'a SelectionResult<f64>>,
    pub chosen_k: usize,
}

pub fn build_document(inputs: &DocumentInputs) -> Result<Value, CliError> {
    let config_value = serde_json::to_value(inputs.config)
        .map_err(|e| CliError::input(format!("config serialization: {e}")))?;
    let created_unix_ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let mut doc = json!({
        "tool": { "name": "seglasso", "version": env!("CARGO_PKG_VERSION") },
        "command": inputs.command,
        "created_unix_ms": created_unix_ms,
        "input": {
            "path": inputs.input_path.display().to_string(),
            "num_series": inputs.set.num_series(),
            "total_len": inputs.set.total_len(),
        },
        "config": config_value,
        "chosen_k": inputs.chosen_k,
        "sigma2": inputs.fit.sigma2,
        "mbic": inputs.fit.mbic.map(finite_or_null).unwrap_or(Value::Null),
        "convergence": {
            "converged": inputs.fit.converged,
            "iterations": inputs.fit.trace.len(),
            "final_max_delta": finite_or_null(
                inputs.fit.trace.last().map(|r| r.max_delta).unwrap_or(f64::INFINITY),
            ),
        },
        "series": series_block(inputs.set, inputs.fit),
    });
    let obj = doc.as_object_mut().unwrap();
    if let Some(dict) = inputs.dict {
        obj.insert(
            "dictionary".into(),
            json!({
                "num_columns": dict.num_columns(),
                "active_functions": functional_block(dict, inputs.fit),
            }),
        );
    }
    if let Some(selection) = inputs.selection {
        obj.insert("mbic_sweep".into(), Value::Array(sweep_block(selection)));
    }
    Ok(doc)
}

pub fn write_document(doc: &Value, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::input(format!("document serialization: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Tidy per-grid-point export of the fitted bias on the first series,
/// for the f̂-over-time figure.
pub fn write_bias_export(
    set: &SeriesSet<f64>,
    fit: &ModelFit<f64>,
    path: &Path,
) -> Result<(), CliError> {
    let first = &set.series()[0];
    let n = first.times.len();
    let mut out = String::from("time,fitted_bias\n");
    for (t, b) in first.times.iter().zip(fit.bias_on_first_series(n)) {
        out.push_str(&format!("{t},{b}\n"));
    }
    atomic_write(path, out.as_bytes())
}
