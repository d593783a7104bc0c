//! Result tables and their CSV/JSON renderings.
//!
//! Every result file embeds the experiment manifest that produced it, so a
//! `replay` can re-execute and diff it. CSV files carry the manifest and
//! the descriptive note as leading `#` comment lines; JSON files carry them
//! as fields. Floats render in shortest round-trip form in both formats,
//! and re-running a manifest with the same tool version reproduces the
//! file byte for byte (the timestamp field is excluded from comparisons).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// What produced a result file: enough to re-run it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    /// Experiment kind, e.g. `rappor-worst-case`.
    pub kind: String,
    /// The experiment's parameter block (sorted keys).
    pub args: BTreeMap<String, Value>,
    pub master_seed: u64,
    pub tool_version: String,
    /// Seconds since the Unix epoch at creation; excluded from replay
    /// comparisons.
    pub timestamp: String,
    /// Destination paths, when written to files.
    pub outputs: Vec<String>,
}

/// A rendered experiment result: tabular rows plus scalar summary values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    /// Human-readable description of what the table contains.
    pub note: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Scalar (or structured) outputs that are not per-row.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, Value>,
}

impl ResultTable {
    pub fn new(note: impl Into<String>, columns: &[&str]) -> Self {
        ResultTable {
            note: note.into(),
            columns: columns.iter().map(|c| (*c).to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn insert_summary(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }
}

/// A float as a JSON value; non-finite values render as strings since JSON
/// numbers cannot carry them.
pub fn num(v: f64) -> Value {
    match serde_json::Number::from_f64(v) {
        Some(n) => Value::Number(n),
        None if v.is_nan() => Value::String("nan".to_string()),
        None => Value::String(if v > 0.0 { "inf" } else { "-inf" }.to_string()),
    }
}

pub fn int(v: u64) -> Value {
    Value::Number(v.into())
}

fn render_cell(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// The complete result document in the requested format.
pub fn render(table: &ResultTable, manifest: &ExperimentManifest, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            out.push_str("# manifest: ");
            out.push_str(&serde_json::to_string(manifest).expect("manifest serializes"));
            out.push('\n');
            out.push_str("# note: ");
            out.push_str(&table.note);
            out.push('\n');
            for (key, value) in &table.summary {
                out.push_str(&format!("# {key}: {value}\n"));
            }
            out.push_str(&table.columns.join(","));
            out.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(render_cell).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out
        }
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "manifest": manifest,
                "note": table.note,
                "summary": table.summary,
                "columns": table.columns,
                "rows": table.rows,
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
            text.push('\n');
            text
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Extracts the embedded manifest from a rendered result file.
pub fn parse_manifest(content: &str) -> Result<(ExperimentManifest, OutputFormat), String> {
    if let Some(line) = content.lines().find(|l| l.starts_with("# manifest: ")) {
        let manifest = serde_json::from_str(line.trim_start_matches("# manifest: "))
            .map_err(|e| format!("malformed manifest comment: {e}"))?;
        return Ok((manifest, OutputFormat::Csv));
    }
    let doc: Value =
        serde_json::from_str(content).map_err(|e| format!("not a result file: {e}"))?;
    let manifest = doc
        .get("manifest")
        .ok_or_else(|| "result file has no manifest field".to_string())?;
    let manifest = serde_json::from_value(manifest.clone())
        .map_err(|e| format!("malformed manifest field: {e}"))?;
    Ok((manifest, OutputFormat::Json))
}

/// Rendered content with the volatile manifest fields blanked, for replay
/// comparisons.
pub fn normalized_for_comparison(content: &str) -> String {
    match parse_manifest(content) {
        Ok((mut manifest, OutputFormat::Csv)) => {
            manifest.timestamp = String::new();
            manifest.outputs = Vec::new();
            let replacement = format!(
                "# manifest: {}",
                serde_json::to_string(&manifest).expect("manifest serializes")
            );
            content
                .lines()
                .map(|l| {
                    if l.starts_with("# manifest: ") {
                        replacement.clone()
                    } else {
                        l.to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        Ok((_, OutputFormat::Json)) => {
            let mut doc: Value = serde_json::from_str(content).expect("parsed once already");
            doc["manifest"]["timestamp"] = Value::String(String::new());
            doc["manifest"]["outputs"] = Value::Array(Vec::new());
            serde_json::to_string_pretty(&doc).expect("document serializes")
        }
        Err(_) => content.to_string(),
    }
}
