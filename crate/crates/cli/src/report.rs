//! Report envelope and file emission. JSON is written first; markdown tables are
//! rendered from the written JSON so both carry the same values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "audit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct ReportEnvelope<'a, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    /// Resolved settings, including the seed of stochastic tasks.
    pub config: Value,
    /// Seconds since the epoch from `SOURCE_DATE_EPOCH`; omitted when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    pub dropped_doc_ids: Vec<String>,
    pub payload: P,
}

impl<'a, P: Serialize> ReportEnvelope<'a, P> {
    pub fn new(command: &'a str, config: Value, dropped_doc_ids: Vec<String>, payload: P) -> Self {
        let generated_at_unix = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok());
        Self { tool: TOOL, version: VERSION, command, config, generated_at_unix, dropped_doc_ids, payload }
    }
}

/// Collects the paths written by one command.
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::Config(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::output(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Pretty JSON; returns the document as a `Value` for rendering.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<Value> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())?;
        serde_json::from_str(&text).map_err(|e| CliError::Internal(e.to_string()))
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(|e| CliError::Internal(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn text(&mut self, name: &str, text: &str) -> CliResult<()> {
        self.write_bytes(name, text.as_bytes())
    }
}

/// Number at a JSON pointer, if present and numeric.
pub fn num(v: &Value, pointer: &str) -> Option<f64> {
    v.pointer(pointer).and_then(Value::as_f64)
}

pub fn fixed(x: Option<f64>, decimals: usize) -> String {
    match x {
        Some(x) => format!("{x:.decimals$}"),
        None => "n/a".into(),
    }
}

/// Markdown table row builder for two-column metric tables.
pub struct MetricTable {
    lines: Vec<String>,
}

impl MetricTable {
    pub fn new(title: &str, header: &str) -> Self {
        Self { lines: vec![format!("# {title}"), String::new(), format!("| {header} | Value |"), "|---|---:|".into()] }
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        self.lines.push(format!("| **{name}** | |"));
        self
    }

    pub fn row(&mut self, name: &str, value: String) -> &mut Self {
        self.lines.push(format!("| {name} | {value} |"));
        self
    }

    pub fn note(&mut self, text: &str) -> &mut Self {
        self.lines.push(String::new());
        self.lines.push(text.to_string());
        self
    }

    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}
