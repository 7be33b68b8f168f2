//! Multi-run output containers and their long-format loaders.
//!
//! Every input is a set of `(doc_id, run_id, value)` records. Document and run
//! identifiers are ordered by first appearance; a `(doc, run)` cell with no record
//! is missing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::scalar::Scalar;

/// Index of a label within its [`LabelScheme`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub usize);

/// Ordered, closed set of labels with optional ordinal ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelScheme {
    labels: Vec<String>,
    index: HashMap<String, LabelId>,
    /// `ordinal_codes[i]` is the rank of label `i`.
    ordinal_codes: Option<Vec<usize>>,
    /// Tie-break preference for nominal schemes, most preferred first.
    tie_break_order: Option<Vec<LabelId>>,
}

/// On-disk schema file: `{"labels": [...], "ordinal_codes": {...}?, "tie_break_order": [...]?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeFile {
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal_codes: Option<HashMap<String, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break_order: Option<Vec<String>>,
}

impl LabelScheme {
    pub fn nominal<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::build(labels.iter().map(|s| s.as_ref().to_string()).collect(), None, None)
    }

    /// Labels listed in rank order: the first gets code 0.
    pub fn ordinal<S: AsRef<str>>(labels_in_rank_order: &[S]) -> Result<Self> {
        let labels: Vec<String> = labels_in_rank_order.iter().map(|s| s.as_ref().to_string()).collect();
        let codes = (0..labels.len()).collect();
        Self::build(labels, Some(codes), None)
    }

    pub fn with_tie_break_order<S: AsRef<str>>(self, order: &[S]) -> Result<Self> {
        let order = order.iter().map(|s| s.as_ref().to_string()).collect();
        Self::build(self.labels, self.ordinal_codes, Some(order))
    }

    pub fn from_file_spec(spec: SchemeFile) -> Result<Self> {
        let codes = match spec.ordinal_codes {
            None => None,
            Some(map) => {
                if map.len() != spec.labels.len() || spec.labels.iter().any(|l| !map.contains_key(l)) {
                    return Err(AuditError::InvalidScheme(
                        "ordinal_codes must assign a code to every label and nothing else".into(),
                    ));
                }
                Some(spec.labels.iter().map(|l| map[l]).collect())
            }
        };
        Self::build(spec.labels, codes, spec.tie_break_order)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
        let spec: SchemeFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| AuditError::InvalidScheme(format!("{}: {e}", path.display())))?;
        Self::from_file_spec(spec)
    }

    pub fn to_file_spec(&self) -> SchemeFile {
        SchemeFile {
            labels: self.labels.clone(),
            ordinal_codes: self
                .ordinal_codes
                .as_ref()
                .map(|c| self.labels.iter().cloned().zip(c.iter().copied()).collect()),
            tie_break_order: self
                .tie_break_order
                .as_ref()
                .map(|o| o.iter().map(|l| self.name(*l).to_string()).collect()),
        }
    }

    fn build(labels: Vec<String>, codes: Option<Vec<usize>>, tie_order: Option<Vec<String>>) -> Result<Self> {
        if labels.is_empty() {
            return Err(AuditError::InvalidScheme("at least one label is required".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(AuditError::InvalidScheme("labels must be non-empty".into()));
            }
            if index.insert(l.clone(), LabelId(i)).is_some() {
                return Err(AuditError::InvalidScheme(format!("duplicate label {l:?}")));
            }
        }
        if let Some(codes) = &codes {
            let mut seen = vec![false; labels.len()];
            for &c in codes {
                if c >= labels.len() || std::mem::replace(&mut seen[c], true) {
                    return Err(AuditError::InvalidScheme(format!(
                        "ordinal codes must be a bijection onto 0..{}",
                        labels.len() - 1
                    )));
                }
            }
        }
        let tie_break_order = match tie_order {
            None => None,
            Some(order) => {
                let mut ids = Vec::with_capacity(order.len());
                for name in &order {
                    let id = *index
                        .get(name)
                        .ok_or_else(|| AuditError::InvalidScheme(format!("tie_break_order names unknown label {name:?}")))?;
                    if ids.contains(&id) {
                        return Err(AuditError::InvalidScheme(format!("tie_break_order repeats {name:?}")));
                    }
                    ids.push(id);
                }
                Some(ids)
            }
        };
        Ok(Self { labels, index, ordinal_codes: codes, tie_break_order })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.labels.len()).map(LabelId)
    }

    pub fn id(&self, label: &str) -> Option<LabelId> {
        self.index.get(label).copied()
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.labels[id.0]
    }

    pub fn is_ordinal(&self) -> bool {
        self.ordinal_codes.is_some()
    }

    pub fn ordinal_code(&self, id: LabelId) -> Option<usize> {
        self.ordinal_codes.as_ref().map(|c| c[id.0])
    }

    pub fn label_for_code(&self, code: usize) -> Option<LabelId> {
        self.ordinal_codes.as_ref()?.iter().position(|&c| c == code).map(LabelId)
    }

    pub fn tie_break_order(&self) -> Option<&[LabelId]> {
        self.tie_break_order.as_deref()
    }
}

/// Unordered pair of run indices with `run_a < run_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunPair {
    pub run_a: usize,
    pub run_b: usize,
}

/// All `n(n-1)/2` run pairs in lexicographic order.
pub fn enumerate_run_pairs(n_runs: usize) -> Result<Vec<RunPair>> {
    if n_runs < 2 {
        return Err(AuditError::InsufficientRuns(n_runs));
    }
    let mut pairs = Vec::with_capacity(n_runs * (n_runs - 1) / 2);
    for a in 0..n_runs {
        for b in a + 1..n_runs {
            pairs.push(RunPair { run_a: a, run_b: b });
        }
    }
    Ok(pairs)
}

/// Documents × runs grid of labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalRunMatrix {
    doc_ids: Vec<String>,
    run_ids: Vec<String>,
    cells: Vec<Option<LabelId>>,
    scheme: LabelScheme,
}

/// Documents × runs grid of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRunMatrix<T> {
    doc_ids: Vec<String>,
    run_ids: Vec<String>,
    cells: Vec<Option<T>>,
    unit: String,
}

/// Documents × runs grid of embedding vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRunSet<T> {
    doc_ids: Vec<String>,
    run_ids: Vec<String>,
    vectors: Vec<Option<Vec<T>>>,
    dim: usize,
}

fn check_ids(kind: &str, ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(AuditError::Shape(format!("duplicate {kind} id {id:?}")));
        }
    }
    Ok(())
}

fn check_grid<V>(doc_ids: &[String], run_ids: &[String], cells: &[V]) -> Result<()> {
    check_ids("document", doc_ids)?;
    check_ids("run", run_ids)?;
    if cells.len() != doc_ids.len() * run_ids.len() {
        return Err(AuditError::Shape(format!(
            "{} cells for {} documents x {} runs",
            cells.len(),
            doc_ids.len(),
            run_ids.len()
        )));
    }
    Ok(())
}

fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{}", i + 1)).collect()
}

macro_rules! grid_accessors {
    ($cell:ty) => {
        pub fn doc_ids(&self) -> &[String] {
            &self.doc_ids
        }

        pub fn run_ids(&self) -> &[String] {
            &self.run_ids
        }

        pub fn n_docs(&self) -> usize {
            self.doc_ids.len()
        }

        pub fn n_runs(&self) -> usize {
            self.run_ids.len()
        }

        pub fn n_cells(&self) -> usize {
            self.doc_ids.len() * self.run_ids.len()
        }

        /// One document's cells across all runs.
        pub fn row(&self, doc: usize) -> &[Option<$cell>] {
            let n = self.run_ids.len();
            &self.cells_ref()[doc * n..(doc + 1) * n]
        }

        pub fn missing_count(&self) -> usize {
            self.cells_ref().iter().filter(|c| c.is_none()).count()
        }

        pub fn present_count(&self) -> usize {
            self.n_cells() - self.missing_count()
        }

        pub fn is_complete(&self) -> bool {
            self.missing_count() == 0
        }

        pub fn row_is_complete(&self, doc: usize) -> bool {
            self.row(doc).iter().all(Option::is_some)
        }

        pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
            self.doc_ids.iter().position(|d| d == doc_id)
        }
    };
}

impl CategoricalRunMatrix {
    pub fn new(doc_ids: Vec<String>, run_ids: Vec<String>, cells: Vec<Option<LabelId>>, scheme: LabelScheme) -> Result<Self> {
        check_grid(&doc_ids, &run_ids, &cells)?;
        if let Some(bad) = cells.iter().flatten().find(|l| l.0 >= scheme.len()) {
            return Err(AuditError::Shape(format!("label index {} outside scheme of {}", bad.0, scheme.len())));
        }
        Ok(Self { doc_ids, run_ids, cells, scheme })
    }

    /// Builds a matrix from per-document label rows (`None` = missing); ids are `d1.., r1..`.
    pub fn from_rows<S: AsRef<str>>(scheme: LabelScheme, rows: &[Vec<Option<S>>]) -> Result<Self> {
        let n_runs = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(rows.len() * n_runs);
        for (d, row) in rows.iter().enumerate() {
            if row.len() != n_runs {
                return Err(AuditError::Shape(format!("row {d} has {} runs, expected {n_runs}", row.len())));
            }
            for cell in row {
                cells.push(match cell {
                    None => None,
                    Some(l) => Some(scheme.id(l.as_ref()).ok_or_else(|| AuditError::SchemaViolation {
                        line: d as u64 + 1,
                        label: l.as_ref().to_string(),
                    })?),
                });
            }
        }
        Self::new(default_ids("d", rows.len()), default_ids("r", n_runs), cells, scheme)
    }

    /// Complete matrix from label rows.
    pub fn from_complete_rows<S: AsRef<str>>(scheme: LabelScheme, rows: &[Vec<S>]) -> Result<Self> {
        let rows: Vec<Vec<Option<&str>>> = rows.iter().map(|r| r.iter().map(|s| Some(s.as_ref())).collect()).collect();
        Self::from_rows(scheme, &rows)
    }

    fn cells_ref(&self) -> &[Option<LabelId>] {
        &self.cells
    }

    grid_accessors!(LabelId);

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn get(&self, doc: usize, run: usize) -> Option<LabelId> {
        self.cells[doc * self.run_ids.len() + run]
    }

    /// Non-missing labels of a document in run order.
    pub fn present_labels(&self, doc: usize) -> Vec<LabelId> {
        self.row(doc).iter().flatten().copied().collect()
    }

    /// Keeps the listed documents, in the given order.
    pub fn select_docs(&self, docs: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(docs.len() * self.n_runs());
        let mut ids = Vec::with_capacity(docs.len());
        for &d in docs {
            cells.extend_from_slice(self.row(d));
            ids.push(self.doc_ids[d].clone());
        }
        Self { doc_ids: ids, run_ids: self.run_ids.clone(), cells, scheme: self.scheme.clone() }
    }

    /// Keeps the listed runs, in the given order.
    pub fn select_runs(&self, runs: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(self.n_docs() * runs.len());
        for d in 0..self.n_docs() {
            cells.extend(runs.iter().map(|&r| self.get(d, r)));
        }
        let run_ids = runs.iter().map(|&r| self.run_ids[r].clone()).collect();
        Self { doc_ids: self.doc_ids.clone(), run_ids, cells, scheme: self.scheme.clone() }
    }

    /// Splits off documents with any missing cell; returns the complete part and the dropped ids.
    pub fn drop_incomplete(&self) -> (Self, Vec<String>) {
        let (keep, drop): (Vec<usize>, Vec<usize>) = (0..self.n_docs()).partition(|&d| self.row_is_complete(d));
        (self.select_docs(&keep), drop.into_iter().map(|d| self.doc_ids[d].clone()).collect())
    }

    /// Long-format CSV with header `doc_id,run_id,label`, or JSONL when the extension is `.jsonl`/`.ndjson`.
    pub fn load(path: &Path, scheme: LabelScheme) -> Result<Self> {
        let records = read_long_records(path, "label")?;
        let mut typed = Vec::with_capacity(records.len());
        for r in records {
            let id = scheme.id(&r.value).ok_or(AuditError::SchemaViolation { line: r.line, label: r.value.clone() })?;
            typed.push(Record { line: r.line, doc_id: r.doc_id, run_id: r.run_id, value: id });
        }
        let (doc_ids, run_ids, cells) = assemble(typed)?;
        Self::new(doc_ids, run_ids, cells, scheme)
    }

    /// Writes present cells as long-format CSV in document-major order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| AuditError::Parse { line: 0, message: e.to_string() };
        w.write_record(["doc_id", "run_id", "label"]).map_err(err)?;
        for d in 0..self.n_docs() {
            for r in 0..self.n_runs() {
                if let Some(l) = self.get(d, r) {
                    w.write_record([&self.doc_ids[d], &self.run_ids[r], self.scheme.name(l)]).map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| AuditError::Parse { line: 0, message: e.to_string() })
    }
}

impl<T: Scalar> ContinuousRunMatrix<T> {
    pub fn new(doc_ids: Vec<String>, run_ids: Vec<String>, cells: Vec<Option<T>>, unit: impl Into<String>) -> Result<Self> {
        check_grid(&doc_ids, &run_ids, &cells)?;
        if cells.iter().flatten().any(|v| !v.is_finite()) {
            return Err(AuditError::Shape("continuous cells must be finite".into()));
        }
        Ok(Self { doc_ids, run_ids, cells, unit: unit.into() })
    }

    /// Complete matrix from per-document rows; ids are `d1.., r1..`.
    pub fn from_rows(rows: &[Vec<T>], unit: impl Into<String>) -> Result<Self> {
        let n_runs = rows.first().map_or(0, Vec::len);
        if let Some(d) = rows.iter().position(|r| r.len() != n_runs) {
            return Err(AuditError::Shape(format!("row {d} has {} runs, expected {n_runs}", rows[d].len())));
        }
        let cells = rows.iter().flatten().map(|&v| Some(v)).collect();
        Self::new(default_ids("d", rows.len()), default_ids("r", n_runs), cells, unit)
    }

    fn cells_ref(&self) -> &[Option<T>] {
        &self.cells
    }

    grid_accessors!(T);

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn get(&self, doc: usize, run: usize) -> Option<T> {
        self.cells[doc * self.run_ids.len() + run]
    }

    pub fn present_values(&self, doc: usize) -> Vec<T> {
        self.row(doc).iter().flatten().copied().collect()
    }

    /// Row of a complete document.
    pub fn complete_row(&self, doc: usize) -> Result<Vec<T>> {
        self.row(doc)
            .iter()
            .map(|c| c.ok_or_else(|| AuditError::IncompleteMatrix(format!("document {:?} has missing runs", self.doc_ids[doc]))))
            .collect()
    }

    pub fn require_complete(&self) -> Result<()> {
        match (0..self.n_docs()).find(|&d| !self.row_is_complete(d)) {
            None => Ok(()),
            Some(d) => Err(AuditError::IncompleteMatrix(format!("document {:?} has missing runs", self.doc_ids[d]))),
        }
    }

    pub fn select_docs(&self, docs: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(docs.len() * self.n_runs());
        for &d in docs {
            cells.extend_from_slice(self.row(d));
        }
        let doc_ids = docs.iter().map(|&d| self.doc_ids[d].clone()).collect();
        Self { doc_ids, run_ids: self.run_ids.clone(), cells, unit: self.unit.clone() }
    }

    /// Applies `f` to every present cell; the result must stay finite.
    pub fn map_values(&self, mut f: impl FnMut(usize, T) -> T) -> Result<Self> {
        let n = self.n_runs();
        let cells = self.cells.iter().enumerate().map(|(i, c)| c.map(|v| f(i / n, v))).collect();
        Self::new(self.doc_ids.clone(), self.run_ids.clone(), cells, self.unit.clone())
    }

    pub fn load(path: &Path, unit: impl Into<String>) -> Result<Self> {
        let records = read_long_records(path, "value")?;
        let mut typed = Vec::with_capacity(records.len());
        for r in records {
            let trimmed = r.value.trim();
            let v: T = trimmed.parse().map_err(|_| AuditError::Parse {
                line: r.line,
                message: format!("value {:?} is not a decimal number", r.value),
            })?;
            if !v.is_finite() {
                return Err(AuditError::NonFinite { line: r.line, value: r.value });
            }
            typed.push(Record { line: r.line, doc_id: r.doc_id, run_id: r.run_id, value: v });
        }
        let (doc_ids, run_ids, cells) = assemble(typed)?;
        Self::new(doc_ids, run_ids, cells, unit)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| AuditError::Parse { line: 0, message: e.to_string() };
        w.write_record(["doc_id", "run_id", "value"]).map_err(err)?;
        for d in 0..self.n_docs() {
            for r in 0..self.n_runs() {
                if let Some(v) = self.get(d, r) {
                    w.write_record([self.doc_ids[d].as_str(), self.run_ids[r].as_str(), &v.to_string()]).map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| AuditError::Parse { line: 0, message: e.to_string() })
    }
}

impl<T: Scalar> EmbeddingRunSet<T> {
    pub fn new(doc_ids: Vec<String>, run_ids: Vec<String>, vectors: Vec<Option<Vec<T>>>) -> Result<Self> {
        check_grid(&doc_ids, &run_ids, &vectors)?;
        let dim = vectors.iter().flatten().map(Vec::len).next().unwrap_or(0);
        for v in vectors.iter().flatten() {
            if v.len() != dim {
                return Err(AuditError::Shape(format!("embedding of dimension {} in a set of dimension {dim}", v.len())));
            }
            if v.iter().all(|x| x.is_zero()) {
                return Err(AuditError::UndefinedSimilarity);
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(AuditError::Shape("embedding components must be finite".into()));
            }
        }
        Ok(Self { doc_ids, run_ids, vectors, dim })
    }

    /// Complete set from `rows[doc][run]` vectors; ids are `d1.., r1..`.
    pub fn from_rows(rows: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let n_runs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_runs) {
            return Err(AuditError::Shape("ragged embedding rows".into()));
        }
        let n_docs = rows.len();
        let vectors = rows.into_iter().flatten().map(Some).collect();
        Self::new(default_ids("d", n_docs), default_ids("r", n_runs), vectors)
    }

    fn cells_ref(&self) -> &[Option<Vec<T>>] {
        &self.vectors
    }

    grid_accessors!(Vec<T>);

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, doc: usize, run: usize) -> Option<&[T]> {
        self.vectors[doc * self.run_ids.len() + run].as_deref()
    }

    /// JSONL records `{"doc_id": .., "run_id": .., "vector": [..]}`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
        #[derive(Deserialize)]
        struct Row {
            doc_id: String,
            run_id: String,
            vector: Vec<f64>,
        }
        let mut typed = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = line.map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| AuditError::Parse { line: line_no, message: e.to_string() })?;
            let vector: Vec<T> = row.vector.iter().map(|&x| T::of(x)).collect();
            if vector.iter().all(|x| x.is_zero()) {
                return Err(AuditError::Parse { line: line_no, message: "all-zero embedding".into() });
            }
            typed.push(Record { line: line_no, doc_id: row.doc_id, run_id: row.run_id, value: vector });
        }
        let (doc_ids, run_ids, cells) = assemble(typed)?;
        Self::new(doc_ids, run_ids, cells)
    }
}

/// A raw long-format record with its 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<V> {
    pub line: u64,
    pub doc_id: String,
    pub run_id: String,
    pub value: V,
}

fn is_jsonl(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "ndjson"))
}

/// Reads `(doc_id, run_id, <value_key>)` records from CSV (header required) or JSONL.
pub fn read_long_records(path: &Path, value_key: &str) -> Result<Vec<Record<String>>> {
    let file = File::open(path).map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
    if is_jsonl(path) {
        read_jsonl(BufReader::new(file), value_key)
    } else {
        read_csv(BufReader::new(file), value_key)
    }
}

fn read_csv<R: std::io::Read>(reader: R, value_key: &str) -> Result<Vec<Record<String>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| AuditError::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| AuditError::Parse {
            line: 1,
            message: format!("header must contain `doc_id,run_id,{value_key}`; missing {name:?}"),
        })
    };
    let (di, ri, vi) = (col("doc_id")?, col("run_id")?, col(value_key)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AuditError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).map(str::to_string);
        match (field(di), field(ri), field(vi)) {
            (Some(doc_id), Some(run_id), Some(value)) if !doc_id.is_empty() && !run_id.is_empty() => {
                out.push(Record { line, doc_id, run_id, value })
            }
            _ => return Err(AuditError::Parse { line, message: "malformed row".into() }),
        }
    }
    Ok(out)
}

fn read_jsonl<R: BufRead>(reader: R, value_key: &str) -> Result<Vec<Record<String>>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| AuditError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| AuditError::Parse { line: line_no, message: e.to_string() })?;
        let text = |key: &str| match v.get(key) {
            Some(serde_json::Value::String(s)) => Some(s.clone()),
            Some(serde_json::Value::Number(n)) => Some(n.to_string()),
            _ => None,
        };
        match (text("doc_id"), text("run_id"), text(value_key)) {
            (Some(doc_id), Some(run_id), Some(value)) => out.push(Record { line: line_no, doc_id, run_id, value }),
            _ => {
                return Err(AuditError::Parse {
                    line: line_no,
                    message: format!("record must carry doc_id, run_id and {value_key}"),
                })
            }
        }
    }
    Ok(out)
}

type Grid<V> = (Vec<String>, Vec<String>, Vec<Option<V>>);

/// Places records on a first-appearance-ordered grid, rejecting duplicate cells.
pub fn assemble<V>(records: Vec<Record<V>>) -> Result<Grid<V>> {
    let mut doc_ids = Vec::new();
    let mut run_ids = Vec::new();
    let mut doc_ix: HashMap<String, usize> = HashMap::new();
    let mut run_ix: HashMap<String, usize> = HashMap::new();
    let mut placed = Vec::with_capacity(records.len());
    for r in records {
        let d = *doc_ix.entry(r.doc_id.clone()).or_insert_with(|| {
            doc_ids.push(r.doc_id.clone());
            doc_ids.len() - 1
        });
        let k = *run_ix.entry(r.run_id.clone()).or_insert_with(|| {
            run_ids.push(r.run_id.clone());
            run_ids.len() - 1
        });
        placed.push((d, k, r));
    }
    let n_runs = run_ids.len();
    let mut cells: Vec<Option<V>> = Vec::with_capacity(doc_ids.len() * n_runs);
    cells.resize_with(doc_ids.len() * n_runs, || None);
    for (d, k, r) in placed {
        let slot = &mut cells[d * n_runs + k];
        if slot.is_some() {
            return Err(AuditError::DuplicateRecord { line: r.line, doc_id: r.doc_id, run_id: r.run_id });
        }
        *slot = Some(r.value);
    }
    Ok((doc_ids, run_ids, cells))
}
