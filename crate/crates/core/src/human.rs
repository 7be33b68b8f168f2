//! Model consistency against expert-annotator agreement levels.
//!
//! For every document with a human record, the model's majority-class strength is
//! compared with the share of annotators endorsing the majority label
//! (50, 66, 75 or 100). Levels are compared as the literal numbers.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::categorical::majority_class_strength;
use crate::error::{AuditError, Result};
use crate::run_matrix::{CategoricalRunMatrix, LabelId, LabelScheme};

pub const HUMAN_LEVELS: [u8; 4] = [50, 66, 75, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAgreementRecord {
    pub doc_id: String,
    pub human_agreement_pct: u8,
    pub human_majority_label: LabelId,
}

impl HumanAgreementRecord {
    pub fn new(doc_id: impl Into<String>, level: u8, label: LabelId) -> Result<Self> {
        if !HUMAN_LEVELS.contains(&level) {
            return Err(AuditError::InvalidHumanRecord(format!("agreement level {level} is not one of {HUMAN_LEVELS:?}")));
        }
        Ok(Self { doc_id: doc_id.into(), human_agreement_pct: level, human_majority_label: label })
    }
}

/// CSV `doc_id,human_agreement_pct,human_majority_label`.
pub fn load_human_records(path: &Path, scheme: &LabelScheme) -> Result<Vec<HumanAgreementRecord>> {
    let file = std::fs::File::open(path).map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers = rdr.headers().map_err(|e| AuditError::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |n: &str| {
        headers.iter().position(|h| h.trim() == n).ok_or_else(|| AuditError::Parse {
            line: 1,
            message: format!("human file header must contain {n:?}"),
        })
    };
    let (di, ai, li) = (col("doc_id")?, col("human_agreement_pct")?, col("human_majority_label")?);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AuditError::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(doc), Some(level), Some(label)) = (rec.get(di), rec.get(ai), rec.get(li)) else {
            return Err(AuditError::Parse { line, message: "malformed row".into() });
        };
        let level: u8 = level.trim().parse().map_err(|_| {
            AuditError::InvalidHumanRecord(format!("line {line}: agreement level {level:?} is not one of {HUMAN_LEVELS:?}"))
        })?;
        let label_id = scheme.id(label).ok_or(AuditError::SchemaViolation { line, label: label.to_string() })?;
        if !seen.insert(doc.to_string()) {
            return Err(AuditError::DuplicateRecord { line, doc_id: doc.to_string(), run_id: String::new() });
        }
        out.push(
            HumanAgreementRecord::new(doc, level, label_id)
                .map_err(|e| AuditError::InvalidHumanRecord(format!("line {line}: {e}")))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Model,
    Human,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentComparison {
    pub doc_id: String,
    pub human_agreement_pct: u8,
    pub model_strength_pct: f64,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShare {
    pub level: u8,
    pub n_docs: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAgreement {
    pub level: u8,
    pub n_docs: usize,
    /// `None` when no document sits at this level.
    pub mean_model_strength_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanComparisonReport {
    pub n_docs: usize,
    pub model_wins_pct: f64,
    pub human_wins_pct: f64,
    pub ties_pct: f64,
    pub human_level_distribution: Vec<LevelShare>,
    pub per_level_model_agreement: Vec<LevelAgreement>,
    pub documents: Vec<DocumentComparison>,
}

pub fn compare_consistency(m: &CategoricalRunMatrix, humans: &[HumanAgreementRecord]) -> Result<HumanComparisonReport> {
    if humans.is_empty() {
        return Err(AuditError::InvalidHumanRecord("no human records".into()));
    }
    let missing: Vec<String> = humans.iter().filter(|h| m.doc_index(&h.doc_id).is_none()).map(|h| h.doc_id.clone()).collect();
    if !missing.is_empty() {
        return Err(AuditError::Join(missing));
    }
    let mut documents = Vec::with_capacity(humans.len());
    for h in humans {
        if !HUMAN_LEVELS.contains(&h.human_agreement_pct) {
            return Err(AuditError::InvalidHumanRecord(format!("level {} for {:?}", h.human_agreement_pct, h.doc_id)));
        }
        let d = m.doc_index(&h.doc_id).expect("joined above");
        if !m.row_is_complete(d) {
            return Err(AuditError::IncompleteMatrix(format!("document {:?} has missing runs", h.doc_id)));
        }
        let strength = majority_class_strength(&m.present_labels(d))?;
        let human = f64::from(h.human_agreement_pct);
        let winner = if strength > human {
            Winner::Model
        } else if strength < human {
            Winner::Human
        } else {
            Winner::Tie
        };
        documents.push(DocumentComparison {
            doc_id: h.doc_id.clone(),
            human_agreement_pct: h.human_agreement_pct,
            model_strength_pct: strength,
            winner,
        });
    }
    let n = documents.len() as f64;
    let share = |w: Winner| documents.iter().filter(|c| c.winner == w).count() as f64 / n * 100.0;
    let at_level = |level: u8| documents.iter().filter(move |c| c.human_agreement_pct == level);
    Ok(HumanComparisonReport {
        n_docs: documents.len(),
        model_wins_pct: share(Winner::Model),
        human_wins_pct: share(Winner::Human),
        ties_pct: share(Winner::Tie),
        human_level_distribution: HUMAN_LEVELS
            .iter()
            .map(|&level| {
                let k = at_level(level).count();
                LevelShare { level, n_docs: k, pct: k as f64 / n * 100.0 }
            })
            .collect(),
        per_level_model_agreement: HUMAN_LEVELS
            .iter()
            .map(|&level| {
                let s: Vec<f64> = at_level(level).map(|c| c.model_strength_pct).collect();
                LevelAgreement {
                    level,
                    n_docs: s.len(),
                    mean_model_strength_pct: (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64),
                }
            })
            .collect(),
        documents,
    })
}
