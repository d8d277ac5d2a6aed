//! Precision, erroneous-translation counts and threshold sweeps over
//! labeled detector output.
//!
//! Labels are supplied as JSON keyed by issue id:
//!
//! ```json
//! {
//!   "labels": {
//!     "3f1c0a9e5b2d7c44": {
//!       "is_error": true,
//!       "categories": ["under_translation"],
//!       "erroneous_side": "container"
//!     },
//!     "a01b93c2d4e5f607": { "is_error": false }
//!   }
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{detect_all, DetectError, SuspiciousIssue, TokenizationMode, TranslatedPair};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("precision is undefined for an empty issue set")]
    EmptyIssueSet,
    #[error("issue {0} has no label")]
    UnlabeledIssue(String),
    #[error("label refers to unknown issue {0}")]
    UnknownIssue(String),
    #[error("label for {id} is inconsistent: {reason}")]
    InvalidLabel { id: String, reason: String },
    #[error("threshold list is empty")]
    NoThresholds,
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("labels file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    UnderTranslation,
    OverTranslation,
    Mistranslation,
    IncorrectModification,
    UnclearLogic,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::UnderTranslation,
        ErrorCategory::OverTranslation,
        ErrorCategory::Mistranslation,
        ErrorCategory::IncorrectModification,
        ErrorCategory::UnclearLogic,
    ];
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCategory::UnderTranslation => "under_translation",
            ErrorCategory::OverTranslation => "over_translation",
            ErrorCategory::Mistranslation => "mistranslation",
            ErrorCategory::IncorrectModification => "incorrect_modification",
            ErrorCategory::UnclearLogic => "unclear_logic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErroneousSide {
    Rti,
    Container,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueLabel {
    pub is_error: bool,
    #[serde(default)]
    pub categories: BTreeSet<ErrorCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erroneous_side: Option<ErroneousSide>,
}

impl IssueLabel {
    pub fn correct() -> Self {
        IssueLabel {
            is_error: false,
            categories: BTreeSet::new(),
            erroneous_side: None,
        }
    }

    pub fn error(side: ErroneousSide, categories: impl IntoIterator<Item = ErrorCategory>) -> Self {
        IssueLabel {
            is_error: true,
            categories: categories.into_iter().collect(),
            erroneous_side: Some(side),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalLabels {
    pub labels: BTreeMap<String, IssueLabel>,
}

impl EvalLabels {
    pub fn insert(&mut self, issue_id: impl Into<String>, label: IssueLabel) {
        self.labels.insert(issue_id.into(), label);
    }

    pub fn get(&self, issue_id: &str) -> Option<&IssueLabel> {
        self.labels.get(issue_id)
    }

    /// Categories are present exactly on error labels, and error labels
    /// name the wrong side.
    pub fn validate(&self) -> Result<(), EvalError> {
        for (id, label) in &self.labels {
            let bad = |reason: &str| {
                Err(EvalError::InvalidLabel {
                    id: id.clone(),
                    reason: reason.into(),
                })
            };
            if label.is_error == label.categories.is_empty() {
                return bad("categories must be non-empty exactly when is_error is true");
            }
            if label.is_error && label.erroneous_side.is_none() {
                return bad("erroneous_side is required when is_error is true");
            }
            if !label.is_error && label.erroneous_side.is_some() {
                return bad("erroneous_side is only allowed when is_error is true");
            }
        }
        Ok(())
    }

    /// Every labeled id must appear in `issues`.
    pub fn validate_against(&self, issues: &[SuspiciousIssue]) -> Result<(), EvalError> {
        self.validate()?;
        let known: BTreeSet<&str> = issues.iter().map(|i| i.issue_id.as_str()).collect();
        match self.labels.keys().find(|id| !known.contains(id.as_str())) {
            Some(id) => Err(EvalError::UnknownIssue(id.clone())),
            None => Ok(()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let labels: EvalLabels = serde_json::from_str(text).map_err(|e| EvalError::File {
            path: "<memory>".into(),
            message: e.to_string(),
        })?;
        labels.validate()?;
        Ok(labels)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            EvalError::File { message, .. } => EvalError::File {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionResult {
    pub true_count: usize,
    pub total_count: usize,
    pub precision: f64,
}

fn label_of<'a>(labels: &'a EvalLabels, issue: &SuspiciousIssue) -> Result<&'a IssueLabel, EvalError> {
    labels
        .get(&issue.issue_id)
        .ok_or_else(|| EvalError::UnlabeledIssue(issue.issue_id.clone()))
}

/// Fraction of issues labeled as containing a translation error.
pub fn precision(labels: &EvalLabels, issues: &[SuspiciousIssue]) -> Result<PrecisionResult, EvalError> {
    if issues.is_empty() {
        return Err(EvalError::EmptyIssueSet);
    }
    let mut true_count = 0;
    for issue in issues {
        if label_of(labels, issue)?.is_error {
            true_count += 1;
        }
    }
    Ok(PrecisionResult {
        true_count,
        total_count: issues.len(),
        precision: true_count as f64 / issues.len() as f64,
    })
}

/// One distinct erroneous translation: its source and target text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ErroneousTranslation {
    pub source: String,
    pub target: String,
}

/// Distinct `(source, target)` translations on the labeled erroneous sides.
/// A translation shared by several erroneous issues is listed once.
pub fn unique_erroneous_translations(
    labels: &EvalLabels,
    issues: &[SuspiciousIssue],
) -> Result<Vec<ErroneousTranslation>, EvalError> {
    let mut found = BTreeSet::new();
    for issue in issues {
        let label = label_of(labels, issue)?;
        if !label.is_error {
            continue;
        }
        let side = label.erroneous_side.ok_or_else(|| EvalError::InvalidLabel {
            id: issue.issue_id.clone(),
            reason: "erroneous_side is required when is_error is true".into(),
        })?;
        let mut add = |t: &crate::gateway::Translation| {
            found.insert(ErroneousTranslation {
                source: t.request.text.clone(),
                target: t.target_text.clone(),
            });
        };
        if matches!(side, ErroneousSide::Rti | ErroneousSide::Both) {
            add(&issue.rti_translation);
        }
        if matches!(side, ErroneousSide::Container | ErroneousSide::Both) {
            add(&issue.container_translation);
        }
    }
    Ok(found.into_iter().collect())
}

/// Number of labels per error category; every category is present.
pub fn category_tally(labels: &EvalLabels) -> BTreeMap<ErrorCategory, usize> {
    let mut tally: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for label in labels.labels.values().filter(|l| l.is_error) {
        for c in &label.categories {
            *tally.entry(*c).or_insert(0) += 1;
        }
    }
    tally
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: usize,
    pub suspicious_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub erroneous_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub erroneous_translations: Option<usize>,
}

/// Re-runs detection at each threshold. Label-derived columns are filled
/// only when `labels` is given; precision stays empty when nothing is
/// reported at that threshold.
pub fn threshold_sweep(
    pairs: &[TranslatedPair],
    thresholds: &[usize],
    mode: TokenizationMode,
    labels: Option<&EvalLabels>,
) -> Result<Vec<SweepRow>, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    let mut rows = Vec::with_capacity(thresholds.len());
    for &d in thresholds {
        let issues = detect_all(pairs, d, mode)?;
        let mut row = SweepRow {
            threshold: d,
            suspicious_count: issues.len(),
            erroneous_count: None,
            precision: None,
            erroneous_translations: None,
        };
        if let Some(labels) = labels {
            if issues.is_empty() {
                row.erroneous_count = Some(0);
                row.erroneous_translations = Some(0);
            } else {
                let p = precision(labels, &issues)?;
                row.erroneous_count = Some(p.true_count);
                row.precision = Some(p.precision);
                row.erroneous_translations = Some(unique_erroneous_translations(labels, &issues)?.len());
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "threshold",
        "suspicious_count",
        "erroneous_count",
        "precision",
        "erroneous_translations",
    ])
    .expect("in-memory write");
    let opt = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.threshold.to_string(),
            r.suspicious_count.to_string(),
            opt(r.erroneous_count),
            r.precision.map(|p| format!("{p:.4}")).unwrap_or_default(),
            opt(r.erroneous_translations),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
}
