use serde::Serialize;

use super::normalize::is_document_number;
use super::{validate_cpf, IdRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub field: &'static str,
    pub code: &'static str,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    /// One line per issue, suitable for feeding back into a retry prompt.
    pub fn summary(&self) -> String {
        self.issues
            .iter()
            .map(|i| format!("- {} [{}]: {}", i.field, i.code, i.message))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Lists every invariant the record violates. Never mutates the record.
pub fn validate_record(r: &IdRecord) -> ValidationReport {
    let mut issues = Vec::new();
    let mut error = |field, code, message: String| {
        issues.push(Issue {
            field,
            code,
            severity: Severity::Error,
            message,
        })
    };

    if r.full_name.trim().is_empty() {
        error("full_name", "empty", "full_name empty".into());
    } else {
        if r.full_name.chars().any(char::is_control) {
            error(
                "full_name",
                "control_char",
                "full_name contains control characters".into(),
            );
        }
        if r.full_name != r.full_name.trim() || r.full_name.contains("  ") {
            error(
                "full_name",
                "spacing",
                "full_name is not single-spaced".into(),
            );
        }
    }

    if !is_document_number(&r.document_number) {
        error(
            "document_number",
            "malformed",
            format!(
                "document_number {:?} is not digits with an optional check character",
                r.document_number
            ),
        );
    }

    if let Some(cpf) = &r.cpf {
        match validate_cpf(cpf) {
            Ok(digits) if &digits == cpf => {}
            Ok(_) => error(
                "cpf",
                "not_normalized",
                format!("cpf {cpf:?} is not 11 bare digits"),
            ),
            Err(e) => error("cpf", "invalid", e.to_string()),
        }
    }

    if let Some(issued) = r.issue_date {
        if r.birth_date > issued {
            error(
                "birth_date",
                "after_issue",
                "birth_date after issue_date".into(),
            );
        }
    }

    if r.filiation.len() > 2 {
        error(
            "filiation",
            "too_many",
            format!("{} filiation entries, at most 2 allowed", r.filiation.len()),
        );
    }
    if r.filiation.iter().any(|p| p.trim().is_empty()) {
        error(
            "filiation",
            "empty_entry",
            "filiation contains an empty name".into(),
        );
    }

    if !(0.0..=1.0).contains(&r.extraction_confidence) {
        error(
            "extraction_confidence",
            "out_of_range",
            format!(
                "extraction_confidence {} outside [0,1]",
                r.extraction_confidence
            ),
        );
    } else if r.extraction_confidence < 0.5 {
        issues.push(Issue {
            field: "extraction_confidence",
            code: "low",
            severity: Severity::Warning,
            message: format!("low extraction confidence {:.3}", r.extraction_confidence),
        });
    }

    let valid = !issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { valid, issues }
}
