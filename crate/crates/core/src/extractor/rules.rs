//! Label-anchored parser for Brazilian RG text.
//!
//! Every line is classified against the known labels with
//! [`fuzzy_label_match`]. A field's value is the remainder after `:` on the
//! label line, or else the next line that is not itself a label. Lines shaped
//! `KEY: value` whose key matches no known label land in `extra_fields`.
//!
//! Before normalization, values are repaired for OCR confusions according to
//! their character class: letters in numeric fields become digits and digits
//! in name fields become letters.

use std::collections::BTreeMap;

use super::fuzzy::fuzzy_label_match;
use crate::model::{
    normalize_date, normalize_document_number, normalize_name, validate_cpf, validate_record,
    IdRecord, ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelField {
    FullName,
    Filiation,
    BirthDate,
    Cpf,
    DocumentNumber,
    IssueDate,
}

impl LabelField {
    pub fn record_field(self) -> &'static str {
        match self {
            LabelField::FullName => "full_name",
            LabelField::Filiation => "filiation",
            LabelField::BirthDate => "birth_date",
            LabelField::Cpf => "cpf",
            LabelField::DocumentNumber => "document_number",
            LabelField::IssueDate => "issue_date",
        }
    }
}

/// Printed labels, in the order used to break equal-score ties.
pub const KNOWN_LABELS: [(LabelField, &str); 6] = [
    (LabelField::FullName, "NOME"),
    (LabelField::Filiation, "FILIAÇÃO"),
    (LabelField::BirthDate, "DATA DE NASCIMENTO"),
    (LabelField::Cpf, "CPF"),
    (LabelField::DocumentNumber, "REGISTRO GERAL"),
    (LabelField::IssueDate, "DATA DE EXPEDIÇÃO"),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RulesError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("required field {0} not found")]
    RequiredFieldMissing(&'static str),
    #[error("field {field} could not be normalized: {reason}")]
    NormalizationFailure { field: &'static str, reason: String },
    #[error("record failed validation:\n{}", .0.summary())]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone)]
enum LineKind {
    Label {
        field: LabelField,
        similarity: f64,
        inline: Option<String>,
    },
    Extra {
        key: String,
        value: String,
    },
    Text,
}

impl LineKind {
    fn is_value_candidate(&self) -> bool {
        matches!(self, LineKind::Text)
    }
}

fn split_key(line: &str) -> (&str, Option<&str>) {
    match line.split_once(':') {
        Some((k, v)) => (k.trim(), Some(v.trim()).filter(|v| !v.is_empty())),
        None => (line.trim(), None),
    }
}

fn classify(line: &str) -> LineKind {
    let (key, inline) = split_key(line);
    let best = KNOWN_LABELS
        .iter()
        .map(|(field, label)| (*field, fuzzy_label_match(key, label)))
        .filter(|(_, m)| m.is_match)
        .fold(None::<(LabelField, f64)>, |best, (field, m)| match best {
            Some((_, s)) if s >= m.similarity => best,
            _ => Some((field, m.similarity)),
        });
    match (best, line.contains(':')) {
        (Some((field, similarity)), _) => LineKind::Label {
            field,
            similarity,
            inline: inline.map(str::to_string),
        },
        (None, true) if !key.is_empty() && inline.is_some() => LineKind::Extra {
            key: key.to_string(),
            value: inline.unwrap_or_default().to_string(),
        },
        _ => LineKind::Text,
    }
}

fn norm_err(field: &'static str, e: impl std::fmt::Display) -> RulesError {
    RulesError::NormalizationFailure {
        field,
        reason: e.to_string(),
    }
}

fn repair_digits(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'O' | 'o' => '0',
            'I' | 'l' => '1',
            'S' => '5',
            'B' => '8',
            'Z' => '2',
            'G' => '6',
            other => other,
        })
        .collect()
}

fn repair_letters(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '0' => 'O',
            '1' => 'I',
            '5' => 'S',
            '8' => 'B',
            '2' => 'Z',
            '6' => 'G',
            other => other,
        })
        .collect()
}

/// Parses raw OCR text into a validated record. `source_id` is left empty and
/// `extraction_confidence` at 1.0; callers that know the provenance set them.
pub fn rules_extract(raw: &str) -> Result<IdRecord, RulesError> {
    if raw.trim().is_empty() {
        return Err(RulesError::EmptyInput);
    }
    let lines: Vec<&str> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let kinds: Vec<LineKind> = lines.iter().map(|l| classify(l)).collect();

    // best line per field: highest similarity, earliest on ties
    let mut anchor: BTreeMap<LabelField, (usize, f64)> = BTreeMap::new();
    for (i, kind) in kinds.iter().enumerate() {
        if let LineKind::Label {
            field, similarity, ..
        } = kind
        {
            match anchor.get(field) {
                Some((_, s)) if *s >= *similarity => {}
                _ => {
                    anchor.insert(*field, (i, *similarity));
                }
            }
        }
    }

    let values_after = |i: usize, max: usize| -> Vec<String> {
        let mut out = Vec::new();
        if let LineKind::Label {
            inline: Some(v), ..
        } = &kinds[i]
        {
            out.push(v.clone());
        }
        let mut j = i + 1;
        while out.len() < max && j < lines.len() && kinds[j].is_value_candidate() {
            out.push(lines[j].to_string());
            j += 1;
        }
        out
    };
    let single = |field: LabelField| -> Option<String> {
        anchor
            .get(&field)
            .and_then(|&(i, _)| values_after(i, 1).into_iter().next())
    };

    let full_name =
        single(LabelField::FullName).ok_or(RulesError::RequiredFieldMissing("full_name"))?;
    let full_name =
        normalize_name(&repair_letters(&full_name)).map_err(|e| norm_err("full_name", e))?;

    let birth =
        single(LabelField::BirthDate).ok_or(RulesError::RequiredFieldMissing("birth_date"))?;
    let birth_date =
        normalize_date(&repair_digits(&birth)).map_err(|e| norm_err("birth_date", e))?;

    let doc = single(LabelField::DocumentNumber)
        .ok_or(RulesError::RequiredFieldMissing("document_number"))?;
    // the trailing check character may legitimately be X
    let document_number = normalize_document_number(&repair_digits(&doc))
        .map_err(|e| norm_err("document_number", e))?;

    let cpf = single(LabelField::Cpf)
        .map(|v| validate_cpf(&repair_digits(&v)).map_err(|e| norm_err("cpf", e)))
        .transpose()?;

    let issue_date = single(LabelField::IssueDate)
        .map(|v| normalize_date(&repair_digits(&v)).map_err(|e| norm_err("issue_date", e)))
        .transpose()?;

    let filiation = match anchor.get(&LabelField::Filiation) {
        Some(&(i, _)) => values_after(i, 2)
            .iter()
            .map(|v| normalize_name(&repair_letters(v)).map_err(|e| norm_err("filiation", e)))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };

    let extra_fields = kinds
        .iter()
        .filter_map(|k| match k {
            LineKind::Extra { key, value } => Some((key.to_uppercase(), value.clone())),
            _ => None,
        })
        .collect();

    let record = IdRecord {
        full_name,
        birth_date,
        document_number,
        cpf,
        filiation,
        issue_date,
        extra_fields,
        source_id: String::new(),
        extraction_confidence: 1.0,
    };
    let report = validate_record(&record);
    if !report.valid {
        return Err(RulesError::Invalid(report));
    }
    Ok(record)
}
