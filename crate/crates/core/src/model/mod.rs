//! Shared domain types and the deterministic field rules applied to every
//! extracted record.
//!
//! All functions here are pure; they can be called from any number of worker
//! threads without coordination.

mod cpf;
mod hash;
mod normalize;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use cpf::{cpf_check_digits, validate_cpf, CpfError};
pub use hash::{content_hash, content_hash_file, ContentHash, HashError};
pub use normalize::{
    normalize_date, normalize_document_number, normalize_name, DateError, DocumentNumberError,
    NameError,
};
pub use validate::{validate_record, Issue, Severity, ValidationReport};

/// A structured identity-document record.
///
/// The serialized form is a flat JSON object with snake_case keys. Dates are
/// ISO-8601 strings and absent optionals are omitted rather than written as
/// `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdRecord {
    pub full_name: String,
    pub birth_date: NaiveDate,
    /// RG registry number: digits with an optional trailing check character.
    pub document_number: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpf: Option<String>,
    /// Parent names, at most two.
    #[serde(default)]
    pub filiation: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue_date: Option<NaiveDate>,
    /// Labeled fields found on the document that have no dedicated slot.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra_fields: BTreeMap<String, String>,
    #[serde(default)]
    pub source_id: String,
    #[serde(default = "default_confidence")]
    pub extraction_confidence: f64,
}

fn default_confidence() -> f64 {
    1.0
}

impl IdRecord {
    /// Field names in serialized order. Prompt schemas and the JSON validator
    /// are both derived from this list.
    pub const FIELD_NAMES: [&'static str; 9] = [
        "full_name",
        "birth_date",
        "document_number",
        "cpf",
        "filiation",
        "issue_date",
        "extra_fields",
        "source_id",
        "extraction_confidence",
    ];

    pub fn new(
        full_name: impl Into<String>,
        birth_date: NaiveDate,
        document_number: impl Into<String>,
    ) -> Self {
        Self {
            full_name: full_name.into(),
            birth_date,
            document_number: document_number.into(),
            cpf: None,
            filiation: Vec::new(),
            issue_date: None,
            extra_fields: BTreeMap::new(),
            source_id: String::new(),
            extraction_confidence: 1.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("IdRecord serialization is infallible")
    }
}

/// Token naming an OCR backend, e.g. `paddleocr`, `doctr` or `mock`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EngineId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid engine token {0:?}: expected nonempty lowercase [a-z0-9_-]")]
pub struct InvalidEngineId(pub String);

impl EngineId {
    pub const PADDLEOCR: &'static str = "paddleocr";
    pub const DOCTR: &'static str = "doctr";
    pub const MOCK: &'static str = "mock";

    pub fn new(token: impl Into<String>) -> Result<Self, InvalidEngineId> {
        let token = token.into();
        let ok = !token.is_empty()
            && token
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-');
        if ok {
            Ok(Self(token))
        } else {
            Err(InvalidEngineId(token))
        }
    }

    pub fn mock() -> Self {
        Self(Self::MOCK.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_mock(&self) -> bool {
        self.0 == Self::MOCK
    }
}

impl TryFrom<String> for EngineId {
    type Error = InvalidEngineId;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EngineId> for String {
    fn from(value: EngineId) -> Self {
        value.0
    }
}

impl fmt::Display for EngineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for EngineId {
    type Err = InvalidEngineId;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}
