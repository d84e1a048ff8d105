//! Raw OCR text to validated [`IdRecord`].
//!
//! Two strategies: a remote chat model prompted with the record schema and
//! re-asked with the validator's complaints on failure, and a deterministic
//! label-anchored rules parser. Either way, every returned record has passed
//! [`validate_record`] with zero errors.

pub mod fuzzy;
pub mod llm;
pub mod parse;
pub mod prompt;
pub mod rules;

use std::fmt;

use crate::model::{validate_record, IdRecord};
use crate::ocr::{blocks_to_text, TextExtraction};

pub use fuzzy::{fuzzy_label_match, LabelMatch};
pub use llm::{ChatMessage, LlmClient, LlmSettings, TransportError};
pub use parse::{find_json_object, parse_llm_response, ParseError};
pub use prompt::{build_prompt, PromptBundle};
pub use rules::{rules_extract, RulesError};

#[derive(Debug, Clone, PartialEq)]
pub enum ExtractionStrategy {
    Rules,
    LlmHttp(LlmSettings),
}

impl ExtractionStrategy {
    pub fn kind(&self) -> &'static str {
        match self {
            ExtractionStrategy::Rules => "rules",
            ExtractionStrategy::LlmHttp(_) => "llm-http",
        }
    }
}

impl fmt::Display for ExtractionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("OCR text is empty")]
    EmptyInput,
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error("extraction failed after {attempts} attempt(s): {last}")]
    ExtractionFailed { attempts: u32, last: String },
    #[error("LLM endpoint unreachable: {0}")]
    LlmUnreachable(String),
    #[error("LLM endpoint returned HTTP {0}")]
    LlmHttpError(u16),
    #[error("malformed LLM response: {0}")]
    LlmBadResponse(String),
}

impl From<TransportError> for ExtractError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Unreachable(m) => ExtractError::LlmUnreachable(m),
            TransportError::Http(s) => ExtractError::LlmHttpError(s),
            TransportError::BadResponse(m) => ExtractError::LlmBadResponse(m),
        }
    }
}

/// A strategy ready to run: holds the HTTP client for the LLM strategy.
/// Immutable after construction and shareable across worker threads.
#[derive(Debug)]
pub struct Extractor {
    strategy: ExtractionStrategy,
    client: Option<LlmClient>,
}

impl Extractor {
    pub fn new(strategy: ExtractionStrategy) -> Self {
        let client = match &strategy {
            ExtractionStrategy::LlmHttp(s) => Some(LlmClient::new(s.clone())),
            ExtractionStrategy::Rules => None,
        };
        Self { strategy, client }
    }

    pub fn strategy(&self) -> &ExtractionStrategy {
        &self.strategy
    }

    pub fn extract(&self, t: &TextExtraction) -> Result<IdRecord, ExtractError> {
        let raw = blocks_to_text(t);
        if raw.trim().is_empty() {
            return Err(ExtractError::EmptyInput);
        }
        let stamp = |mut r: IdRecord| {
            r.source_id = t.source_id.clone();
            r.extraction_confidence = t.mean_confidence();
            r
        };
        match (&self.strategy, &self.client) {
            (ExtractionStrategy::LlmHttp(settings), Some(client)) => {
                self.extract_llm(client, settings.max_retries, &raw, stamp)
            }
            _ => {
                let record = stamp(rules_extract(&raw)?);
                let report = validate_record(&record);
                if report.valid {
                    Ok(record)
                } else {
                    Err(RulesError::Invalid(report).into())
                }
            }
        }
    }

    fn extract_llm(
        &self,
        client: &LlmClient,
        max_retries: u32,
        raw: &str,
        stamp: impl Fn(IdRecord) -> IdRecord,
    ) -> Result<IdRecord, ExtractError> {
        let prompt = build_prompt(raw).map_err(|_| ExtractError::EmptyInput)?;
        let mut messages = vec![
            ChatMessage::system(prompt.system),
            ChatMessage::user(prompt.user),
        ];
        let mut last = String::new();
        for attempt in 0..=max_retries {
            let reply = client.complete(&messages)?;
            let issues = match parse_llm_response(&reply) {
                Ok(record) => {
                    let record = stamp(record);
                    let report = validate_record(&record);
                    if report.valid {
                        return Ok(record);
                    }
                    report.summary()
                }
                Err(ParseError::SchemaMismatch(problems)) => problems
                    .iter()
                    .map(|p| format!("- {p}"))
                    .collect::<Vec<_>>()
                    .join("\n"),
                Err(e) => format!("- {e}"),
            };
            log::debug!("LLM attempt {} rejected:\n{issues}", attempt + 1);
            messages.push(ChatMessage::assistant(reply));
            messages.push(ChatMessage::user(format!(
                "Your previous answer was rejected:\n{issues}\nReply with only the corrected JSON object."
            )));
            last = issues;
        }
        Err(ExtractError::ExtractionFailed {
            attempts: max_retries + 1,
            last,
        })
    }
}

/// One-shot convenience around [`Extractor`].
pub fn extract(
    strategy: &ExtractionStrategy,
    t: &TextExtraction,
) -> Result<IdRecord, ExtractError> {
    Extractor::new(strategy.clone()).extract(t)
}
