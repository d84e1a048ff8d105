use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FieldSpec {
    pub name: &'static str,
    pub kind: &'static str,
    pub required: bool,
    pub description: &'static str,
}

/// JSON shape the model must produce. Mirrors [`crate::model::IdRecord`].
pub const RECORD_SCHEMA: [FieldSpec; 9] = [
    FieldSpec {
        name: "full_name",
        kind: "string",
        required: true,
        description: "holder's full name as printed",
    },
    FieldSpec {
        name: "birth_date",
        kind: "string (YYYY-MM-DD)",
        required: true,
        description: "date of birth",
    },
    FieldSpec {
        name: "document_number",
        kind: "string",
        required: true,
        description: "RG / registro geral number, digits plus optional check character",
    },
    FieldSpec {
        name: "cpf",
        kind: "string (11 digits)",
        required: false,
        description: "CPF taxpayer number",
    },
    FieldSpec {
        name: "filiation",
        kind: "array of string (0-2)",
        required: false,
        description: "parent names",
    },
    FieldSpec {
        name: "issue_date",
        kind: "string (YYYY-MM-DD)",
        required: false,
        description: "date of issue (data de expedição)",
    },
    FieldSpec {
        name: "extra_fields",
        kind: "object of string to string",
        required: false,
        description: "any other labeled field, keyed by its label",
    },
    FieldSpec {
        name: "source_id",
        kind: "string",
        required: false,
        description: "leave out; filled in by the pipeline",
    },
    FieldSpec {
        name: "extraction_confidence",
        kind: "number in [0,1]",
        required: false,
        description: "leave out; filled in by the pipeline",
    },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub system: String,
    /// The OCR text, verbatim.
    pub user: String,
    pub schema: &'static [FieldSpec],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot build a prompt from empty text")]
pub struct EmptyInput;

pub fn build_prompt(raw: &str) -> Result<PromptBundle, EmptyInput> {
    if raw.trim().is_empty() {
        return Err(EmptyInput);
    }
    let mut system = String::from(
        "You extract data from OCR text of Brazilian identity documents (RG). \
         The text may contain OCR confusions such as O/0, I/1, S/5, B/8, Z/2 and G/6.\n\
         Reply with exactly one JSON object and nothing else: no prose, no code fences.\n\
         Use these keys:\n",
    );
    for f in RECORD_SCHEMA.iter() {
        system.push_str(&format!(
            "- {} ({}, {}): {}\n",
            f.name,
            f.kind,
            if f.required { "required" } else { "optional" },
            f.description
        ));
    }
    system.push_str(
        "Omit optional keys whose value is unknown; never emit null. Do not add other keys.",
    );
    Ok(PromptBundle {
        system,
        user: raw.to_string(),
        schema: &RECORD_SCHEMA,
    })
}
