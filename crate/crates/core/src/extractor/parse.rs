use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::model::{
    normalize_date, normalize_document_number, normalize_name, validate_cpf, IdRecord,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object found in model output")]
    NoJsonFound,
    #[error("JSON does not match the record schema: {}", .0.join("; "))]
    SchemaMismatch(Vec<String>),
    #[error("field {field} could not be normalized: {reason}")]
    NormalizationFailure { field: String, reason: String },
}

/// Returns the first balanced `{...}` span that parses as a JSON object.
///
/// Braces inside string literals are ignored, so code fences, leading chatter
/// and trailing prose all fall away.
pub fn find_json_object(text: &str) -> Option<(&str, Map<String, Value>)> {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(off) = text[from..].find('{') {
        let start = from + off;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            let candidate = &text[start..=end];
            if let Ok(Value::Object(map)) = serde_json::from_str(candidate) {
                return Some((candidate, map));
            }
        }
        from = start + 1;
    }
    None
}

fn check_schema(obj: &Map<String, Value>) -> Vec<String> {
    let mut problems = Vec::new();
    for key in obj.keys() {
        if !IdRecord::FIELD_NAMES.contains(&key.as_str()) {
            problems.push(format!("unknown field {key}"));
        }
    }
    for req in ["full_name", "birth_date", "document_number"] {
        match obj.get(req) {
            None | Some(Value::Null) => problems.push(format!("missing required field {req}")),
            Some(Value::String(_)) => {}
            Some(_) => problems.push(format!("field {req} must be a string")),
        }
    }
    for opt in ["cpf", "issue_date", "source_id"] {
        if let Some(v) = obj.get(opt) {
            if !(v.is_string() || v.is_null()) {
                problems.push(format!("field {opt} must be a string"));
            }
        }
    }
    match obj.get("filiation") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) if items.iter().all(Value::is_string) => {}
        Some(_) => problems.push("field filiation must be an array of strings".into()),
    }
    match obj.get("extra_fields") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) if m.values().all(Value::is_string) => {}
        Some(_) => problems.push("field extra_fields must be an object of strings".into()),
    }
    match obj.get("extraction_confidence") {
        None | Some(Value::Null) => {}
        Some(Value::Number(n)) if n.as_f64().is_some_and(|x| (0.0..=1.0).contains(&x)) => {}
        Some(_) => problems.push("field extraction_confidence must be a number in [0,1]".into()),
    }
    problems
}

fn str_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a str> {
    obj.get(key).and_then(Value::as_str)
}

fn norm_err(field: &str, e: impl std::fmt::Display) -> ParseError {
    ParseError::NormalizationFailure {
        field: field.to_string(),
        reason: e.to_string(),
    }
}

/// Turns model output into a normalized record.
pub fn parse_llm_response(raw: &str) -> Result<IdRecord, ParseError> {
    let (_, obj) = find_json_object(raw).ok_or(ParseError::NoJsonFound)?;
    let problems = check_schema(&obj);
    if !problems.is_empty() {
        return Err(ParseError::SchemaMismatch(problems));
    }

    let full_name = normalize_name(str_field(&obj, "full_name").unwrap_or_default())
        .map_err(|e| norm_err("full_name", e))?;
    let birth_date = normalize_date(str_field(&obj, "birth_date").unwrap_or_default())
        .map_err(|e| norm_err("birth_date", e))?;
    let document_number =
        normalize_document_number(str_field(&obj, "document_number").unwrap_or_default())
            .map_err(|e| norm_err("document_number", e))?;
    let cpf = str_field(&obj, "cpf")
        .map(|v| validate_cpf(v).map_err(|e| norm_err("cpf", e)))
        .transpose()?;
    let issue_date = str_field(&obj, "issue_date")
        .map(|v| normalize_date(v).map_err(|e| norm_err("issue_date", e)))
        .transpose()?;
    let filiation = obj
        .get("filiation")
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(Value::as_str)
                .map(|n| normalize_name(n).map_err(|e| norm_err("filiation", e)))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?
        .unwrap_or_default();
    let extra_fields: BTreeMap<String, String> = obj
        .get("extra_fields")
        .and_then(Value::as_object)
        .map(|m| {
            m.iter()
                .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
                .collect()
        })
        .unwrap_or_default();

    Ok(IdRecord {
        full_name,
        birth_date,
        document_number,
        cpf,
        filiation,
        issue_date,
        extra_fields,
        source_id: str_field(&obj, "source_id").unwrap_or_default().to_string(),
        extraction_confidence: obj
            .get("extraction_confidence")
            .and_then(Value::as_f64)
            .unwrap_or(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const VALID: &str = r#"{"full_name":"maria da silva","birth_date":"05/03/1991","document_number":"12.345.678-9","cpf":"111.444.777-35","filiation":["jose da silva"]}"#;

    /// Oracle for embedded-object location: try every (start, end) pair of
    /// brace positions and keep the earliest start, shortest span that parses.
    fn oracle_first_object(text: &str) -> Option<String> {
        let opens: Vec<usize> = text.match_indices('{').map(|(i, _)| i).collect();
        let closes: Vec<usize> = text.match_indices('}').map(|(i, _)| i).collect();
        for &s in &opens {
            for &e in closes.iter().filter(|&&e| e > s) {
                if let Ok(Value::Object(_)) = serde_json::from_str::<Value>(&text[s..=e]) {
                    return Some(text[s..=e].to_string());
                }
            }
        }
        None
    }

    #[test]
    fn fenced_object() {
        let r = parse_llm_response(&format!("```json\n{VALID}\n```")).unwrap();
        assert_eq!(r.full_name, "MARIA DA SILVA");
        assert_eq!(r.birth_date.to_string(), "1991-03-05");
        assert_eq!(r.document_number, "123456789");
        assert_eq!(r.cpf.as_deref(), Some("11144477735"));
        assert_eq!(r.filiation, vec!["JOSE DA SILVA"]);
    }

    #[test]
    fn embedded_in_prose() {
        let crafted = [
            format!("Sure! Here it is: {VALID} Let me know if you need more."),
            format!("Braces {{ in prose }} first, then {VALID}"),
            format!("{{\"note\": \"a }} in a string\"}} and then {VALID}"),
            format!("nested {{\"a\": {{\"b\": 1}}}} before {VALID}"),
        ];
        for text in &crafted {
            let (span, _) = find_json_object(text).unwrap();
            assert_eq!(Some(span.to_string()), oracle_first_object(text), "{text}");
        }
        assert_eq!(
            parse_llm_response(&crafted[0]).unwrap().full_name,
            "MARIA DA SILVA"
        );
        // the first object is valid JSON but not a record
        assert!(matches!(
            parse_llm_response(&crafted[2]),
            Err(ParseError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn no_json() {
        assert_eq!(
            parse_llm_response("no json here"),
            Err(ParseError::NoJsonFound)
        );
        assert_eq!(parse_llm_response("{ broken"), Err(ParseError::NoJsonFound));
        assert_eq!(parse_llm_response("[1, 2]"), Err(ParseError::NoJsonFound));
    }

    #[test]
    fn schema_problems_are_listed() {
        let err = parse_llm_response(r#"{"full_name": 3, "nickname": "x", "filiation": "A"}"#)
            .unwrap_err();
        let ParseError::SchemaMismatch(problems) = err else {
            panic!("expected schema mismatch");
        };
        assert!(problems.contains(&"unknown field nickname".to_string()));
        assert!(problems.contains(&"field full_name must be a string".to_string()));
        assert!(problems.contains(&"missing required field birth_date".to_string()));
        assert!(problems.iter().any(|p| p.contains("filiation")));
    }

    #[test]
    fn nulls_count_as_absent_optionals() {
        let r = parse_llm_response(
            r#"{"full_name":"A B","birth_date":"1990-01-01","document_number":"1","cpf":null,"issue_date":null}"#,
        )
        .unwrap();
        assert_eq!(r.cpf, None);
        assert_eq!(r.issue_date, None);
    }

    #[test]
    fn normalization_failures() {
        let bad_cpf = VALID.replace("111.444.777-35", "111.444.777-36");
        assert!(matches!(
            parse_llm_response(&bad_cpf),
            Err(ParseError::NormalizationFailure { ref field, .. }) if field == "cpf"
        ));
        let bad_date = VALID.replace("05/03/1991", "31/02/1991");
        assert!(matches!(
            parse_llm_response(&bad_date),
            Err(ParseError::NormalizationFailure { ref field, .. }) if field == "birth_date"
        ));
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(prefix in "[a-z !?.]{0,20}", suffix in "[a-z !?.]{0,20}") {
            let once = parse_llm_response(&format!("{prefix}{VALID}{suffix}")).unwrap();
            let twice = parse_llm_response(&once.to_json()).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
