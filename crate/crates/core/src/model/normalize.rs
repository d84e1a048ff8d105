use chrono::NaiveDate;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DateError {
    #[error("unparseable date {0:?}: expected DD/MM/YYYY, DD-MM-YYYY or YYYY-MM-DD")]
    UnparseableDate(String),
    #[error("impossible calendar date {0:?}")]
    ImpossibleDate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NameError {
    #[error("name is empty after normalization")]
    EmptyName,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocumentNumberError {
    #[error("document number {0:?} is not digits with an optional check character")]
    Malformed(String),
}

/// Parses a Brazilian (day-first) or ISO date into a calendar date.
///
/// Two-digit years are rejected outright.
pub fn normalize_date(raw: &str) -> Result<NaiveDate, DateError> {
    let s = raw.trim();
    let unparseable = || DateError::UnparseableDate(raw.to_string());

    let sep = if s.contains('/') {
        '/'
    } else if s.contains('-') {
        '-'
    } else {
        return Err(unparseable());
    };
    let parts: Vec<&str> = s.split(sep).collect();
    if parts.len() != 3
        || parts
            .iter()
            .any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()))
    {
        return Err(unparseable());
    }

    let (year, month, day) = if sep == '-' && parts[0].len() == 4 {
        if parts[1].len() != 2 || parts[2].len() != 2 {
            return Err(unparseable());
        }
        (parts[0], parts[1], parts[2])
    } else {
        if parts[0].len() > 2 || parts[1].len() > 2 || parts[2].len() != 4 {
            return Err(unparseable());
        }
        (parts[2], parts[1], parts[0])
    };
    let year: i32 = year.parse().map_err(|_| unparseable())?;
    let month: u32 = month.parse().map_err(|_| unparseable())?;
    let day: u32 = day.parse().map_err(|_| unparseable())?;
    NaiveDate::from_ymd_opt(year, month, day)
        .ok_or_else(|| DateError::ImpossibleDate(raw.to_string()))
}

/// Trims, collapses whitespace runs, drops control characters and uppercases
/// while keeping diacritics.
pub fn normalize_name(raw: &str) -> Result<String, NameError> {
    let cleaned: String = raw
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .filter(|c| !c.is_control())
        .collect();
    let joined = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.is_empty() {
        return Err(NameError::EmptyName);
    }
    Ok(joined.to_uppercase())
}

/// Strips RG punctuation (dots, dashes, slashes, spaces) and uppercases the
/// trailing check character. The check character itself is not verified.
pub fn normalize_document_number(raw: &str) -> Result<String, DocumentNumberError> {
    let kept: String = raw
        .chars()
        .filter(|c| !matches!(c, '.' | '-' | '/') && !c.is_whitespace())
        .flat_map(char::to_uppercase)
        .collect();
    if is_document_number(&kept) {
        Ok(kept)
    } else {
        Err(DocumentNumberError::Malformed(raw.to_string()))
    }
}

pub(crate) fn is_document_number(s: &str) -> bool {
    let bytes = s.as_bytes();
    match bytes.split_last() {
        None => false,
        Some((last, body)) => {
            let body_ok = body.iter().all(u8::is_ascii_digit);
            let digits_in_body = !body.is_empty() || last.is_ascii_digit();
            body_ok && digits_in_body && (last.is_ascii_digit() || *last == b'X')
        }
    }
}
