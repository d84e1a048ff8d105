/// Why a CPF string was rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CpfError {
    #[error("CPF must have exactly 11 digits after removing punctuation, found {found:?}")]
    WrongLength { found: String },
    #[error("CPF made of a single repeated digit is not issued")]
    RepeatedDigits,
    #[error("CPF check digits do not verify: expected {expected}, found {found}")]
    ChecksumMismatch { expected: String, found: String },
}

/// Computes the two mod-11 check digits for a 9-digit CPF base.
///
/// The first digit weighs the base with 10..=2, the second weighs the base plus
/// the first check digit with 11..=2. A remainder below 2 yields 0, otherwise
/// the digit is `11 - remainder`.
pub fn cpf_check_digits(base: &[u8; 9]) -> (u8, u8) {
    fn digit(sum: u32) -> u8 {
        let r = sum % 11;
        if r < 2 {
            0
        } else {
            (11 - r) as u8
        }
    }
    let sum10: u32 = base
        .iter()
        .zip((2..=10u32).rev())
        .map(|(&d, w)| u32::from(d) * w)
        .sum();
    let d10 = digit(sum10);
    let sum11: u32 = base
        .iter()
        .chain(std::iter::once(&d10))
        .zip((2..=11u32).rev())
        .map(|(&d, w)| u32::from(d) * w)
        .sum();
    (d10, digit(sum11))
}

/// Validates a CPF and returns its 11 bare digits.
///
/// Dots, dashes and whitespace are stripped; anything else left over counts
/// against the length rule.
pub fn validate_cpf(raw: &str) -> Result<String, CpfError> {
    let kept: String = raw
        .chars()
        .filter(|c| !matches!(c, '.' | '-') && !c.is_whitespace())
        .collect();
    if kept.chars().count() != 11 || !kept.bytes().all(|b| b.is_ascii_digit()) {
        return Err(CpfError::WrongLength { found: kept });
    }
    let digits: Vec<u8> = kept.bytes().map(|b| b - b'0').collect();
    if digits.iter().all(|&d| d == digits[0]) {
        return Err(CpfError::RepeatedDigits);
    }
    let mut base = [0u8; 9];
    base.copy_from_slice(&digits[..9]);
    let (d10, d11) = cpf_check_digits(&base);
    if digits[9] != d10 || digits[10] != d11 {
        return Err(CpfError::ChecksumMismatch {
            expected: format!("{d10}{d11}"),
            found: format!("{}{}", digits[9], digits[10]),
        });
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: the equivalent ascending-weight formulation
    /// (weights 1..=9 and 0..=9, remainder mod 11 then mod 10), with the
    /// check pair found by enumerating all 100 candidates.
    fn oracle_pairs(base: &[u8; 9]) -> Vec<(u8, u8)> {
        let mut hits = Vec::new();
        for d10 in 0..10u8 {
            for d11 in 0..10u8 {
                let mut all = base.to_vec();
                all.push(d10);
                all.push(d11);
                let first: u32 = (0..9).map(|i| (i as u32 + 1) * u32::from(all[i])).sum();
                let second: u32 = (0..10).map(|i| i as u32 * u32::from(all[i])).sum();
                if (first % 11) % 10 == u32::from(d10) && (second % 11) % 10 == u32::from(d11) {
                    hits.push((d10, d11));
                }
            }
        }
        hits
    }

    #[test]
    fn known_valid_cpf() {
        assert_eq!(validate_cpf("111.444.777-35").unwrap(), "11144477735");
    }

    #[test]
    fn wrong_check_digit() {
        assert!(matches!(
            validate_cpf("111.444.777-36"),
            Err(CpfError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn repdigits_rejected() {
        assert_eq!(
            validate_cpf("000.000.000-00"),
            Err(CpfError::RepeatedDigits)
        );
        // every repdigit satisfies the checksum; the exclusion rule alone rejects it
        for d in 0..10u8 {
            let base = [d; 9];
            assert_eq!(cpf_check_digits(&base), (d, d));
        }
    }

    #[test]
    fn length_and_characters() {
        assert!(matches!(
            validate_cpf("1114447773"),
            Err(CpfError::WrongLength { .. })
        ));
        assert!(matches!(
            validate_cpf("111444777355"),
            Err(CpfError::WrongLength { .. })
        ));
        assert!(matches!(
            validate_cpf("111.444.777-3A"),
            Err(CpfError::WrongLength { .. })
        ));
        assert_eq!(validate_cpf(" 111 444 777 35 ").unwrap(), "11144477735");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn exactly_one_pair_per_prefix(base in proptest::array::uniform9(0u8..10)) {
            let pairs = oracle_pairs(&base);
            prop_assert_eq!(pairs.len(), 1);
            prop_assert_eq!(pairs[0], cpf_check_digits(&base));
        }

        #[test]
        fn idempotent_on_success(base in proptest::array::uniform9(0u8..10)) {
            let (a, b) = cpf_check_digits(&base);
            let s: String = base.iter().chain([a, b].iter()).map(|d| char::from(b'0' + d)).collect();
            if let Ok(once) = validate_cpf(&s) {
                prop_assert_eq!(validate_cpf(&once), Ok(once.clone()));
            }
        }
    }
}
