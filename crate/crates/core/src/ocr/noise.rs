use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TextExtraction;

/// Visually ambiguous character pairs. Each pair substitutes both ways.
pub const CONFUSION_PAIRS: [(char, char); 7] = [
    ('O', '0'),
    ('I', '1'),
    ('l', '1'),
    ('S', '5'),
    ('B', '8'),
    ('Z', '2'),
    ('G', '6'),
];

/// Characters `c` may be confused with, in table order. `'1'` has two.
pub fn confusions_for(c: char) -> Vec<char> {
    CONFUSION_PAIRS
        .iter()
        .filter_map(|&(a, b)| {
            if c == a {
                Some(b)
            } else if c == b {
                Some(a)
            } else {
                None
            }
        })
        .collect()
}

/// Simulates OCR character confusion.
///
/// Every eligible character is independently replaced with probability
/// `rate`; where several replacements exist one is drawn uniformly. Output is
/// a pure function of `(t, seed, rate)`. Block count, order, geometry and
/// confidence are untouched.
pub fn apply_noise(t: &TextExtraction, seed: u64, rate: f64) -> TextExtraction {
    assert!(
        (0.0..=1.0).contains(&rate),
        "noise rate {rate} outside [0,1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = t.clone();
    for block in &mut out.blocks {
        block.text = block
            .text
            .chars()
            .map(|c| {
                let options = confusions_for(c);
                if options.is_empty() || !rng.random_bool(rate) {
                    c
                } else if options.len() == 1 {
                    options[0]
                } else {
                    options[rng.random_range(0..options.len())]
                }
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EngineId;
    use crate::ocr::{BBox, TextBlock};
    use proptest::prelude::*;
    use std::time::Duration;

    fn extraction(texts: &[&str]) -> TextExtraction {
        TextExtraction {
            source_id: "x".into(),
            engine: EngineId::mock(),
            blocks: texts
                .iter()
                .map(|t| TextBlock::new(*t, 0.9, BBox::new(0.0, 0.0, 1.0, 1.0)))
                .collect(),
            engine_latency: Duration::ZERO,
        }
    }

    #[test]
    fn full_rate_substitutes_every_eligible_char() {
        let out = apply_noise(&extraction(&["SO"]), 7, 1.0);
        assert_eq!(out.blocks[0].text, "50");
        let out = apply_noise(&extraction(&["BIG-Z 08"]), 7, 1.0);
        assert_eq!(out.blocks[0].text, "816-2 OB");
    }

    #[test]
    fn one_has_two_confusions() {
        assert_eq!(confusions_for('1'), vec!['I', 'l']);
        assert_eq!(confusions_for('O'), vec!['0']);
        assert!(confusions_for('A').is_empty());
    }

    proptest! {
        #[test]
        fn zero_rate_is_identity(texts in proptest::collection::vec("[A-Z0-9 ]{0,20}", 0..6), seed: u64) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let t = extraction(&refs);
            prop_assert_eq!(apply_noise(&t, seed, 0.0), t);
        }

        #[test]
        fn deterministic_and_shape_preserving(texts in proptest::collection::vec("[A-Z0-9 ]{0,20}", 0..6), seed: u64, rate in 0.0f64..=1.0) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let t = extraction(&refs);
            let a = apply_noise(&t, seed, rate);
            prop_assert_eq!(&a, &apply_noise(&t, seed, rate));
            prop_assert_eq!(a.blocks.len(), t.blocks.len());
            for (x, y) in a.blocks.iter().zip(&t.blocks) {
                prop_assert_eq!(x.text.chars().count(), y.text.chars().count());
                prop_assert_eq!(x.confidence, y.confidence);
            }
        }
    }
}
