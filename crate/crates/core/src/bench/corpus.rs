//! Seeded synthetic RG corpus.
//!
//! Each document is a tiny BMP whose pixels are random (so every file has a
//! distinct content hash) plus a `.gt.json` ground-truth file holding the text
//! blocks the mock OCR backend will replay. Noise, when requested, is baked
//! into the ground-truth blocks; the reference record stays clean.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Duration as Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{cpf_check_digits, EngineId, IdRecord};
use crate::ocr::{
    apply_noise, ground_truth_path, mean_confidence, BBox, GroundTruth, TextBlock, TextExtraction,
};

const FIRST_NAMES: [&str; 16] = [
    "MARIA",
    "JOSÉ",
    "ANA",
    "JOÃO",
    "ANTÔNIO",
    "FRANCISCA",
    "CARLOS",
    "PAULO",
    "LUCAS",
    "JULIANA",
    "MÁRCIA",
    "PEDRO",
    "FERNANDA",
    "RAFAEL",
    "BEATRIZ",
    "GABRIEL",
];
const SURNAMES: [&str; 16] = [
    "SILVA",
    "SANTOS",
    "OLIVEIRA",
    "SOUZA",
    "RODRIGUES",
    "FERREIRA",
    "ALVES",
    "PEREIRA",
    "LIMA",
    "GOMES",
    "CONCEIÇÃO",
    "ARAÚJO",
    "RIBEIRO",
    "CARVALHO",
    "BARBOSA",
    "MELO",
];
const PARTICLES: [&str; 3] = ["DA", "DOS", "DE"];
const CITIES: [&str; 8] = [
    "RECIFE-PE",
    "SALVADOR-BA",
    "CURITIBA-PR",
    "MANAUS-AM",
    "BELÉM-PA",
    "NATAL-RN",
    "CUIABÁ-MT",
    "PALMAS-TO",
];
const HEADERS: [&str; 3] = [
    "REPÚBLICA FEDERATIVA DO BRASIL",
    "SECRETARIA DE SEGURANÇA PÚBLICA",
    "CARTEIRA DE IDENTIDADE",
];

/// Label arrangement of a generated document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Each label on its own line with the value on the next.
    Stacked,
    /// `LABEL: value` lines, including an unrecognized `NATURALIDADE` field.
    Inline,
    /// Header block first, registry data before personal data, dashed dates.
    Headed,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Stacked, Layout::Inline, Layout::Headed];
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoc {
    pub file_name: String,
    pub image: Vec<u8>,
    pub ground_truth: GroundTruth,
    /// What extraction should produce, with `source_id` and
    /// `extraction_confidence` already filled in.
    pub record: IdRecord,
    pub layout: Layout,
    pub seed: u64,
}

impl SyntheticDoc {
    /// Writes the ground truth, then the image, so a watcher never sees an
    /// image without its companion file. Returns the image path.
    pub fn install_into(&self, dir: &Path) -> io::Result<PathBuf> {
        let image = dir.join(&self.file_name);
        let gt = serde_json::to_vec(&self.ground_truth).map_err(io::Error::other)?;
        fs::write(ground_truth_path(&image), gt)?;
        fs::write(&image, &self.image)?;
        Ok(image)
    }

    /// The extraction the mock backend will return for this document.
    pub fn extraction(&self) -> TextExtraction {
        TextExtraction {
            source_id: self.file_name.clone(),
            engine: EngineId::mock(),
            blocks: self.ground_truth.blocks.clone(),
            engine_latency: std::time::Duration::ZERO,
        }
    }
}

/// An 8x8 24-bit BMP filled with random pixels.
fn placeholder_bmp(rng: &mut impl Rng) -> Vec<u8> {
    const W: u32 = 8;
    const H: u32 = 8;
    let row = (W * 3).div_ceil(4) * 4;
    let pixels = row * H;
    let mut out = Vec::with_capacity(54 + pixels as usize);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(54 + pixels).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&54u32.to_le_bytes());
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&(W as i32).to_le_bytes());
    out.extend_from_slice(&(H as i32).to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&24u16.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&pixels.to_le_bytes());
    out.extend_from_slice(&2835i32.to_le_bytes());
    out.extend_from_slice(&2835i32.to_le_bytes());
    out.extend_from_slice(&[0; 8]);
    for _ in 0..pixels {
        out.push(rng.random());
    }
    out
}

fn person_name(rng: &mut impl Rng, surname: &str) -> String {
    let first = FIRST_NAMES.choose(rng).expect("nonempty");
    let middle = SURNAMES.choose(rng).expect("nonempty");
    let particle = PARTICLES.choose(rng).expect("nonempty");
    if rng.random_bool(0.5) {
        format!("{first} {particle} {surname}")
    } else {
        format!("{first} {middle} {particle} {surname}")
    }
}

fn random_cpf(rng: &mut impl Rng) -> String {
    loop {
        let base: [u8; 9] = std::array::from_fn(|_| rng.random_range(0..10));
        if base.iter().all(|d| *d == base[0]) {
            continue;
        }
        let (d1, d2) = cpf_check_digits(&base);
        return base
            .iter()
            .chain([d1, d2].iter())
            .map(|d| char::from(b'0' + d))
            .collect();
    }
}

fn format_cpf(cpf: &str) -> String {
    format!(
        "{}.{}.{}-{}",
        &cpf[0..3],
        &cpf[3..6],
        &cpf[6..9],
        &cpf[9..11]
    )
}

fn random_document_number(rng: &mut impl Rng) -> String {
    let digits: String = (0..8)
        .map(|_| char::from(b'0' + rng.random_range(0..10u8)))
        .collect();
    let check = match rng.random_range(0..11u8) {
        10 => 'X',
        d => char::from(b'0' + d),
    };
    format!("{digits}{check}")
}

fn format_document_number(doc: &str, dotted: bool) -> String {
    if dotted {
        format!("{}.{}.{}-{}", &doc[0..2], &doc[2..5], &doc[5..8], &doc[8..])
    } else {
        doc.to_string()
    }
}

fn random_dates(rng: &mut impl Rng) -> (NaiveDate, Option<NaiveDate>) {
    let epoch = NaiveDate::from_ymd_opt(1940, 1, 1).expect("valid date");
    let last = NaiveDate::from_ymd_opt(2024, 12, 31).expect("valid date");
    let birth = epoch + Days::days(rng.random_range(0..(2006 - 1940) * 365));
    let issue = rng
        .random_bool(0.8)
        .then(|| birth + Days::days(rng.random_range(0..=(last - birth).num_days())));
    (birth, issue)
}

fn slash_date(d: NaiveDate) -> String {
    d.format("%d/%m/%Y").to_string()
}

fn dash_date(d: NaiveDate) -> String {
    d.format("%d-%m-%Y").to_string()
}

fn push_stacked(lines: &mut Vec<String>, label: &str, values: &[String]) {
    lines.push(label.to_string());
    lines.extend(values.iter().cloned());
}

fn render_lines(r: &IdRecord, layout: Layout, city: &str) -> Vec<String> {
    let mut lines = Vec::new();
    match layout {
        Layout::Stacked => {
            push_stacked(&mut lines, "NOME", std::slice::from_ref(&r.full_name));
            if !r.filiation.is_empty() {
                push_stacked(&mut lines, "FILIAÇÃO", &r.filiation);
            }
            push_stacked(
                &mut lines,
                "DATA DE NASCIMENTO",
                &[slash_date(r.birth_date)],
            );
            push_stacked(
                &mut lines,
                "REGISTRO GERAL",
                &[format_document_number(&r.document_number, true)],
            );
            if let Some(cpf) = &r.cpf {
                push_stacked(&mut lines, "CPF", &[format_cpf(cpf)]);
            }
            if let Some(d) = r.issue_date {
                push_stacked(&mut lines, "DATA DE EXPEDIÇÃO", &[slash_date(d)]);
            }
        }
        Layout::Inline => {
            lines.push(HEADERS[0].to_string());
            lines.push(format!(
                "REGISTRO GERAL: {}",
                format_document_number(&r.document_number, true)
            ));
            lines.push(format!("NOME: {}", r.full_name));
            if let Some((first, rest)) = r.filiation.split_first() {
                lines.push(format!("FILIAÇÃO: {first}"));
                lines.extend(rest.iter().cloned());
            }
            lines.push(format!("NATURALIDADE: {city}"));
            lines.push(format!("DATA DE NASCIMENTO: {}", slash_date(r.birth_date)));
            if let Some(cpf) = &r.cpf {
                lines.push(format!("CPF: {}", format_cpf(cpf)));
            }
            if let Some(d) = r.issue_date {
                // ISO form, as some issuing states print it
                lines.push(format!("DATA DE EXPEDIÇÃO: {d}"));
            }
        }
        Layout::Headed => {
            lines.extend(HEADERS.iter().map(|h| h.to_string()));
            push_stacked(
                &mut lines,
                "REGISTRO GERAL",
                &[format_document_number(&r.document_number, false)],
            );
            if let Some(d) = r.issue_date {
                push_stacked(&mut lines, "DATA DE EXPEDIÇÃO", &[dash_date(d)]);
            }
            push_stacked(&mut lines, "NOME", std::slice::from_ref(&r.full_name));
            if !r.filiation.is_empty() {
                push_stacked(&mut lines, "FILIAÇÃO", &r.filiation);
            }
            push_stacked(&mut lines, "DATA DE NASCIMENTO", &[dash_date(r.birth_date)]);
            if let Some(cpf) = &r.cpf {
                push_stacked(&mut lines, "CPF", std::slice::from_ref(cpf));
            }
        }
    }
    lines
}

fn generate_one(index: usize, seed: u64, noise_rate: f64) -> SyntheticDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Layout::ALL[rng.random_range(0..Layout::ALL.len())];
    let family = *SURNAMES.choose(&mut rng).expect("nonempty");
    let (birth, issue) = random_dates(&mut rng);
    let file_name = format!("doc-{index:04}.bmp");

    let mut record = IdRecord::new(
        person_name(&mut rng, family),
        birth,
        random_document_number(&mut rng),
    );
    record.cpf = rng.random_bool(0.7).then(|| random_cpf(&mut rng));
    record.issue_date = issue;
    let parents = rng.random_range(0..=2usize);
    record.filiation = (0..parents)
        .map(|_| person_name(&mut rng, family))
        .collect();
    let city = *CITIES.choose(&mut rng).expect("nonempty");
    if layout == Layout::Inline {
        record
            .extra_fields
            .insert("NATURALIDADE".into(), city.to_string());
    }

    let blocks: Vec<TextBlock> = render_lines(&record, layout, city)
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            let y = 20.0 + 30.0 * i as f64;
            let conf = f64::from(rng.random_range(850..=995u32)) / 1000.0;
            let width = 12.0 * text.chars().count() as f64;
            TextBlock::new(text, conf, BBox::new(20.0, y, 20.0 + width, y + 24.0))
        })
        .collect();
    let image = placeholder_bmp(&mut rng);

    record.source_id = file_name.clone();
    record.extraction_confidence = mean_confidence(&blocks);
    let clean = TextExtraction {
        source_id: file_name.clone(),
        engine: EngineId::mock(),
        blocks,
        engine_latency: std::time::Duration::ZERO,
    };
    let noisy = if noise_rate > 0.0 {
        apply_noise(&clean, seed ^ 0x6e6f_6973_6521, noise_rate)
    } else {
        clean
    };
    SyntheticDoc {
        file_name,
        image,
        ground_truth: GroundTruth {
            blocks: noisy.blocks,
        },
        record,
        layout,
        seed,
    }
}

/// `n` documents, deterministic in `seed`. Returns an empty list for `n == 0`.
pub fn generate_corpus(n: usize, seed: u64, noise_rate: f64) -> Vec<SyntheticDoc> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| generate_one(i, master.random(), noise_rate))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::rules_extract;
    use crate::model::{validate_cpf, validate_record};
    use crate::ocr::blocks_to_text;

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(generate_corpus(5, 42, 0.0), generate_corpus(5, 42, 0.0));
        assert_ne!(generate_corpus(5, 42, 0.0), generate_corpus(5, 43, 0.0));
    }

    #[test]
    fn generated_records_are_valid() {
        for doc in generate_corpus(300, 7, 0.0) {
            assert!(validate_record(&doc.record).valid, "{:?}", doc.record);
            if let Some(cpf) = &doc.record.cpf {
                assert_eq!(validate_cpf(cpf).as_deref(), Ok(cpf.as_str()));
            }
        }
    }

    #[test]
    fn every_layout_and_optional_shape_occurs() {
        let corpus = generate_corpus(200, 1, 0.0);
        for layout in Layout::ALL {
            assert!(corpus.iter().any(|d| d.layout == layout), "{layout:?}");
        }
        assert!(corpus.iter().any(|d| d.record.cpf.is_none()));
        assert!(corpus.iter().any(|d| d.record.issue_date.is_none()));
        for n in 0..=2 {
            assert!(corpus.iter().any(|d| d.record.filiation.len() == n));
        }
    }

    #[test]
    fn clean_corpus_round_trips_through_rules() {
        for doc in generate_corpus(60, 3, 0.0) {
            let mut got = rules_extract(&blocks_to_text(&doc.extraction())).unwrap();
            got.source_id = doc.record.source_id.clone();
            got.extraction_confidence = doc.record.extraction_confidence;
            assert_eq!(got, doc.record, "{:?}", doc.layout);
        }
    }

    #[test]
    fn images_are_distinct_bmps() {
        let corpus = generate_corpus(20, 9, 0.0);
        let mut seen = std::collections::HashSet::new();
        for doc in &corpus {
            assert_eq!(&doc.image[..2], b"BM");
            assert_eq!(
                u32::from_le_bytes(doc.image[2..6].try_into().unwrap()) as usize,
                doc.image.len()
            );
            assert!(seen.insert(doc.image.clone()));
        }
    }

    #[test]
    fn install_writes_ground_truth_and_image() {
        let dir = tempfile::tempdir().unwrap();
        let doc = &generate_corpus(1, 5, 0.0)[0];
        let img = doc.install_into(dir.path()).unwrap();
        assert_eq!(fs::read(&img).unwrap(), doc.image);
        let t = crate::ocr::mock_load(&img).unwrap();
        assert_eq!(t.blocks, doc.ground_truth.blocks);
    }
}
