//! Deterministic rules-based extraction, including OCR-damaged labels.
//!
//! `cargo run --example rules_extraction`

use erpa::extractor::{fuzzy_label_match, rules_extract};

const SCAN: &str = "\
REPUBLICA FEDERATIVA DO BRASIL
SECRETARIA DE SEGURANCA PUBLICA
NOME
JOÃO PEDRO ALVES
FlLIAÇÃO
CARLOS ALVES
MARIA ALVES
DATA DE NASClMENTO
O7/11/1990
REGISTRO GERAL
12.345.678-9
CPF
111.444.777-35
DATA DE EXPEDIÇÃO
15/06/2010
NATURALIDADE
RECIFE - PE";

fn main() {
    let damaged = [
        ("FlLIAÇÃO", "FILIAÇÃO"),
        ("DATA DE NASClMENTO", "DATA DE NASCIMENTO"),
        ("CPE", "CPF"),
        ("NOMEE", "NOME"),
        ("NATURALIDADE", "NOME"),
    ];
    for (line, label) in damaged {
        println!(
            "{line:<20} vs {label:<20} {:?}",
            fuzzy_label_match(line, label)
        );
    }
    match rules_extract(SCAN) {
        Ok(r) => println!("\n{}", serde_json::to_string_pretty(&r).unwrap()),
        Err(e) => println!("\nextraction failed: {e}"),
    }
    println!(
        "\nwithout a name: {:?}",
        rules_extract("CPF\n111.444.777-35").err()
    );
}
