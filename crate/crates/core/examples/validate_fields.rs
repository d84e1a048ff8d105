//! Field normalizers, CPF check digits and whole-record validation.
//!
//! `cargo run --example validate_fields`

use chrono::NaiveDate;
use erpa::model::{
    cpf_check_digits, normalize_date, normalize_document_number, normalize_name, validate_cpf,
    validate_record, IdRecord,
};

fn main() {
    for raw in ["111.444.777-35", "111.444.777-36", "000.000.000-00", "1234"] {
        match validate_cpf(raw) {
            Ok(digits) => println!("cpf {raw:<16} ok    {digits}"),
            Err(e) => println!("cpf {raw:<16} error {e}"),
        }
    }
    println!(
        "check digits for 111444777: {:?}",
        cpf_check_digits(&[1, 1, 1, 4, 4, 4, 7, 7, 7])
    );

    for raw in ["05/03/1987", "1987-03-05", "5.3.1987", "31/02/2000"] {
        println!("date {raw:<12} -> {:?}", normalize_date(raw));
    }
    println!("name   -> {:?}", normalize_name("  maria   da  conceição "));
    println!("rg     -> {:?}", normalize_document_number("12.345.678-x"));

    let mut record = IdRecord::new(
        "MARIA DA CONCEIÇÃO",
        NaiveDate::from_ymd_opt(1987, 3, 5).unwrap(),
        "12345678X",
    );
    record.cpf = Some("11144477735".into());
    record.filiation = vec!["JOSÉ DA SILVA".into(), "ANA SOUZA".into()];
    record.issue_date = NaiveDate::from_ymd_opt(2005, 9, 12);
    let report = validate_record(&record);
    println!("\n{}\nvalid: {}", record.to_json(), report.valid);

    record.issue_date = NaiveDate::from_ymd_opt(1980, 1, 1);
    record.cpf = Some("11144477736".into());
    let report = validate_record(&record);
    println!(
        "\nafter breaking two fields, valid: {}\n{}",
        report.valid,
        report.summary()
    );
}
