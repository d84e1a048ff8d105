//! TOML settings, environment overrides and the resulting pipeline config.
//!
//! `cargo run --example configuration`

use erpa::config::{env_var_name, known_keys, Settings};

const TOML: &str = r#"
[watch]
root = "/srv/scans"
poll_interval_ms = 250

[ocr]
engine = "doctr"
sidecar_cmd = "python3 ocr_sidecar.py"
sidecar_processes = 2

[pipeline]
workers = 4
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("keys and their environment variables:");
    for key in known_keys() {
        println!("  {key:<26} {}", env_var_name(key));
    }

    let env = [("ERPA_PIPELINE_WORKERS".to_string(), "8".to_string())];
    let settings = Settings::parse(TOML)?.with_env(env)?;
    let cfg = settings.pipeline_config()?;
    println!(
        "\nroot {:?}, engine {}, workers {}, poll {:?}",
        cfg.watch.root, cfg.engine, cfg.workers, cfg.watch.poll_interval
    );

    match Settings::parse("[watch]\npoll_interval = 5\n") {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
