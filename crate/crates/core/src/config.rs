//! Flat key/value configuration.
//!
//! A TOML document whose (possibly nested) tables flatten to dotted keys such
//! as `watch.root` or `extract.llm.model`. Every key can be overridden by an
//! environment variable named `ERPA_` plus the key uppercased with dots turned
//! into underscores (`ERPA_WATCH_POLL_INTERVAL_MS`). Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::extractor::{ExtractionStrategy, LlmSettings};
use crate::model::EngineId;
use crate::orchestrator::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Text,
    Int,
    /// Comma-separated in strings, or a TOML array.
    List,
    /// Whitespace-separated in strings, or a TOML array.
    Words,
}

const KEYS: [(&str, Kind); 19] = [
    ("watch.root", Kind::Text),
    ("watch.poll_interval_ms", Kind::Int),
    ("watch.extensions", Kind::List),
    ("watch.stability_ms", Kind::Int),
    ("ocr.engine", Kind::Text),
    ("ocr.sidecar_cmd", Kind::Words),
    ("ocr.sidecar_processes", Kind::Int),
    ("ocr.timeout_ms", Kind::Int),
    ("ocr.mock_latency_ms", Kind::Int),
    ("extract.strategy", Kind::Text),
    ("extract.llm.endpoint", Kind::Text),
    ("extract.llm.model", Kind::Text),
    ("extract.llm.max_retries", Kind::Int),
    ("extract.llm.max_concurrency", Kind::Int),
    ("extract.llm.timeout_ms", Kind::Int),
    ("store.dir", Kind::Text),
    ("pipeline.workers", Kind::Int),
    ("pipeline.failure_dir", Kind::Text),
    ("pipeline.stop_file", Kind::Text),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown config key {0}")]
    UnknownKey(String),
    #[error("config key {key}: {reason}")]
    BadValue { key: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Text(String),
    Int(i64),
    List(Vec<String>),
}

/// Every accepted dotted key, in file order.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}

pub fn env_var_name(key: &str) -> String {
    format!("ERPA_{}", key.replace('.', "_").to_uppercase())
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn from_str(key: &str, kind: Kind, s: &str) -> Result<Value, ConfigError> {
    Ok(match kind {
        Kind::Text => Value::Text(s.to_string()),
        Kind::Int => Value::Int(
            s.trim()
                .parse()
                .map_err(|_| bad(key, format!("{s:?} is not an integer")))?,
        ),
        Kind::List => Value::List(
            s.split(',')
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty())
                .collect(),
        ),
        Kind::Words => Value::List(s.split_whitespace().map(str::to_string).collect()),
    })
}

fn from_toml(key: &str, kind: Kind, v: &toml::Value) -> Result<Value, ConfigError> {
    match (kind, v) {
        (_, toml::Value::String(s)) => from_str(key, kind, s),
        (Kind::Int, toml::Value::Integer(i)) => Ok(Value::Int(*i)),
        (Kind::List | Kind::Words, toml::Value::Array(items)) => items
            .iter()
            .map(|i| {
                i.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| bad(key, "array items must be strings"))
            })
            .collect::<Result<_, _>>()
            .map(Value::List),
        _ => Err(bad(key, format!("unexpected value {v}"))),
    }
}

fn flatten(
    prefix: &str,
    table: &toml::Table,
    out: &mut BTreeMap<String, Value>,
) -> Result<(), ConfigError> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        if let toml::Value::Table(t) = v {
            flatten(&key, t, out)?;
            continue;
        }
        let kind = kind_of(&key).ok_or_else(|| ConfigError::UnknownKey(key.clone()))?;
        out.insert(key.clone(), from_toml(&key, kind, v)?);
    }
    Ok(())
}

/// Parsed key/value settings, before conversion into a [`PipelineConfig`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, Value>,
    api_key: Option<String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut values = BTreeMap::new();
        flatten("", &table, &mut values)?;
        Ok(Self {
            values,
            api_key: None,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Applies `ERPA_*` overrides from `vars` (normally `std::env::vars()`).
    pub fn with_env(
        mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let vars: BTreeMap<String, String> = vars.into_iter().collect();
        for (key, kind) in KEYS {
            if let Some(v) = vars.get(&env_var_name(key)) {
                self.values.insert(key.to_string(), from_str(key, kind, v)?);
            }
        }
        self.api_key = vars
            .get(crate::extractor::llm::API_KEY_ENV)
            .filter(|k| !k.is_empty())
            .cloned();
        Ok(self)
    }

    /// Sets a single key, as if it came from the file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        self.values
            .insert(key.to_string(), from_str(key, kind, value)?);
        Ok(())
    }

    fn text(&self, key: &str) -> Option<&str> {
        match self.values.get(key) {
            Some(Value::Text(s)) => Some(s),
            _ => None,
        }
    }

    fn int(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.values.get(key) {
            Some(Value::Int(i)) => u64::try_from(*i).map_err(|_| bad(key, "must be >= 0")),
            _ => Ok(default),
        }
    }

    fn list(&self, key: &str) -> Option<&[String]> {
        match self.values.get(key) {
            Some(Value::List(l)) => Some(l),
            _ => None,
        }
    }

    pub fn store_dir(&self) -> PathBuf {
        PathBuf::from(self.text("store.dir").unwrap_or("erpa-store"))
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, ConfigError> {
        let root = self.text("watch.root").unwrap_or("inbox");
        let mut cfg = PipelineConfig::new(root, self.store_dir());
        cfg.watch.poll_interval = Duration::from_millis(self.int("watch.poll_interval_ms", 500)?);
        cfg.watch.stability_window = Duration::from_millis(self.int("watch.stability_ms", 300)?);
        if let Some(exts) = self.list("watch.extensions") {
            cfg.watch.valid_extensions = exts
                .iter()
                .map(|e| e.trim_start_matches('.').to_lowercase())
                .collect();
        }

        if let Some(engine) = self.text("ocr.engine") {
            cfg.engine = EngineId::new(engine).map_err(|e| bad("ocr.engine", e.to_string()))?;
        }
        if let Some(cmd) = self.list("ocr.sidecar_cmd") {
            cfg.ocr.sidecar_cmd = cmd.to_vec();
        }
        cfg.ocr.sidecar_processes = self.int("ocr.sidecar_processes", 1)? as usize;
        cfg.ocr.timeout =
            Duration::from_millis(self.int("ocr.timeout_ms", cfg.ocr.timeout.as_millis() as u64)?);
        cfg.ocr.mock_latency = Duration::from_millis(self.int("ocr.mock_latency_ms", 0)?);

        cfg.strategy = match self.text("extract.strategy").unwrap_or("rules") {
            "rules" => ExtractionStrategy::Rules,
            "llm-http" | "llm" => {
                let endpoint = self.text("extract.llm.endpoint").unwrap_or_default();
                let model = self.text("extract.llm.model").unwrap_or_default();
                let mut s = LlmSettings::new(endpoint, model);
                s.max_retries = self.int("extract.llm.max_retries", 2)? as u32;
                s.max_concurrency = self.int("extract.llm.max_concurrency", 4)? as usize;
                s.timeout = Duration::from_millis(self.int("extract.llm.timeout_ms", 60_000)?);
                s.api_key = self.api_key.clone();
                ExtractionStrategy::LlmHttp(s)
            }
            other => {
                return Err(bad(
                    "extract.strategy",
                    format!("{other:?} is not rules or llm-http"),
                ))
            }
        };

        cfg.workers = self.int("pipeline.workers", 1)? as usize;
        if let Some(dir) = self.text("pipeline.failure_dir") {
            cfg.failure_dir = PathBuf::from(dir);
        }
        cfg.stop_file = self.text("pipeline.stop_file").map(PathBuf::from);
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[watch]
root = "/data/inbox"
poll_interval_ms = 250
extensions = ["png", "JPG"]

[ocr]
engine = "paddleocr"
sidecar_cmd = "python3 sidecar.py --quiet"

[extract]
strategy = "llm-http"
llm.endpoint = "http://localhost:8080/v1/chat/completions"
llm.model = "qwen"

[pipeline]
workers = 3
"#;

    #[test]
    fn nested_tables_flatten() {
        let cfg = Settings::parse(SAMPLE).unwrap().pipeline_config().unwrap();
        assert_eq!(cfg.watch.root, PathBuf::from("/data/inbox"));
        assert_eq!(cfg.watch.poll_interval, Duration::from_millis(250));
        assert!(cfg.watch.valid_extensions.contains("jpg"));
        assert_eq!(cfg.engine.as_str(), "paddleocr");
        assert_eq!(cfg.ocr.sidecar_cmd, ["python3", "sidecar.py", "--quiet"]);
        assert_eq!(cfg.workers, 3);
        let ExtractionStrategy::LlmHttp(s) = &cfg.strategy else {
            panic!("expected llm strategy")
        };
        assert_eq!(s.model, "qwen");
        assert_eq!(s.max_retries, 2);
    }

    #[test]
    fn dotted_keys_equal_tables() {
        let a = Settings::parse("watch.root = \"x\"\nwatch.stability_ms = 5").unwrap();
        let b = Settings::parse("[watch]\nroot = \"x\"\nstability_ms = 5").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn env_overrides_file() {
        let s = Settings::parse(SAMPLE)
            .unwrap()
            .with_env([
                ("ERPA_PIPELINE_WORKERS".to_string(), "5".to_string()),
                ("ERPA_EXTRACT_LLM_MODEL".to_string(), "llama".to_string()),
                ("ERPA_LLM_API_KEY".to_string(), "sk-test".to_string()),
                ("UNRELATED".to_string(), "1".to_string()),
            ])
            .unwrap();
        let cfg = s.pipeline_config().unwrap();
        assert_eq!(cfg.workers, 5);
        let ExtractionStrategy::LlmHttp(llm) = &cfg.strategy else {
            panic!("expected llm strategy")
        };
        assert_eq!(llm.model, "llama");
        assert_eq!(llm.api_key.as_deref(), Some("sk-test"));
    }

    #[test]
    fn errors() {
        assert!(
            matches!(Settings::parse("watch.rot = 1"), Err(ConfigError::UnknownKey(k)) if k == "watch.rot")
        );
        assert!(matches!(
            Settings::parse("watch.poll_interval_ms = \"soon\""),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            Settings::parse("= broken"),
            Err(ConfigError::Syntax(_))
        ));
        let zero = Settings::parse("pipeline.workers = 0").unwrap();
        assert!(matches!(
            zero.pipeline_config(),
            Err(ConfigError::Invalid(_))
        ));
        let strat = Settings::parse("extract.strategy = \"magic\"").unwrap();
        assert!(matches!(
            strat.pipeline_config(),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn env_names() {
        assert_eq!(
            env_var_name("watch.poll_interval_ms"),
            "ERPA_WATCH_POLL_INTERVAL_MS"
        );
        assert_eq!(
            env_var_name("extract.llm.endpoint"),
            "ERPA_EXTRACT_LLM_ENDPOINT"
        );
    }
}
