//! NDJSON-over-stdio protocol to an external OCR process.
//!
//! One JSON object per line, UTF-8, no pretty-printing. The client sends
//! `{"id","op","engine","image_path"}` and expects exactly one response line
//! echoing the same `id`. The first exchange is always a `hello` handshake
//! whose response lists the engines the process can run.
//!
//! A client owns one child process and keeps at most one request in flight.
//! [`SidecarBackend`] pools several clients and respawns dead ones lazily.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError};
use serde::{Deserialize, Serialize};

use super::{mock_load, source_id_of, OcrBackend, OcrError, TextBlock, TextExtraction};
use crate::model::EngineId;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidecarOp {
    Hello,
    Ocr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRequest {
    pub id: String,
    pub op: SidecarOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl SidecarRequest {
    pub fn hello(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            op: SidecarOp::Hello,
            engine: None,
            image_path: None,
        }
    }

    pub fn ocr(id: impl Into<String>, engine: &str, image_path: &Path) -> Self {
        Self {
            id: id.into(),
            op: SidecarOp::Ocr,
            engine: Some(engine.to_string()),
            image_path: Some(image_path.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarResponse {
    pub id: String,
    pub ok: bool,
    #[serde(default)]
    pub blocks: Vec<TextBlock>,
    #[serde(default)]
    pub engine_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Present on `hello` responses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engines: Option<Vec<String>>,
    /// Engine name to version string, when the sidecar reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub versions: Option<BTreeMap<String, String>>,
}

impl SidecarResponse {
    pub fn success(id: impl Into<String>, blocks: Vec<TextBlock>, engine_ms: f64) -> Self {
        Self {
            id: id.into(),
            ok: true,
            blocks,
            engine_ms,
            error: None,
            engines: None,
            versions: None,
        }
    }

    pub fn failure(id: impl Into<String>, error: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ok: false,
            blocks: Vec::new(),
            engine_ms: 0.0,
            error: Some(error.into()),
            engines: None,
            versions: None,
        }
    }

    /// Boundary checks applied to every received response.
    pub fn check(&self, expected_id: &str) -> Result<(), SidecarError> {
        if self.id != expected_id {
            return Err(SidecarError::ProtocolViolation(format!(
                "response id {:?} does not answer request {:?}",
                self.id, expected_id
            )));
        }
        if !self.ok && self.error.is_none() {
            return Err(SidecarError::ProtocolViolation(
                "ok=false without error".into(),
            ));
        }
        if !self.engine_ms.is_finite() || self.engine_ms < 0.0 {
            return Err(SidecarError::ProtocolViolation(format!(
                "bad engine_ms {}",
                self.engine_ms
            )));
        }
        for b in &self.blocks {
            b.check().map_err(SidecarError::ProtocolViolation)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SidecarError {
    #[error("failed to launch sidecar {cmd:?}: {source}")]
    Spawn {
        cmd: Vec<String>,
        #[source]
        source: std::io::Error,
    },
    #[error("sidecar handshake failed: {0}")]
    HandshakeFailed(String),
    #[error("sidecar did not answer within {0:?}")]
    Timeout(Duration),
    #[error("sidecar protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("sidecar process exited")]
    SidecarExited,
}

/// A live sidecar process with a completed handshake.
pub struct SidecarClient {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    engines: Vec<String>,
    versions: BTreeMap<String, String>,
    timeout: Duration,
    next_id: u64,
    broken: bool,
}

impl std::fmt::Debug for SidecarClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SidecarClient")
            .field("pid", &self.child.id())
            .field("engines", &self.engines)
            .field("broken", &self.broken)
            .finish()
    }
}

impl SidecarClient {
    /// Launches `cmd` (program followed by arguments) and performs the hello
    /// handshake.
    pub fn spawn(cmd: &[String], timeout: Duration) -> Result<Self, SidecarError> {
        let spawn_err = |source| SidecarError::Spawn {
            cmd: cmd.to_vec(),
            source,
        };
        let (program, args) = cmd.split_first().ok_or_else(|| {
            spawn_err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "empty command",
            ))
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(spawn_err)?;

        let stdout = child.stdout.take().expect("stdout is piped");
        let stderr = child.stderr.take().expect("stderr is piped");
        let (tx, rx) = crossbeam_channel::unbounded();
        std::thread::Builder::new()
            .name("sidecar-stdout".into())
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            })
            .expect("spawn reader thread");
        let pid = child.id();
        std::thread::Builder::new()
            .name("sidecar-stderr".into())
            .spawn(move || {
                for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                    log::info!(target: "erpa::sidecar", "[pid {pid}] {line}");
                }
            })
            .expect("spawn stderr thread");

        let mut client = Self {
            stdin: child.stdin.take(),
            child,
            lines: rx,
            engines: Vec::new(),
            versions: BTreeMap::new(),
            timeout,
            next_id: 0,
            broken: false,
        };
        let id = client.fresh_id();
        let hello = client.call(&SidecarRequest::hello(id))?;
        if !hello.ok {
            return Err(SidecarError::HandshakeFailed(
                hello.error.unwrap_or_default(),
            ));
        }
        client.engines = hello.engines.ok_or_else(|| {
            SidecarError::HandshakeFailed("hello response lists no engines".into())
        })?;
        client.versions = hello.versions.unwrap_or_default();
        Ok(client)
    }

    pub fn engines(&self) -> &[String] {
        &self.engines
    }

    pub fn versions(&self) -> &BTreeMap<String, String> {
        &self.versions
    }

    pub fn supports(&self, engine: &str) -> bool {
        self.engines.iter().any(|e| e == engine)
    }

    /// False once a timeout, protocol violation or exit has been observed.
    pub fn is_usable(&mut self) -> bool {
        !self.broken && matches!(self.child.try_wait(), Ok(None))
    }

    pub fn fresh_id(&mut self) -> String {
        self.next_id += 1;
        format!("req-{}", self.next_id)
    }

    /// Sends one request and waits for the matching response line.
    pub fn call(&mut self, req: &SidecarRequest) -> Result<SidecarResponse, SidecarError> {
        if self.broken {
            return Err(SidecarError::SidecarExited);
        }
        let mut line = serde_json::to_string(req).expect("request serialization is infallible");
        line.push('\n');
        let sent = match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if sent.is_err() {
            self.broken = true;
            return Err(SidecarError::SidecarExited);
        }

        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(Ok(raw)) if raw.trim().is_empty() => continue,
                Ok(Ok(raw)) => {
                    let parsed = serde_json::from_str::<SidecarResponse>(&raw)
                        .map_err(|e| {
                            SidecarError::ProtocolViolation(format!(
                                "unparseable line {raw:?}: {e}"
                            ))
                        })
                        .and_then(|resp| resp.check(&req.id).map(|_| resp));
                    if parsed.is_err() {
                        self.poison();
                    }
                    return parsed;
                }
                Ok(Err(e)) => {
                    self.poison();
                    return Err(SidecarError::ProtocolViolation(format!(
                        "unreadable line: {e}"
                    )));
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.poison();
                    return Err(SidecarError::Timeout(self.timeout));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.broken = true;
                    return Err(SidecarError::SidecarExited);
                }
            }
        }
    }

    /// Runs `engine` on `image`.
    pub fn ocr(&mut self, engine: &str, image: &Path) -> Result<SidecarResponse, SidecarError> {
        let id = self.fresh_id();
        self.call(&SidecarRequest::ocr(id, engine, image))
    }

    // A late answer would desynchronize ids, so the process is not reused.
    fn poison(&mut self) {
        self.broken = true;
        let _ = self.child.kill();
    }
}

impl Drop for SidecarClient {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(200);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// OCR backend served by a pool of sidecar processes, one request in flight
/// per process.
pub struct SidecarBackend {
    engine: EngineId,
    cmd: Vec<String>,
    timeout: Duration,
    slots: Vec<Mutex<Option<SidecarClient>>>,
    next: AtomicUsize,
}

impl SidecarBackend {
    /// Processes are launched on first use, not here.
    pub fn new(engine: EngineId, cmd: Vec<String>, processes: usize, timeout: Duration) -> Self {
        Self {
            engine,
            cmd,
            timeout,
            slots: (0..processes.max(1)).map(|_| Mutex::new(None)).collect(),
            next: AtomicUsize::new(0),
        }
    }

    pub fn process_count(&self) -> usize {
        self.slots.len()
    }
}

impl OcrBackend for SidecarBackend {
    fn engine(&self) -> &EngineId {
        &self.engine
    }

    fn extract(&self, document: &Path) -> Result<TextExtraction, OcrError> {
        let start = self.next.fetch_add(1, Ordering::Relaxed) % self.slots.len();
        let mut guard = (0..self.slots.len())
            .find_map(|k| self.slots[(start + k) % self.slots.len()].try_lock().ok())
            .unwrap_or_else(|| self.slots[start].lock().unwrap_or_else(|p| p.into_inner()));

        let alive = guard
            .as_mut()
            .map(SidecarClient::is_usable)
            .unwrap_or(false);
        if !alive {
            *guard = None;
            let client = SidecarClient::spawn(&self.cmd, self.timeout)
                .map_err(|e| OcrError::BackendUnavailable(e.to_string()))?;
            if !client.supports(self.engine.as_str()) {
                return Err(OcrError::BackendUnavailable(format!(
                    "sidecar offers {:?}, not {}",
                    client.engines(),
                    self.engine
                )));
            }
            *guard = Some(client);
        }
        let client = guard.as_mut().expect("client present");

        let resp = match client.ocr(self.engine.as_str(), document) {
            Ok(r) => r,
            Err(e) => {
                *guard = None;
                return Err(match e {
                    SidecarError::Timeout(d) => OcrError::Timeout(d),
                    SidecarError::SidecarExited => OcrError::BackendUnavailable(e.to_string()),
                    other => OcrError::EngineFailure(other.to_string()),
                });
            }
        };
        if !resp.ok {
            return Err(OcrError::EngineFailure(resp.error.unwrap_or_default()));
        }
        Ok(TextExtraction {
            source_id: source_id_of(document),
            engine: self.engine.clone(),
            blocks: resp.blocks,
            engine_latency: Duration::from_secs_f64(resp.engine_ms / 1000.0),
        })
    }
}

/// Request handler for the serving side of the protocol.
pub trait SidecarHandler {
    fn engines(&self) -> Vec<String>;

    fn versions(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }

    fn ocr(&self, engine: &str, image_path: &Path) -> Result<Vec<TextBlock>, String>;
}

/// Serves the protocol until `input` reaches end of file. Request errors
/// become `ok:false` responses; only output failures end the loop early.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    handler: &dyn SidecarHandler,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = answer(&line, handler);
        let mut out = serde_json::to_string(&resp).expect("response serialization is infallible");
        out.push('\n');
        output.write_all(out.as_bytes())?;
        output.flush()?;
    }
    Ok(())
}

fn answer(line: &str, handler: &dyn SidecarHandler) -> SidecarResponse {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return SidecarResponse::failure("", format!("unparseable request: {e}")),
    };
    let id = value
        .get("id")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    let req: SidecarRequest = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return SidecarResponse::failure(id, format!("malformed request: {e}")),
    };
    match req.op {
        SidecarOp::Hello => {
            let versions = handler.versions();
            SidecarResponse {
                engines: Some(handler.engines()),
                versions: (!versions.is_empty()).then_some(versions),
                ..SidecarResponse::success(id, Vec::new(), 0.0)
            }
        }
        SidecarOp::Ocr => {
            let (Some(engine), Some(path)) = (req.engine, req.image_path) else {
                return SidecarResponse::failure(id, "ocr request needs engine and image_path");
            };
            if !handler.engines().contains(&engine) {
                return SidecarResponse::failure(id, format!("unknown engine {engine:?}"));
            }
            let started = Instant::now();
            match handler.ocr(&engine, Path::new(&path)) {
                Ok(blocks) => {
                    SidecarResponse::success(id, blocks, started.elapsed().as_secs_f64() * 1000.0)
                }
                Err(e) => SidecarResponse::failure(id, e),
            }
        }
    }
}

/// Serves ground-truth files under any of the configured engine tokens.
#[derive(Debug, Clone)]
pub struct MockSidecarHandler {
    pub engines: Vec<String>,
}

impl Default for MockSidecarHandler {
    fn default() -> Self {
        Self {
            engines: vec![EngineId::MOCK.to_string()],
        }
    }
}

impl SidecarHandler for MockSidecarHandler {
    fn engines(&self) -> Vec<String> {
        self.engines.clone()
    }

    fn ocr(&self, _engine: &str, image_path: &Path) -> Result<Vec<TextBlock>, String> {
        if !image_path.exists() {
            return Err(format!("image not found: {}", image_path.display()));
        }
        mock_load(&PathBuf::from(image_path))
            .map(|t| t.blocks)
            .map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn converse(lines: &[&str]) -> Vec<SidecarResponse> {
        let input = lines.join("\n");
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, &MockSidecarHandler::default()).unwrap();
        String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    #[test]
    fn request_wire_form() {
        let r = SidecarRequest::ocr("7", "paddleocr", Path::new("/x/a.png"));
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":"7","op":"ocr","engine":"paddleocr","image_path":"/x/a.png"}"#
        );
        assert_eq!(
            serde_json::to_string(&SidecarRequest::hello("1")).unwrap(),
            r#"{"id":"1","op":"hello"}"#
        );
    }

    #[test]
    fn serve_hello_and_errors() {
        let resps = converse(&[
            r#"{"id":"1","op":"hello"}"#,
            r#"{"id":"2","op":"ocr","engine":"nope","image_path":"/x"}"#,
            r#"{"id":"3","op":"ocr","engine":"mock","image_path":"/definitely/missing.png"}"#,
            "garbage",
            r#"{"id":"5","op":"dance"}"#,
        ]);
        assert_eq!(resps.len(), 5);
        assert!(resps[0].ok);
        assert_eq!(resps[0].engines.as_deref(), Some(&["mock".to_string()][..]));
        assert!(
            !resps[1].ok
                && resps[1]
                    .error
                    .as_deref()
                    .unwrap()
                    .contains("unknown engine")
        );
        assert!(
            !resps[2].ok
                && resps[2]
                    .error
                    .as_deref()
                    .unwrap()
                    .contains("/definitely/missing.png")
        );
        assert!(!resps[3].ok);
        assert_eq!(resps[4].id, "5");
        assert!(!resps[4].ok);
    }

    #[test]
    fn response_checks() {
        let good = SidecarResponse::success("a", Vec::new(), 1.0);
        assert!(good.check("a").is_ok());
        assert!(matches!(
            good.check("b"),
            Err(SidecarError::ProtocolViolation(_))
        ));
        let mut no_error = good.clone();
        no_error.ok = false;
        assert!(no_error.check("a").is_err());
        let mut bad_conf = good.clone();
        bad_conf.blocks.push(TextBlock::new(
            "x",
            1.5,
            crate::ocr::BBox::new(0.0, 0.0, 1.0, 1.0),
        ));
        assert!(bad_conf.check("a").is_err());
    }
}
