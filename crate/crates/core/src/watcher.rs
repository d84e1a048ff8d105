//! Polling directory monitor.
//!
//! A file counts as new when it is present in the current snapshot and absent
//! from the previous one (plain set difference over relative paths). Removals
//! and in-place modifications are never reported. [`DirectoryWatcher`] adds a
//! stability gate on top so half-written files are not handed downstream.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime};

#[derive(Debug, Clone, PartialEq)]
pub struct WatchConfig {
    pub root: PathBuf,
    pub poll_interval: Duration,
    /// Lowercase extensions without the leading dot.
    pub valid_extensions: BTreeSet<String>,
    pub stability_window: Duration,
}

pub const DEFAULT_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "tiff", "bmp"];

impl WatchConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            poll_interval: Duration::from_millis(500),
            valid_extensions: DEFAULT_EXTENSIONS.iter().map(|s| s.to_string()).collect(),
            stability_window: Duration::from_millis(300),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.poll_interval.is_zero() {
            return Err("watch.poll_interval_ms must be > 0".into());
        }
        if self.valid_extensions.is_empty() {
            return Err("watch.extensions must not be empty".into());
        }
        if let Some(bad) = self
            .valid_extensions
            .iter()
            .find(|e| e.is_empty() || **e != e.to_lowercase())
        {
            return Err(format!(
                "watch.extensions entry {bad:?} must be nonempty lowercase"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntryMeta {
    pub size: u64,
    pub modified: Option<SystemTime>,
}

/// The file set of the watched root at one instant.
#[derive(Debug, Clone)]
pub struct DirectorySnapshot {
    pub taken_at: Instant,
    pub entries: BTreeMap<PathBuf, EntryMeta>,
}

impl DirectorySnapshot {
    pub fn empty() -> Self {
        Self {
            taken_at: Instant::now(),
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        taken_at: Instant,
        entries: impl IntoIterator<Item = (PathBuf, EntryMeta)>,
    ) -> Self {
        Self {
            taken_at,
            entries: entries.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, path: &Path) -> bool {
        self.entries.contains_key(path)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WatchError {
    #[error("watched root {0} does not exist or is not a directory")]
    RootMissing(PathBuf),
    #[error("permission denied reading {0}")]
    PermissionDenied(PathBuf),
    #[error("i/o error scanning {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn scan_error(root: &Path, e: std::io::Error) -> WatchError {
    match e.kind() {
        ErrorKind::NotFound | ErrorKind::NotADirectory => {
            WatchError::RootMissing(root.to_path_buf())
        }
        ErrorKind::PermissionDenied => WatchError::PermissionDenied(root.to_path_buf()),
        _ => WatchError::Io {
            path: root.to_path_buf(),
            source: e,
        },
    }
}

/// Lists regular files directly inside `root`. Subdirectories are skipped;
/// entries that vanish between listing and stat are skipped too.
pub fn snapshot(root: &Path) -> Result<DirectorySnapshot, WatchError> {
    let taken_at = Instant::now();
    let mut entries = BTreeMap::new();
    for entry in std::fs::read_dir(root).map_err(|e| scan_error(root, e))? {
        let entry = entry.map_err(|e| scan_error(root, e))?;
        let meta = match std::fs::metadata(entry.path()) {
            Ok(m) => m,
            Err(e) if e.kind() == ErrorKind::NotFound => continue,
            Err(e) => return Err(scan_error(root, e)),
        };
        if !meta.is_file() {
            continue;
        }
        entries.insert(
            PathBuf::from(entry.file_name()),
            EntryMeta {
                size: meta.len(),
                modified: meta.modified().ok(),
            },
        );
    }
    Ok(DirectorySnapshot { taken_at, entries })
}

/// Paths present in `cur` and absent from `prev`, in lexicographic order.
pub fn diff_new(prev: &DirectorySnapshot, cur: &DirectorySnapshot) -> Vec<PathBuf> {
    cur.entries
        .keys()
        .filter(|p| !prev.entries.contains_key(*p))
        .cloned()
        .collect()
}

/// Case-insensitive extension membership test.
pub fn is_valid_image(path: &Path, cfg: &WatchConfig) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| cfg.valid_extensions.contains(&e.to_lowercase()))
        .unwrap_or(false)
}

fn stat(path: &Path) -> Option<EntryMeta> {
    std::fs::metadata(path).ok().map(|m| EntryMeta {
        size: m.len(),
        modified: m.modified().ok(),
    })
}

/// Blocks until `path` has kept the same size and mtime for the stability
/// window. Returns false if the file disappears while waiting.
pub fn wait_stable(path: &Path, cfg: &WatchConfig) -> bool {
    let Some(mut last) = stat(path) else {
        return false;
    };
    if cfg.stability_window.is_zero() {
        return true;
    }
    let step =
        (cfg.stability_window / 4).clamp(Duration::from_millis(5), Duration::from_millis(100));
    let mut since = Instant::now();
    loop {
        std::thread::sleep(step);
        let Some(now) = stat(path) else {
            return false;
        };
        if now != last {
            last = now;
            since = Instant::now();
        } else if since.elapsed() >= cfg.stability_window {
            return true;
        }
    }
}

#[derive(Debug)]
struct Pending {
    meta: EntryMeta,
    since: Instant,
}

/// Stateful poller: owns the previous snapshot and the set of detected files
/// still waiting to settle.
#[derive(Debug)]
pub struct DirectoryWatcher {
    cfg: WatchConfig,
    prev: DirectorySnapshot,
    pending: HashMap<PathBuf, Pending>,
}

impl DirectoryWatcher {
    /// Starts from an empty baseline, so files already present in the root are
    /// reported by the first poll.
    pub fn new(cfg: WatchConfig) -> Self {
        Self {
            cfg,
            prev: DirectorySnapshot::empty(),
            pending: HashMap::new(),
        }
    }

    /// Starts from the current directory contents; only later arrivals are
    /// reported.
    pub fn starting_now(cfg: WatchConfig) -> Result<Self, WatchError> {
        let prev = snapshot(&cfg.root)?;
        Ok(Self {
            cfg,
            prev,
            pending: HashMap::new(),
        })
    }

    pub fn config(&self) -> &WatchConfig {
        &self.cfg
    }

    /// Takes a snapshot, registers newly arrived files and returns (absolute
    /// paths of) the pending files that have settled, sorted.
    pub fn poll(&mut self) -> Result<Vec<PathBuf>, WatchError> {
        let cur = snapshot(&self.cfg.root)?;
        let now = cur.taken_at;
        for rel in diff_new(&self.prev, &cur) {
            let meta = cur.entries[&rel];
            self.pending.insert(rel, Pending { meta, since: now });
        }

        let mut ready = Vec::new();
        self.pending.retain(|rel, p| match cur.entries.get(rel) {
            None => false,
            Some(meta) if *meta != p.meta => {
                p.meta = *meta;
                p.since = now;
                true
            }
            Some(_) if now.duration_since(p.since) >= self.cfg.stability_window => {
                ready.push(rel.clone());
                false
            }
            Some(_) => true,
        });
        self.prev = cur;
        ready.sort();
        Ok(ready
            .into_iter()
            .map(|rel| self.cfg.root.join(rel))
            .collect())
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn snap(names: &[&str]) -> DirectorySnapshot {
        DirectorySnapshot::from_entries(
            Instant::now(),
            names.iter().map(|n| {
                (
                    PathBuf::from(n),
                    EntryMeta {
                        size: 1,
                        modified: None,
                    },
                )
            }),
        )
    }

    fn paths(names: &[&str]) -> Vec<PathBuf> {
        names.iter().map(PathBuf::from).collect()
    }

    #[test]
    fn set_difference() {
        assert!(diff_new(&snap(&["a"]), &snap(&["a"])).is_empty());
        assert_eq!(diff_new(&snap(&["a"]), &snap(&["a", "b"])), paths(&["b"]));
        assert_eq!(
            diff_new(&snap(&["a", "b"]), &snap(&["b", "c", "d"])),
            paths(&["c", "d"])
        );
    }

    #[test]
    fn snapshot_lists_regular_files_only() {
        let dir = tempfile::tempdir().unwrap();
        assert!(snapshot(dir.path()).unwrap().is_empty());
        std::fs::write(dir.path().join("a.png"), b"x").unwrap();
        std::fs::write(dir.path().join("b.txt"), b"yy").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        let s = snapshot(dir.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.entries[Path::new("b.txt")].size, 2);
    }

    #[test]
    fn snapshot_of_deleted_root() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("gone");
        std::fs::create_dir(&root).unwrap();
        std::fs::remove_dir(&root).unwrap();
        assert!(matches!(snapshot(&root), Err(WatchError::RootMissing(_))));
    }

    #[test]
    fn image_extensions() {
        let cfg = WatchConfig::new("/tmp");
        assert!(is_valid_image(Path::new("doc1.PNG"), &cfg));
        assert!(is_valid_image(Path::new("scan.jpeg"), &cfg));
        assert!(!is_valid_image(Path::new("notes.txt"), &cfg));
        assert!(!is_valid_image(Path::new("archive"), &cfg));
        assert!(!is_valid_image(Path::new("x.png.gt.json"), &cfg));
    }

    #[test]
    fn config_validation() {
        let mut cfg = WatchConfig::new("/tmp");
        assert!(cfg.validate().is_ok());
        cfg.poll_interval = Duration::ZERO;
        assert!(cfg.validate().is_err());
        let mut cfg = WatchConfig::new("/tmp");
        cfg.valid_extensions.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stable_immediately_with_zero_window() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        std::fs::write(&p, b"done").unwrap();
        let mut cfg = WatchConfig::new(dir.path());
        cfg.stability_window = Duration::ZERO;
        assert!(wait_stable(&p, &cfg));
        assert!(!wait_stable(&dir.path().join("missing.png"), &cfg));
    }

    #[test]
    fn waits_for_growing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grow.png");
        let mut f = std::fs::File::create(&p).unwrap();
        let writer_path = p.clone();
        let writer = std::thread::spawn(move || {
            for _ in 0..8 {
                f.write_all(&[0u8; 64]).unwrap();
                f.flush().unwrap();
                std::thread::sleep(Duration::from_millis(25));
            }
            std::fs::metadata(&writer_path).unwrap().len()
        });
        let mut cfg = WatchConfig::new(dir.path());
        cfg.stability_window = Duration::from_millis(80);
        let started = Instant::now();
        assert!(wait_stable(&p, &cfg));
        let final_len = writer.join().unwrap();
        // the writer ran for ~200 ms, so stability cannot be declared before it stops
        assert!(started.elapsed() >= Duration::from_millis(150));
        assert_eq!(std::fs::metadata(&p).unwrap().len(), final_len);
    }

    #[test]
    fn deleted_mid_wait() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tmp.png");
        std::fs::write(&p, b"x").unwrap();
        let victim = p.clone();
        let deleter = std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(30));
            std::fs::remove_file(victim).unwrap();
        });
        let mut cfg = WatchConfig::new(dir.path());
        cfg.stability_window = Duration::from_secs(5);
        assert!(!wait_stable(&p, &cfg));
        deleter.join().unwrap();
    }

    #[test]
    fn watcher_reports_each_settled_file_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = WatchConfig::new(dir.path());
        cfg.stability_window = Duration::ZERO;
        std::fs::write(dir.path().join("pre.png"), b"1").unwrap();
        let mut w = DirectoryWatcher::new(cfg);
        assert_eq!(w.poll().unwrap(), vec![dir.path().join("pre.png")]);
        assert!(w.poll().unwrap().is_empty());
        std::fs::write(dir.path().join("b.png"), b"2").unwrap();
        std::fs::write(dir.path().join("a.txt"), b"3").unwrap();
        assert_eq!(
            w.poll().unwrap(),
            vec![dir.path().join("a.txt"), dir.path().join("b.png")]
        );
        assert!(w.poll().unwrap().is_empty());
    }

    #[test]
    fn watcher_holds_unsettled_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = WatchConfig::new(dir.path());
        cfg.stability_window = Duration::from_millis(60);
        let mut w = DirectoryWatcher::starting_now(cfg).unwrap();
        std::fs::write(dir.path().join("a.png"), b"1").unwrap();
        assert!(w.poll().unwrap().is_empty());
        assert_eq!(w.pending_count(), 1);
        std::thread::sleep(Duration::from_millis(80));
        assert_eq!(w.poll().unwrap(), vec![dir.path().join("a.png")]);
        assert_eq!(w.pending_count(), 0);
    }
}
