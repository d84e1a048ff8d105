//! Snapshot diffing and the stability-gated directory watcher.
//!
//! `cargo run --example watch_directory`

use std::fs;
use std::thread;
use std::time::Duration;

use erpa::watcher::{diff_new, is_valid_image, snapshot, DirectoryWatcher, WatchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let root = tmp.path();

    let before = snapshot(root)?;
    fs::write(root.join("a.png"), b"png")?;
    fs::write(root.join("notes.txt"), b"txt")?;
    let after = snapshot(root)?;
    println!("new since last snapshot: {:?}", diff_new(&before, &after));
    println!(
        "diff of a snapshot with itself: {:?}",
        diff_new(&after, &after)
    );

    let mut cfg = WatchConfig::new(root);
    cfg.stability_window = Duration::from_millis(100);
    for name in ["a.png", "notes.txt", "B.JPG"] {
        println!("{name}: image = {}", is_valid_image(&root.join(name), &cfg));
    }

    // Starts from an empty baseline, so files already present are reported.
    let mut watcher = DirectoryWatcher::new(cfg);
    println!("first poll:  {:?}", watcher.poll()?);
    thread::sleep(Duration::from_millis(150));
    println!("second poll: {:?}", watcher.poll()?);
    fs::write(root.join("c.bmp"), b"bmp")?;
    println!(
        "third poll:  {:?} (pending {})",
        watcher.poll()?,
        watcher.pending_count()
    );
    thread::sleep(Duration::from_millis(150));
    println!("fourth poll: {:?}", watcher.poll()?);
    Ok(())
}
