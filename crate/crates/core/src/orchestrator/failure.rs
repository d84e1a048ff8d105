use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::model::{content_hash_file, ContentHash};
use crate::ocr::ground_truth_path;

fn move_file(from: &Path, to: &Path) -> io::Result<()> {
    match fs::rename(from, to) {
        Ok(()) => Ok(()),
        // rename cannot cross filesystems
        Err(_) => {
            fs::copy(from, to)?;
            fs::remove_file(from)
        }
    }
}

/// Moves a failed file into `failure_dir`, keeping its name. On a name
/// collision the stem gets a `-<hash8>` suffix. A ground-truth companion file
/// travels with the image. On error the file stays where it was.
pub fn route_failure(
    path: &Path,
    hash: Option<&ContentHash>,
    failure_dir: &Path,
) -> io::Result<PathBuf> {
    fs::create_dir_all(failure_dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut dest = failure_dir.join(name);
    if dest.exists() {
        let hash = match hash {
            Some(h) => h.clone(),
            None => content_hash_file(path).map_err(|e| io::Error::other(e.to_string()))?,
        };
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let suffixed = match path.extension() {
            Some(ext) => format!("{stem}-{}.{}", hash.short(), ext.to_string_lossy()),
            None => format!("{stem}-{}", hash.short()),
        };
        dest = failure_dir.join(suffixed);
        if dest.exists() {
            return Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!("{} already exists", dest.display()),
            ));
        }
    }
    move_file(path, &dest)?;
    let gt = ground_truth_path(path);
    if gt.exists() {
        if let Err(e) = move_file(&gt, &ground_truth_path(&dest)) {
            log::warn!("could not move {}: {e}", gt.display());
        }
    }
    Ok(dest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::content_hash;

    #[test]
    fn collision_gets_hash_suffix() {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b, failed) = (
            tmp.path().join("a"),
            tmp.path().join("b"),
            tmp.path().join("failed"),
        );
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        fs::write(a.join("x.png"), "one").unwrap();
        fs::write(b.join("x.png"), "two").unwrap();
        assert_eq!(
            route_failure(&a.join("x.png"), None, &failed).unwrap(),
            failed.join("x.png")
        );
        let h = content_hash(b"two");
        let second = route_failure(&b.join("x.png"), Some(&h), &failed).unwrap();
        assert_eq!(second, failed.join(format!("x-{}.png", h.short())));
        assert_eq!(fs::read_to_string(second).unwrap(), "two");
        assert!(!b.join("x.png").exists());
    }

    #[test]
    fn unusable_failure_dir_leaves_file() {
        let tmp = tempfile::tempdir().unwrap();
        // a regular file where the directory should be, so creation fails even as root
        let failed = tmp.path().join("failed");
        fs::write(&failed, "").unwrap();
        let src = tmp.path().join("x.png");
        fs::write(&src, "x").unwrap();
        assert!(route_failure(&src, None, &failed).is_err());
        assert!(src.exists());
    }
}
