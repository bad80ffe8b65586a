use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use crate::Failure;

pub const LOCK_FILE: &str = ".rescast.lock";

/// Exclusive hold on an artifact directory, released on drop.
#[derive(Debug)]
pub struct ArtifactLock {
    path: PathBuf,
}

impl ArtifactLock {
    pub fn acquire(dir: &Path) -> Result<ArtifactLock, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::parse(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(ArtifactLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Failure::parse(format!(
                "{} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Failure::parse(format!("cannot lock {}: {e}", dir.display()))),
        }
    }
}

impl Drop for ArtifactLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
