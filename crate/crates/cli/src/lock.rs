//! Advisory lock guarding state directories against concurrent writers.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

const LOCK_FILE: &str = "cascade.lock";

/// Held for the lifetime of a mutating command; removed on drop.
#[derive(Debug)]
pub struct StateLock {
    path: PathBuf,
}

impl StateLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                // best effort: the pid only helps a human clear a stale lock
                let _ = writeln!(file, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(CliError::contract(
                "locked",
                format!(
                    "state is locked by another command; remove {} if no command is running",
                    path.display()
                ),
            )),
            Err(e) if e.kind() == ErrorKind::NotFound => Err(CliError::contract(
                "no_state",
                format!("no built state at {}; run build first", dir.display()),
            )),
            Err(e) => Err(CliError::Core(cascade_core::Error::Io { path, source: e })),
        }
    }
}

impl Drop for StateLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
