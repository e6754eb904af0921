//! Staged output files, committed only after a command has fully succeeded.

use std::io::Write;
use std::path::{Path, PathBuf};

use osteoplan::schema::ManifestEntry;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    /// Manifest entries for every staged file, paths relative to `root`.
    pub fn manifest(&self, root: &Path) -> Vec<ManifestEntry> {
        let mut out: Vec<ManifestEntry> = self
            .files
            .iter()
            .map(|(p, bytes)| ManifestEntry {
                path: p
                    .strip_prefix(root)
                    .unwrap_or(p)
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/"),
                sha256: Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect(),
            })
            .collect();
        out.sort_by(|a, b| a.path.cmp(&b.path));
        out
    }

    /// Writes each file through a temporary sibling and a rename.
    pub fn commit(self) -> Result<usize, Failure> {
        let n = self.files.len();
        for (path, bytes) in self.files {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            std::fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Failure::io(&dir, e))?;
            tmp.write_all(&bytes).map_err(|e| Failure::io(&path, e))?;
            tmp.persist(&path).map_err(|e| Failure::io(&path, e.error))?;
        }
        Ok(n)
    }
}
