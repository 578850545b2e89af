//! All-or-nothing output: files are staged in a hidden directory inside the
//! output directory and moved into place only when a command succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use crate::Command;

pub struct Staging {
    dir: PathBuf,
    out: PathBuf,
    created_out: bool,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path, command: Command) -> std::io::Result<Staging> {
        let created_out = !out.exists();
        fs::create_dir_all(out)?;
        let dir = out.join(format!(".staging-{}-{}", command.name(), std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Staging {
            dir,
            out: out.to_path_buf(),
            created_out,
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> std::io::Result<()> {
        fs::write(self.dir.join(name), contents)
    }

    /// Moves every staged entry into the output directory, replacing
    /// entries of the same name. Returns the final paths, sorted.
    pub fn commit(mut self) -> std::io::Result<Vec<PathBuf>> {
        let mut names: Vec<_> = fs::read_dir(&self.dir)?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<Result<_, _>>()?;
        names.sort();
        let mut moved = Vec::with_capacity(names.len());
        for name in names {
            let dest = self.out.join(&name);
            if dest.is_dir() {
                fs::remove_dir_all(&dest)?;
            }
            fs::rename(self.dir.join(&name), &dest)?;
            moved.push(dest);
        }
        fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(moved)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
            if self.created_out {
                let _ = fs::remove_dir(&self.out);
            }
        }
    }
}
