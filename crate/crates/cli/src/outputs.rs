use std::fs;
use std::path::{Path, PathBuf};

/// Files written by one command; removed again unless the command commits.
#[derive(Default)]
pub(crate) struct Outputs {
    written: Vec<PathBuf>,
    created_dir: Option<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Outputs {
        Outputs::default()
    }

    /// Creates `dir` if needed; a directory created here is removed on failure.
    pub fn dir(&mut self, dir: &Path) -> std::io::Result<()> {
        if !dir.exists() {
            fs::create_dir_all(dir)?;
            self.created_dir = Some(dir.to_path_buf());
        }
        Ok(())
    }

    pub fn track(&mut self, p: &Path) {
        self.written.push(p.to_path_buf());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if let Some(d) = &self.created_dir {
            let _ = fs::remove_dir(d);
        }
    }
}
