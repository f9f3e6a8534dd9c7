use std::path::{Path, PathBuf};

use zk3col_core::store::{load_sessions, SessionRecord};

use crate::failure::{io, Failure};

/// `path` itself if it is a file, otherwise every `*.jsonl` in it and in
/// its `sessions/` subdirectory, sorted.
pub fn log_files(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(Failure::Data(format!("{}: no such file or directory", path.display())));
    }
    let mut files = Vec::new();
    for dir in [path.to_path_buf(), path.join("sessions")] {
        if !dir.is_dir() {
            continue;
        }
        for entry in std::fs::read_dir(&dir).map_err(|e| io(&dir, e))? {
            let p = entry.map_err(|e| io(&dir, e))?.path();
            if p.is_file() && p.extension().is_some_and(|x| x == "jsonl") {
                files.push(p);
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Every session stored under `path`; an empty set is an error.
pub fn load_records(path: &Path) -> Result<Vec<SessionRecord>, Failure> {
    let mut out = Vec::new();
    for f in log_files(path)? {
        let records = load_sessions(&f).map_err(|e| Failure::from(e).context(&f))?;
        out.extend(records.into_iter().filter(|r| r.created.is_some()));
    }
    if out.is_empty() {
        return Err(Failure::Data(format!("{}: no session logs found", path.display())));
    }
    Ok(out)
}
