use std::io;
use std::path::{Path, PathBuf};

/// Regular files in `dir` with the given extension (case-insensitive),
/// sorted by name, plus the files that were passed over.
pub fn list_with_extension(dir: &Path, ext: &str) -> io::Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let mut hits = Vec::new();
    let mut skipped = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(ext));
        if matches {
            hits.push(path);
        } else {
            skipped.push(path);
        }
    }
    hits.sort();
    skipped.sort();
    Ok((hits, skipped))
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
