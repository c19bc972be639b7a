//! The shipped program corpus: `.src` files with optional `.io.jsonl`
//! input scripts next to them.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::runtime::IoScript;

#[derive(Debug, Clone)]
pub struct Entry {
    pub name: String,
    pub source: String,
    pub script: IoScript,
}

/// Directory of the hand-written programs in this source tree.
pub fn programs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/programs")
}

/// The compute-only benchmark program.
pub fn compute_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/compute.src")
}

/// The transcribed example program from the original KRL listing.
pub fn example_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/example.src")
}

/// Load every program in `dir`, sorted by name.
pub fn load(dir: &Path) -> io::Result<Vec<Entry>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "src"));
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let source = fs::read_to_string(&p)?;
            let io_path = p.with_extension("io.jsonl");
            let script = if io_path.exists() {
                IoScript::parse_jsonl(&fs::read_to_string(&io_path)?)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", io_path.display())))?
            } else {
                IoScript::default()
            };
            Ok(Entry { name, source, script })
        })
        .collect()
}
