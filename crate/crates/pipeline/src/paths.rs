//! File naming under an output prefix.

use std::path::{Path, PathBuf};

/// `prefix` with `suffix` appended to its file name: `out/run` + `.dsm.asc`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

pub const DSM: &str = ".dsm.asc";
pub const DTM: &str = ".dtm.asc";
pub const HEIGHTMAP: &str = ".heightmap.asc";
pub const BUILDINGS: &str = ".buildings.asc";
pub const SEGMENTS: &str = ".segments.asc";
pub const STATS: &str = ".segments.json";
pub const ENERGY: &str = ".energy.json";
pub const RGB: &str = ".rgb.png";
