//! File formats, LLM-backed skill generation and the command-line front end
//! for [`skillforge_core`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub mod checkpoint;
pub mod llmgen;
pub mod report;
pub mod suite;

pub use skillforge_core as core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    World(#[from] skillforge_core::world::WorldError),
    #[error(transparent)]
    Skill(#[from] skillforge_core::SkillError),
    #[error("{0}")]
    Invalid(String),
    #[error("the skill list is empty")]
    EmptySkillList,
    #[error("chat endpoint returned status {0}")]
    Endpoint(u16),
    #[error("chat transport: {0}")]
    Transport(String),
}

pub(crate) fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Write to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
