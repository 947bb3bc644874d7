//! Versioned JSON files for policy tables and skill libraries.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Error;

const FORMAT: &str = "skillforge";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

/// Serialize `value` wrapped with a format tag, version and `kind` label.
pub fn to_json<T: Serialize>(kind: &str, value: &T) -> Result<String, Error> {
    let env = Envelope {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: kind.to_string(),
        payload: value,
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn from_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T, Error> {
    let env: Envelope<T> = serde_json::from_str(text)?;
    if env.format != FORMAT || env.version != VERSION {
        return Err(Error::Invalid(format!("unsupported checkpoint {} v{}", env.format, env.version)));
    }
    if env.kind != kind {
        return Err(Error::Invalid(format!("expected a `{kind}` checkpoint, found `{}`", env.kind)));
    }
    Ok(env.payload)
}

pub fn save<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<(), Error> {
    crate::write_atomic(path, to_json(kind, value)?.as_bytes())
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, Error> {
    from_json(kind, &crate::read(path)?)
}
