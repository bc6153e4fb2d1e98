//! Content-addressed typing cache.
//!
//! The dependency analysis is policy-independent, so a typing is computed
//! once per program and reused across every policy it is checked against.
//! Cache keys are SHA-256 hashes of the canonical printed source: edits
//! that do not change the canonical AST (whitespace, comments) hit the
//! same entry. Each entry stores the canonical source alongside the
//! typing; a mismatch between the entry's recorded hash and its actual
//! content is reported as a stale cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use flowcheck_core::lang::{canonical_source, Chan, Command, Point, Var};
use flowcheck_core::typing::{DepEnv, TypingVar};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt cache entry: {0}")]
    Corrupt(#[from] serde_json::Error),
    #[error("no cached typing for hash {0}")]
    Miss(String),
    #[error("stale cache entry {path}: content hashes to {actual}, expected {expected}")]
    Stale {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("cache entry contains malformed typing variable `{0}`")]
    BadVar(String),
}

/// The source hash a program is cached under.
pub fn source_hash(program: &Command) -> String {
    let canonical = canonical_source(program);
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    hash: String,
    source: String,
    typing: BTreeMap<String, Vec<String>>,
}

fn entry_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("{hash}.json"))
}

fn encode_typing(typing: &DepEnv) -> BTreeMap<String, Vec<String>> {
    typing
        .iter()
        .map(|(var, deps)| {
            (
                var.to_string(),
                deps.iter().map(|d| d.to_string()).collect(),
            )
        })
        .collect()
}

fn decode_var(text: &str) -> Result<TypingVar, CacheError> {
    if text == "pc" {
        return Ok(TypingVar::Pc);
    }
    if let Some(chan) = text.strip_prefix('@') {
        if chan.is_empty() {
            return Err(CacheError::BadVar(text.to_string()));
        }
        return Ok(TypingVar::Channel(Chan::new(chan)));
    }
    if let Some((chan, point)) = text.split_once('@') {
        if chan.is_empty() || point.is_empty() {
            return Err(CacheError::BadVar(text.to_string()));
        }
        return Ok(TypingVar::ChanPoint(Chan::new(chan), Point::new(point)));
    }
    if text.is_empty() {
        return Err(CacheError::BadVar(text.to_string()));
    }
    Ok(TypingVar::Pv(Var::new(text)))
}

fn decode_typing(raw: &BTreeMap<String, Vec<String>>) -> Result<DepEnv, CacheError> {
    let mut bindings = Vec::new();
    for (var, deps) in raw {
        let var = decode_var(var)?;
        let deps = deps
            .iter()
            .map(|d| decode_var(d))
            .collect::<Result<_, _>>()?;
        bindings.push((var, deps));
    }
    Ok(DepEnv::from_bindings(bindings))
}

/// Persists a typing under the program's source hash, returning the hash.
pub fn cache_typing(dir: &Path, program: &Command, typing: &DepEnv) -> Result<String, CacheError> {
    std::fs::create_dir_all(dir)?;
    let hash = source_hash(program);
    let entry = CacheEntry {
        hash: hash.clone(),
        source: canonical_source(program),
        typing: encode_typing(typing),
    };
    let tmp = dir.join(format!(".{hash}.tmp"));
    std::fs::write(&tmp, serde_json::to_vec_pretty(&entry)?)?;
    std::fs::rename(&tmp, entry_path(dir, &hash))?;
    Ok(hash)
}

/// Loads the typing cached under `hash`, verifying the entry against its
/// own content.
pub fn load_typing(dir: &Path, hash: &str) -> Result<DepEnv, CacheError> {
    let path = entry_path(dir, hash);
    let text = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CacheError::Miss(hash.to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    let entry: CacheEntry = serde_json::from_str(&text)?;
    let digest = Sha256::digest(entry.source.as_bytes());
    let mut actual = String::with_capacity(64);
    for byte in digest {
        actual.push_str(&format!("{byte:02x}"));
    }
    if actual != hash || entry.hash != hash {
        return Err(CacheError::Stale {
            path,
            expected: hash.to_string(),
            actual,
        });
    }
    decode_typing(&entry.typing)
}

/// Loads the cached typing for a program or infers and caches it.
pub fn typing_for(dir: &Path, program: &Command) -> Result<DepEnv, CacheError> {
    let hash = source_hash(program);
    match load_typing(dir, &hash) {
        Ok(typing) => Ok(typing),
        Err(CacheError::Miss(_)) => {
            let typing = flowcheck_core::typing::infer(program);
            cache_typing(dir, program, &typing)?;
            Ok(typing)
        }
        Err(other) => Err(other),
    }
}
