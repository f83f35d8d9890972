//! On-disk snapshot cache: one RDF/XML file plus one metadata sidecar per
//! root name, with checksums so silent corruption is detected rather than
//! propagated.
//!
//! A cache miss is not an error — `load` returns `Ok(None)` so callers can
//! fall through to the live endpoint. A present-but-unreadable entry is an
//! error (`CorruptSnapshot`): falling through silently would mask disk
//! problems and make runs non-reproducible.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::rdfxml::{self, PrefixMap};
use crate::search::KGSnapshot;
use crate::util::{atomic_write, encode_filename, sha256_hex};

/// Sidecar metadata stored next to each snapshot document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub root_name: String,
    pub subject_count: usize,
    pub retrieved_at: DateTime<Utc>,
    pub endpoint: String,
    pub truncated: bool,
    /// Hex SHA-256 of the RDF/XML document bytes.
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct SnapshotCache {
    dir: PathBuf,
    prefixes: PrefixMap,
}

impl SnapshotCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SnapshotCache { dir: dir.into(), prefixes: PrefixMap::with_defaults() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn document_path(&self, root_name: &str) -> PathBuf {
        self.dir.join(format!("{}.rdf", encode_filename(root_name)))
    }

    pub fn meta_path(&self, root_name: &str) -> PathBuf {
        self.dir.join(format!("{}.meta.json", encode_filename(root_name)))
    }

    /// Serialize and store a snapshot. Both files are written atomically;
    /// the metadata (with checksum) is written after the document so a
    /// valid sidecar always refers to a fully written document.
    pub fn store(&self, snapshot: &KGSnapshot) -> Result<PathBuf> {
        let doc = rdfxml::compact_and_serialize(&snapshot.triples, &self.prefixes)?;
        let doc_path = self.document_path(&snapshot.root_name);
        atomic_write(&doc_path, doc.as_bytes())?;
        let meta = SnapshotMeta {
            root_name: snapshot.root_name.clone(),
            subject_count: snapshot.subject_count,
            retrieved_at: snapshot.retrieved_at,
            endpoint: snapshot.endpoint.clone(),
            truncated: snapshot.truncated,
            sha256: sha256_hex(doc.as_bytes()),
        };
        let meta_json = serde_json::to_vec_pretty(&meta)?;
        atomic_write(&self.meta_path(&snapshot.root_name), &meta_json)?;
        Ok(doc_path)
    }

    /// Load a cached snapshot. `Ok(None)` when either file is absent;
    /// `CorruptSnapshot` when present but unreadable, mismatched, or
    /// failing its checksum.
    pub fn load(&self, root_name: &str) -> Result<Option<KGSnapshot>> {
        let doc_path = self.document_path(root_name);
        let meta_path = self.meta_path(root_name);
        if !doc_path.exists() || !meta_path.exists() {
            return Ok(None);
        }
        let corrupt = |reason: String| Error::CorruptSnapshot {
            name: root_name.to_string(),
            reason,
        };
        let meta_bytes =
            std::fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: SnapshotMeta = serde_json::from_slice(&meta_bytes)
            .map_err(|e| corrupt(format!("metadata is not valid JSON: {e}")))?;
        if meta.root_name != root_name {
            return Err(corrupt(format!(
                "metadata names {:?}, expected {:?}",
                meta.root_name, root_name
            )));
        }
        let doc_bytes =
            std::fs::read(&doc_path).map_err(|e| Error::io(&doc_path, e))?;
        let digest = sha256_hex(&doc_bytes);
        if digest != meta.sha256 {
            return Err(corrupt(format!(
                "checksum mismatch: document {digest}, metadata {}",
                meta.sha256
            )));
        }
        let doc = String::from_utf8(doc_bytes)
            .map_err(|e| corrupt(format!("document is not UTF-8: {e}")))?;
        let triples =
            rdfxml::parse(&doc).map_err(|e| corrupt(format!("document failed to parse: {e}")))?;
        Ok(Some(KGSnapshot {
            root_name: meta.root_name,
            triples,
            subject_count: meta.subject_count,
            retrieved_at: meta.retrieved_at,
            endpoint: meta.endpoint,
            truncated: meta.truncated,
        }))
    }

    /// Root names with complete cache entries, in sorted order.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut names = Vec::new();
        let entries = match std::fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(ref e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(names),
            Err(e) => return Err(Error::io(&self.dir, e)),
        };
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.dir, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if let Some(stem) = name.strip_suffix(".meta.json") {
                if let Some(decoded) = decode_filename(stem) {
                    if self.document_path(&decoded).exists() {
                        names.push(decoded);
                    }
                }
            }
        }
        names.sort_unstable();
        Ok(names)
    }
}

/// Inverse of `encode_filename`; `None` on malformed escapes.
fn decode_filename(encoded: &str) -> Option<String> {
    let bytes = encoded.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = encoded.get(i + 1..i + 3)?;
            let value = u8::from_str_radix(hex, 16).ok()?;
            out.push(value);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}
