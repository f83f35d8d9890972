//! Gazetteer ingestion and root-name extraction.
//!
//! A place name like "Little Bourke Street" carries a prefix ("Little") and a
//! feature type ("Street") around the name that actually commemorates
//! something ("Bourke"). This module strips those down to the root name and
//! renders the anchor question that carries the place name plus its city and
//! country spatial filters.

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default leading qualifiers stripped from place names.
pub const DEFAULT_PREFIXES: &[&str] = &["Little", "Upper", "Lower", "Old", "New"];

/// Default street/feature types stripped from place names, used when the
/// gazetteer has no type column of its own.
pub const DEFAULT_STREET_TYPES: &[&str] = &[
    "Street", "Road", "Lane", "Alley", "Place", "Walk", "Court", "Avenue", "Way", "Parade",
    "Square", "Terrace",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginKind {
    NamedPerson,
    UnnamedPerson,
    NonPerson,
    Unknown,
}

impl OriginKind {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "named_person" => Some(OriginKind::NamedPerson),
            "unnamed_person" => Some(OriginKind::UnnamedPerson),
            "non_person" => Some(OriginKind::NonPerson),
            "unknown" | "" => Some(OriginKind::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toponym {
    pub raw_name: String,
    pub root_name: String,
    pub feature_type: String,
    pub city: String,
    pub state: String,
    pub country: String,
}

impl Toponym {
    /// Stable identifier for this toponym, independent of gazetteer row
    /// order: a readable slug plus a short content hash so homonyms in
    /// different cities stay distinct.
    pub fn entry_key(&self) -> String {
        let mut hasher = Sha256::new();
        for field in [
            &self.raw_name,
            &self.feature_type,
            &self.city,
            &self.state,
            &self.country,
        ] {
            hasher.update(field.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(8);
        for b in &digest[..4] {
            hex.push_str(&format!("{b:02x}"));
        }
        format!("{}-{hex}", slugify(&self.raw_name))
    }
}

fn slugify(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut last_dash = true;
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            last_dash = false;
        } else if !last_dash {
            out.push('-');
            last_dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push('x');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub toponym: Toponym,
    pub origin_text: Option<String>,
    pub origin_kind: OriginKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorQuestion {
    pub text: String,
    pub toponym_ref: String,
}

/// Vocabulary used by [`extract_root`]; both lists are matched
/// case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootNameConfig {
    pub prefixes: Vec<String>,
    pub street_types: Vec<String>,
}

impl Default for RootNameConfig {
    fn default() -> Self {
        RootNameConfig {
            prefixes: DEFAULT_PREFIXES.iter().map(|s| s.to_string()).collect(),
            street_types: DEFAULT_STREET_TYPES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Strip leading/trailing vocabulary tokens from a place name, returning the
/// contiguous root with its original casing.
///
/// Tokens from either list are removed from both ends until a fixed point, so
/// the operation is idempotent and handles both "Little Bourke Street"
/// (prefix + trailing type) and "Avenue Simone Veil" (leading type). Interior
/// tokens are never removed: the root stays a contiguous slice of the input.
pub fn extract_root(raw_name: &str, prefixes: &[String], street_types: &[String]) -> Result<String> {
    let lower = |s: &str| s.to_lowercase();
    let strip_set: BTreeSet<String> = prefixes
        .iter()
        .chain(street_types.iter())
        .map(|s| lower(s))
        .collect();

    let tokens: Vec<&str> = raw_name.split_whitespace().collect();
    let mut start = 0usize;
    let mut end = tokens.len();
    loop {
        let before = (start, end);
        while start < end && strip_set.contains(&lower(tokens[start])) {
            start += 1;
        }
        while end > start && strip_set.contains(&lower(tokens[end - 1])) {
            end -= 1;
        }
        if (start, end) == before {
            break;
        }
    }
    if start >= end {
        return Err(Error::EmptyRoot { raw: raw_name.to_string() });
    }
    Ok(tokens[start..end].join(" "))
}

/// Render the anchor question for a toponym: the raw place name plus the fine
/// (city) and coarse (country) spatial filters, with the non-person fallback
/// clause always appended.
pub fn build_anchor_question(t: &Toponym) -> Result<AnchorQuestion> {
    if t.city.trim().is_empty() || t.country.trim().is_empty() {
        return Err(Error::MissingContext { raw: t.raw_name.clone() });
    }
    let text = format!(
        "Who is {} most likely named after, in {}, {}? If it is not a person, find any other origin.",
        t.raw_name, t.city, t.country
    );
    Ok(AnchorQuestion { text, toponym_ref: t.entry_key() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }
}

const GAZETTEER_COLUMNS: [&str; 7] =
    ["name", "type", "city", "state", "country", "origin_text", "origin_kind"];

/// Load a gazetteer table. Columns are located by header name; extra columns
/// are ignored and row order is preserved. Each row's own type value is added
/// to the street-type vocabulary for that row's root extraction, so a
/// gazetteer using types outside the default list still strips them.
pub fn load_gazetteer<R: Read>(
    source: R,
    format: TableFormat,
    root_cfg: &RootNameConfig,
) -> Result<Vec<GazetteerEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .flexible(false)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow { row: 0, reason: e.to_string() })?
        .clone();
    let mut col = [usize::MAX; 7];
    for (want_idx, want) in GAZETTEER_COLUMNS.iter().enumerate() {
        match headers.iter().position(|h| h.trim().eq_ignore_ascii_case(want)) {
            Some(i) => col[want_idx] = i,
            None => {
                return Err(Error::MalformedRow {
                    row: 0,
                    reason: format!("header is missing required column {want:?}"),
                })
            }
        }
    }

    let mut entries = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        let field = |i: usize| record.get(col[i]).unwrap_or("").trim().to_string();

        let raw_name = field(0);
        if raw_name.is_empty() {
            return Err(Error::MalformedRow { row, reason: "empty name".into() });
        }
        let feature_type = field(1);

        let mut street_types = root_cfg.street_types.clone();
        if !feature_type.is_empty() && !street_types.iter().any(|t| t.eq_ignore_ascii_case(&feature_type)) {
            street_types.push(feature_type.clone());
        }
        let root_name = extract_root(&raw_name, &root_cfg.prefixes, &street_types)?;

        let origin_text_raw = field(5);
        let origin_text = if origin_text_raw.is_empty() { None } else { Some(origin_text_raw) };
        let kind_raw = field(6);
        let parsed_kind = OriginKind::parse(&kind_raw).ok_or_else(|| Error::MalformedRow {
            row,
            reason: format!("unrecognized origin_kind {kind_raw:?}"),
        })?;
        // An origin kind only makes sense when an origin is recorded.
        let origin_kind = if origin_text.is_none() { OriginKind::Unknown } else { parsed_kind };

        entries.push(GazetteerEntry {
            toponym: Toponym {
                raw_name,
                root_name,
                feature_type,
                city: field(2),
                state: field(3),
                country: field(4),
            },
            origin_text,
            origin_kind,
        });
    }
    Ok(entries)
}
