//! The searcher: constrained SPARQL extraction of per-name knowledge-graph
//! snapshots.
//!
//! For a root name, [`query::build_sparql`] produces a query that selects
//! triples whose subject contains the name (in its URI or its label), whose
//! predicate belongs to the configured relation whitelist, and whose object
//! is English or untagged, bounded by a subject sub-limit and an overall
//! triple limit. [`SearchClient`] executes it with retries and rate
//! limiting, re-verifies the predicate and language constraints client-side,
//! and produces a canonical, deterministic [`KGSnapshot`]. Snapshots are
//! serialized as prefix-compacted RDF/XML ([`rdfxml`]) and cached on disk
//! ([`cache`]).

pub mod cache;
pub mod query;
pub mod rdfxml;

use std::cmp::Ordering;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use query::RelationFilter;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Object {
    Uri { value: String },
    Literal {
        value: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        lang: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        datatype: Option<String>,
    },
}

impl Object {
    pub fn lang(&self) -> Option<&str> {
        match self {
            Object::Literal { lang, .. } => lang.as_deref(),
            Object::Uri { .. } => None,
        }
    }

    fn sort_key(&self) -> (u8, &str, &str, &str) {
        match self {
            Object::Uri { value } => (0, value.as_str(), "", ""),
            Object::Literal { value, lang, datatype } => (
                1,
                value.as_str(),
                lang.as_deref().unwrap_or(""),
                datatype.as_deref().unwrap_or(""),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Object,
}

impl Triple {
    pub fn uri(subject: &str, predicate: &str, object: &str) -> Self {
        Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: Object::Uri { value: object.into() },
        }
    }

    pub fn literal(subject: &str, predicate: &str, value: &str, lang: Option<&str>) -> Self {
        Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: Object::Literal {
                value: value.into(),
                lang: lang.map(str::to_string),
                datatype: None,
            },
        }
    }
}

/// Total canonical order: subjects, then predicates, then objects. Snapshot
/// serialization and chunking both rely on this order being fixed.
pub fn canonical_sort(triples: &mut [Triple]) {
    triples.sort_by(|a, b| {
        a.subject
            .cmp(&b.subject)
            .then_with(|| a.predicate.cmp(&b.predicate))
            .then_with(|| a.object.sort_key().cmp(&b.object.sort_key()))
    });
}

/// True when a literal language tag counts as English for the object-language
/// filter: untagged, `en`, or any `en-*` variant.
pub fn lang_is_english_or_untagged(lang: Option<&str>) -> bool {
    match lang {
        None => true,
        Some(tag) => {
            let tag = tag.to_ascii_lowercase();
            tag == "en" || tag.starts_with("en-")
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KGSnapshot {
    pub root_name: String,
    pub triples: Vec<Triple>,
    pub subject_count: usize,
    pub retrieved_at: DateTime<Utc>,
    pub endpoint: String,
    /// Set when the endpoint returned exactly the triple limit: the snapshot
    /// may be a prefix of the full result set.
    pub truncated: bool,
}

impl KGSnapshot {
    pub fn distinct_subjects(&self) -> Vec<&str> {
        let mut subjects: Vec<&str> = self.triples.iter().map(|t| t.subject.as_str()).collect();
        subjects.sort_unstable();
        subjects.dedup();
        subjects
    }
}

/// Check every snapshot triple against the three searcher constraints:
/// subject containment (URI or in-snapshot label), relation whitelist, and
/// object language. Returns the indices of non-conforming triples.
pub fn non_conforming_triples(snapshot: &KGSnapshot, f: &RelationFilter) -> Vec<usize> {
    let root = snapshot.root_name.to_lowercase();
    let label_uris = f.uris_for_key("label");
    let mut labeled_subjects: Vec<&str> = Vec::new();
    for t in &snapshot.triples {
        if label_uris.contains(&t.predicate.as_str()) {
            if let Object::Literal { value, .. } = &t.object {
                if value.to_lowercase().contains(&root) {
                    labeled_subjects.push(t.subject.as_str());
                }
            }
        }
    }
    labeled_subjects.sort_unstable();
    labeled_subjects.dedup();

    let mut bad = Vec::new();
    for (i, t) in snapshot.triples.iter().enumerate() {
        let subject_ok = t.subject.to_lowercase().contains(&root)
            || labeled_subjects.binary_search(&t.subject.as_str()).is_ok();
        let predicate_ok = f.key_for(&t.predicate).is_some();
        let lang_ok = lang_is_english_or_untagged(t.object.lang());
        if !(subject_ok && predicate_ok && lang_ok) {
            bad.push(i);
        }
    }
    bad
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    /// Minimum spacing between consecutive requests to the endpoint.
    pub rate_limit_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, initial_backoff_ms: 250, rate_limit_ms: 200 }
    }
}

/// SPARQL protocol client with retry, backoff, and endpoint rate limiting.
pub struct SearchClient {
    endpoint: String,
    policy: RetryPolicy,
    last_request: Mutex<Option<Instant>>,
    /// Fixed clock for reproducible artifacts; `None` uses the wall clock.
    pub fixed_time: Option<DateTime<Utc>>,
}

impl SearchClient {
    pub fn new(endpoint: impl Into<String>, policy: RetryPolicy) -> Self {
        SearchClient {
            endpoint: endpoint.into(),
            policy,
            last_request: Mutex::new(None),
            fixed_time: None,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn now(&self) -> DateTime<Utc> {
        self.fixed_time.unwrap_or_else(Utc::now)
    }

    fn wait_rate_limit(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(prev) = *last {
            let min_gap = Duration::from_millis(self.policy.rate_limit_ms);
            let elapsed = prev.elapsed();
            if elapsed < min_gap {
                std::thread::sleep(min_gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    /// Execute any SPARQL SELECT/ASK and return the raw JSON results
    /// document. Retries transport errors, 429 and 5xx responses per the
    /// policy.
    pub fn execute_select_raw(&self, sparql: &str) -> Result<serde_json::Value> {
        let mut attempt = 0u32;
        let mut backoff = Duration::from_millis(self.policy.initial_backoff_ms);
        loop {
            attempt += 1;
            self.wait_rate_limit();
            let outcome = ureq::post(&self.endpoint)
                .header("Accept", "application/sparql-results+json")
                .send_form([("query", sparql)]);
            match outcome {
                Ok(mut response) => {
                    return response
                        .body_mut()
                        .read_json()
                        .map_err(|e| Error::MalformedResponse(format!("sparql results: {e}")));
                }
                Err(e) => {
                    let retryable = match &e {
                        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
                        _ => true,
                    };
                    if retryable && attempt < self.policy.max_attempts {
                        std::thread::sleep(backoff);
                        backoff *= 2;
                        continue;
                    }
                    return Err(Error::Http(format!(
                        "endpoint {} failed after {attempt} attempt(s): {e}",
                        self.endpoint
                    )));
                }
            }
        }
    }

    /// Execute a `?s ?p ?o` SELECT and parse the results into triples; the
    /// object-language filter is re-applied client-side.
    pub fn execute_search(&self, sparql: &str) -> Result<Vec<Triple>> {
        let value = self.execute_select_raw(sparql)?;
        let mut triples = parse_sparql_json(&value)?;
        triples.retain(|t| lang_is_english_or_untagged(t.object.lang()));
        Ok(triples)
    }

    /// Full searcher pass for one root name: build the query, execute it,
    /// re-verify predicate membership client-side, and return the canonical
    /// snapshot.
    pub fn fetch_snapshot(
        &self,
        root_name: &str,
        f: &RelationFilter,
        k_searcher: usize,
        max_subjects: usize,
    ) -> Result<KGSnapshot> {
        let sparql = query::build_sparql(root_name, f, k_searcher, max_subjects)?;
        let raw = self.execute_search(&sparql)?;
        let truncated = raw.len() >= k_searcher;
        let mut triples: Vec<Triple> =
            raw.into_iter().filter(|t| f.key_for(&t.predicate).is_some()).collect();
        canonical_sort(&mut triples);
        triples.dedup();
        let subject_count = {
            let mut subjects: Vec<&str> = triples.iter().map(|t| t.subject.as_str()).collect();
            subjects.dedup();
            subjects.len()
        };
        Ok(KGSnapshot {
            root_name: root_name.to_string(),
            triples,
            subject_count,
            retrieved_at: self.now(),
            endpoint: self.endpoint.clone(),
            truncated,
        })
    }

    /// Retained triples for one known subject URI: whitelist predicates,
    /// English-or-untagged objects, canonical order.
    pub fn fetch_subject_triples(
        &self,
        subject: &str,
        f: &RelationFilter,
        limit: usize,
    ) -> Result<Vec<Triple>> {
        let sparql = query::build_subject_sparql(subject, f, limit)?;
        let raw = self.execute_search(&sparql)?;
        let mut triples: Vec<Triple> =
            raw.into_iter().filter(|t| f.key_for(&t.predicate).is_some()).collect();
        canonical_sort(&mut triples);
        triples.dedup();
        Ok(triples)
    }
}

/// Parse a SPARQL JSON results document with `?s ?p ?o` bindings.
pub fn parse_sparql_json(value: &serde_json::Value) -> Result<Vec<Triple>> {
    let bindings = value
        .pointer("/results/bindings")
        .and_then(|b| b.as_array())
        .ok_or_else(|| Error::MalformedResponse("missing results.bindings".into()))?;
    let mut triples = Vec::with_capacity(bindings.len());
    for b in bindings {
        let term = |name: &str| -> Result<&serde_json::Map<String, serde_json::Value>> {
            b.get(name)
                .and_then(|v| v.as_object())
                .ok_or_else(|| Error::MalformedResponse(format!("binding missing ?{name}")))
        };
        let text = |m: &serde_json::Map<String, serde_json::Value>| -> Result<String> {
            m.get("value")
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .ok_or_else(|| Error::MalformedResponse("term missing value".into()))
        };
        let s = term("s")?;
        let p = term("p")?;
        let o = term("o")?;
        let subject = text(s)?;
        let predicate = text(p)?;
        let kind = o.get("type").and_then(|v| v.as_str()).unwrap_or("");
        let object = match kind {
            "uri" => Object::Uri { value: text(o)? },
            "literal" | "typed-literal" => Object::Literal {
                value: text(o)?,
                lang: o.get("xml:lang").and_then(|v| v.as_str()).map(str::to_string),
                datatype: o.get("datatype").and_then(|v| v.as_str()).map(str::to_string),
            },
            "bnode" => Object::Uri { value: format!("_:{}", text(o)?) },
            other => {
                return Err(Error::MalformedResponse(format!("unknown term type {other:?}")))
            }
        };
        triples.push(Triple { subject, predicate, object });
    }
    Ok(triples)
}

/// Order snapshots by root name; handy for deterministic batch output.
pub fn sort_snapshots(snapshots: &mut [KGSnapshot]) {
    snapshots.sort_by(|a, b| match a.root_name.cmp(&b.root_name) {
        Ordering::Equal => a.endpoint.cmp(&b.endpoint),
        other => other,
    });
}
