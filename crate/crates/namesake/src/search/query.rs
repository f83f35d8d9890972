//! Relation whitelist and SPARQL query construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whitelist of predicate families retained by the searcher, as a mapping
/// from a short key ("abstract", "country", ...) to the fully-qualified
/// predicate URIs it covers. The key set is fixed by the experiment design;
/// the URI lists are configuration, not code — the defaults below document
/// our choices and can be overridden from a TOML table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationFilter {
    map: BTreeMap<String, Vec<String>>,
}

const DBO: &str = "http://dbpedia.org/ontology/";
const DBP: &str = "http://dbpedia.org/property/";
const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
const WGS84: &str = "http://www.w3.org/2003/01/geo/wgs84_pos#";

impl RelationFilter {
    /// The default relation set: abstract, children, comment, country, date,
    /// geo, label, location, occupation, parent, place, spouse.
    pub fn default_f_rel() -> Self {
        let mut map = BTreeMap::new();
        let mut add = |key: &str, uris: &[String]| {
            map.insert(key.to_string(), uris.to_vec());
        };
        add("abstract", &[format!("{DBO}abstract")]);
        add("children", &[format!("{DBO}child"), format!("{DBP}children")]);
        add("comment", &[format!("{RDFS}comment")]);
        add("country", &[format!("{DBO}country"), format!("{DBP}country")]);
        add(
            "date",
            &[
                format!("{DBO}birthDate"),
                format!("{DBO}deathDate"),
                format!("{DBO}date"),
                format!("{DBP}date"),
            ],
        );
        add("geo", &[format!("{WGS84}lat"), format!("{WGS84}long")]);
        add("label", &[format!("{RDFS}label")]);
        add("location", &[format!("{DBO}location"), format!("{DBP}location")]);
        add("occupation", &[format!("{DBO}occupation"), format!("{DBP}occupation")]);
        add("parent", &[format!("{DBO}parent"), format!("{DBP}parents")]);
        add(
            "place",
            &[
                format!("{DBO}birthPlace"),
                format!("{DBO}deathPlace"),
                format!("{DBO}place"),
                format!("{DBP}place"),
            ],
        );
        add("spouse", &[format!("{DBO}spouse"), format!("{DBP}spouse")]);
        RelationFilter { map }
    }

    /// Build from an explicit key -> URI-list table, validating that every
    /// key maps to at least one URI.
    pub fn from_map(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        for (key, uris) in &map {
            if uris.is_empty() {
                return Err(Error::Config(format!(
                    "relation key {key:?} maps to no predicate URIs"
                )));
            }
        }
        Ok(RelationFilter { map })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn uris_for_key(&self, key: &str) -> Vec<&str> {
        self.map.get(key).map(|v| v.iter().map(String::as_str).collect()).unwrap_or_default()
    }

    /// All predicate URIs, sorted and deduplicated.
    pub fn predicate_uris(&self) -> Vec<&str> {
        let mut uris: Vec<&str> =
            self.map.values().flat_map(|v| v.iter().map(String::as_str)).collect();
        uris.sort_unstable();
        uris.dedup();
        uris
    }

    /// The relation key a predicate URI belongs to, if any.
    pub fn key_for(&self, uri: &str) -> Option<&str> {
        self.map
            .iter()
            .find(|(_, uris)| uris.iter().any(|u| u == uri))
            .map(|(k, _)| k.as_str())
    }
}

/// Escape a string for inclusion in a SPARQL double-quoted literal.
fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out
}

/// Build the snapshot-extraction query for one root name.
///
/// Subjects qualify by case-insensitive containment of the root name in
/// either the subject URI or an rdfs label; at most `max_subjects` subjects
/// are taken (sorted, so the cut is deterministic). All triples of those
/// subjects with a whitelisted predicate and an English-or-untagged object
/// are selected, up to `k_searcher` rows in canonical order.
pub fn build_sparql(
    root_name: &str,
    f: &RelationFilter,
    k_searcher: usize,
    max_subjects: usize,
) -> Result<String> {
    let root = root_name.trim();
    if root.is_empty() {
        return Err(Error::EmptyName);
    }
    if k_searcher == 0 || max_subjects == 0 {
        return Err(Error::Config("k_searcher and max_subjects must be positive".into()));
    }
    let needle = escape_literal(&root.to_lowercase());
    let values = f
        .predicate_uris()
        .iter()
        .map(|u| format!("<{u}>"))
        .collect::<Vec<_>>()
        .join(" ");

    Ok(format!(
        "PREFIX rdfs: <{RDFS}>\n\
         SELECT ?s ?p ?o WHERE {{\n\
         {{\n\
         SELECT DISTINCT ?s WHERE {{\n\
         {{ ?s ?anyp ?anyo . FILTER(CONTAINS(LCASE(STR(?s)), \"{needle}\")) }}\n\
         UNION\n\
         {{ ?s rdfs:label ?lab . FILTER(CONTAINS(LCASE(STR(?lab)), \"{needle}\")) }}\n\
         }}\n\
         ORDER BY ?s\n\
         LIMIT {max_subjects}\n\
         }}\n\
         ?s ?p ?o .\n\
         VALUES ?p {{ {values} }}\n\
         FILTER(!isLiteral(?o) || LANG(?o) = \"\" || LANGMATCHES(LANG(?o), \"en\"))\n\
         }}\n\
         ORDER BY ?s ?p ?o\n\
         LIMIT {k_searcher}"
    ))
}

/// Build a query for the retained triples of one already-known subject:
/// whitelisted predicates, English-or-untagged objects, canonical order.
pub fn build_subject_sparql(subject: &str, f: &RelationFilter, limit: usize) -> Result<String> {
    let subject = subject.trim();
    if subject.is_empty() {
        return Err(Error::EmptyName);
    }
    if subject.chars().any(|c| c == '<' || c == '>' || c == '"' || c.is_whitespace()) {
        return Err(Error::Config(format!(
            "subject {subject:?} cannot be written as a SPARQL IRI"
        )));
    }
    if limit == 0 {
        return Err(Error::Config("limit must be positive".into()));
    }
    let values = f
        .predicate_uris()
        .iter()
        .map(|u| format!("<{u}>"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(format!(
        "SELECT ?s ?p ?o WHERE {{\n\
         VALUES ?s {{ <{subject}> }}\n\
         ?s ?p ?o .\n\
         VALUES ?p {{ {values} }}\n\
         FILTER(!isLiteral(?o) || LANG(?o) = \"\" || LANGMATCHES(LANG(?o), \"en\"))\n\
         }}\n\
         ORDER BY ?s ?p ?o\n\
         LIMIT {limit}"
    ))
}
