//! Question-over-knowledge-graph dataset synthesis from a QALD-style
//! benchmark file: each benchmark question carries a gold SPARQL query and
//! keywords; positives pair the question with the RDF/XML sub-graph of a
//! node the gold query returns, negatives with keyword-matching nodes the
//! gold query does not return.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::query::RelationFilter;
use crate::search::rdfxml::{compact_and_serialize, PrefixMap};
use crate::search::{SearchClient, Triple};

/// One benchmark question: natural-language text, gold SPARQL, keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qald9Question {
    pub id: String,
    pub question: String,
    pub sparql: String,
    pub keywords: Vec<String>,
}

/// One emitted record: the question paired with a node's RDF/XML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qald9Record {
    pub question_id: String,
    pub question: String,
    pub sparql: String,
    pub keywords: Vec<String>,
    /// The node whose sub-graph this document is.
    pub subject: String,
    pub kg_doc: String,
    pub label: crate::pairs::Label,
}

/// Synthesis counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qald9Stats {
    pub questions: usize,
    /// Questions contributing no positive record (empty or non-resource
    /// result set, or every result node had an empty retained sub-graph).
    pub skipped_empty: usize,
    pub positives: usize,
    pub negatives: usize,
}

/// Parse a QALD-style benchmark JSON document. Only English question
/// strings are used; keywords are comma-separated in the source. Questions
/// without an English string or without a SPARQL query are skipped.
pub fn parse_qald9(data: &str) -> Result<Vec<Qald9Question>> {
    let value: serde_json::Value = serde_json::from_str(data)?;
    let questions = value
        .get("questions")
        .and_then(|q| q.as_array())
        .ok_or_else(|| Error::MalformedResponse("benchmark file has no questions array".into()))?;
    let mut out = Vec::new();
    for q in questions {
        let id = match q.get("id") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => continue,
        };
        let Some(texts) = q.get("question").and_then(|t| t.as_array()) else { continue };
        let Some(en) = texts.iter().find(|t| {
            t.get("language").and_then(|l| l.as_str()) == Some("en")
        }) else {
            continue;
        };
        let Some(text) = en.get("string").and_then(|s| s.as_str()) else { continue };
        let keywords: Vec<String> = en
            .get("keywords")
            .and_then(|k| k.as_str())
            .map(|k| {
                k.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        let Some(sparql) = q.pointer("/query/sparql").and_then(|s| s.as_str()) else { continue };
        out.push(Qald9Question {
            id,
            question: text.to_string(),
            sparql: sparql.to_string(),
            keywords,
        });
    }
    Ok(out)
}

pub fn load_qald9(path: &Path) -> Result<Vec<Qald9Question>> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qald9(&data)
}

/// URIs bound to the first projected variable of a SELECT result document.
/// Literal bindings and ASK results yield nothing (they have no sub-graph
/// to extract).
pub fn select_result_uris(results: &serde_json::Value) -> Vec<String> {
    let Some(var) = results
        .pointer("/head/vars")
        .and_then(|v| v.as_array())
        .and_then(|v| v.first())
        .and_then(|v| v.as_str())
    else {
        return Vec::new();
    };
    let Some(bindings) = results.pointer("/results/bindings").and_then(|b| b.as_array()) else {
        return Vec::new();
    };
    let mut uris: Vec<String> = bindings
        .iter()
        .filter_map(|b| {
            let term = b.get(var)?;
            if term.get("type")?.as_str()? != "uri" {
                return None;
            }
            term.get("value")?.as_str().map(str::to_string)
        })
        .collect();
    uris.sort_unstable();
    uris.dedup();
    uris
}

/// Limits for the synthesis queries.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Qald9Limits {
    /// Row cap when fetching one node's retained triples.
    pub per_subject_limit: usize,
    /// Row cap for each keyword search.
    pub k_searcher: usize,
    /// Subject cap for each keyword search.
    pub max_subjects: usize,
}

impl Default for Qald9Limits {
    fn default() -> Self {
        Qald9Limits { per_subject_limit: 10_000, k_searcher: 10_000, max_subjects: 1_000 }
    }
}

fn doc_for(triples: &[Triple], pm: &PrefixMap) -> Result<Option<String>> {
    if triples.is_empty() {
        return Ok(None);
    }
    Ok(Some(compact_and_serialize(triples, pm)?))
}

/// Build the question/document records for every benchmark question.
///
/// Per question: run the gold SPARQL; every returned resource node with a
/// non-empty retained sub-graph becomes one positive record. Negatives are
/// the keyword-search subjects that are not in the gold result set, each
/// with its sub-graph document. Questions yielding no positive are counted
/// in `skipped_empty` and contribute no records at all.
pub fn build_qald9_dataset(
    questions: &[Qald9Question],
    client: &SearchClient,
    f: &RelationFilter,
    limits: &Qald9Limits,
) -> Result<(Vec<Qald9Record>, Qald9Stats)> {
    let pm = PrefixMap::with_defaults();
    let mut records = Vec::new();
    let mut stats = Qald9Stats { questions: questions.len(), ..Qald9Stats::default() };

    for q in questions {
        let results = client.execute_select_raw(&q.sparql)?;
        let result_set = select_result_uris(&results);

        let mut positives = Vec::new();
        for node in &result_set {
            let triples = client.fetch_subject_triples(node, f, limits.per_subject_limit)?;
            if let Some(kg_doc) = doc_for(&triples, &pm)? {
                positives.push(Qald9Record {
                    question_id: q.id.clone(),
                    question: q.question.clone(),
                    sparql: q.sparql.clone(),
                    keywords: q.keywords.clone(),
                    subject: node.clone(),
                    kg_doc,
                    label: crate::pairs::Label::Positive,
                });
            }
        }
        if positives.is_empty() {
            stats.skipped_empty += 1;
            continue;
        }
        stats.positives += positives.len();
        records.extend(positives);

        let result_lookup: BTreeSet<&str> = result_set.iter().map(String::as_str).collect();
        let mut seen_negatives: BTreeSet<String> = BTreeSet::new();
        for keyword in &q.keywords {
            let snapshot =
                client.fetch_snapshot(keyword, f, limits.k_searcher, limits.max_subjects)?;
            for subject in snapshot.distinct_subjects() {
                if result_lookup.contains(subject) || seen_negatives.contains(subject) {
                    continue;
                }
                let triples: Vec<Triple> =
                    snapshot.triples.iter().filter(|t| t.subject == subject).cloned().collect();
                let Some(kg_doc) = doc_for(&triples, &pm)? else { continue };
                seen_negatives.insert(subject.to_string());
                records.push(Qald9Record {
                    question_id: q.id.clone(),
                    question: q.question.clone(),
                    sparql: q.sparql.clone(),
                    keywords: q.keywords.clone(),
                    subject: subject.to_string(),
                    kg_doc,
                    label: crate::pairs::Label::Negative,
                });
                stats.negatives += 1;
            }
        }
    }
    Ok((records, stats))
}

/// Write records as newline-delimited JSON.
pub fn write_records(path: &Path, records: &[Qald9Record]) -> Result<()> {
    let mut buf = String::new();
    for record in records {
        buf.push_str(&serde_json::to_string(record)?);
        buf.push('\n');
    }
    crate::util::atomic_write(path, buf.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairs::Label;
    use crate::search::RetryPolicy;
    use std::sync::Arc;

    const SAMPLE: &str = r#"{
      "dataset": {"id": "sample-train"},
      "questions": [
        {
          "id": 7,
          "question": [
            {"language": "de", "string": "Wer ist das?", "keywords": "wer"},
            {"language": "en", "string": "Who founded Melbourne?", "keywords": "founded, Melbourne"}
          ],
          "query": {"sparql": "SELECT DISTINCT ?uri WHERE { ?uri <http://dbpedia.org/ontology/founded> <http://ex/Melbourne> }"},
          "answers": []
        },
        {
          "id": "8",
          "question": [
            {"language": "en", "string": "No query here", "keywords": "none"}
          ]
        },
        {
          "id": "9",
          "question": [
            {"language": "fr", "string": "Sans anglais", "keywords": "rien"}
          ],
          "query": {"sparql": "SELECT ?x WHERE { ?x ?y ?z }"}
        }
      ]
    }"#;

    #[test]
    fn parse_extracts_english_questions_with_keywords() {
        let questions = parse_qald9(SAMPLE).unwrap();
        assert_eq!(questions.len(), 1);
        let q = &questions[0];
        assert_eq!(q.id, "7");
        assert_eq!(q.question, "Who founded Melbourne?");
        assert_eq!(q.keywords, vec!["founded", "Melbourne"]);
        assert!(q.sparql.contains("SELECT DISTINCT ?uri"));
    }

    #[test]
    fn parse_rejects_files_without_questions() {
        assert!(parse_qald9("{}").is_err());
        assert!(parse_qald9("[1,2]").is_err());
    }

    #[test]
    fn result_uris_take_the_first_var_and_skip_literals() {
        let doc = serde_json::json!({
            "head": {"vars": ["uri", "other"]},
            "results": {"bindings": [
                {"uri": {"type": "uri", "value": "http://ex/B"}},
                {"uri": {"type": "uri", "value": "http://ex/A"}},
                {"uri": {"type": "literal", "value": "just text"}},
                {"uri": {"type": "uri", "value": "http://ex/A"}},
                {"other": {"type": "uri", "value": "http://ex/ignored"}}
            ]}
        });
        assert_eq!(select_result_uris(&doc), vec!["http://ex/A", "http://ex/B"]);
        // ASK-style documents yield nothing.
        let ask = serde_json::json!({"head": {}, "boolean": true});
        assert!(select_result_uris(&ask).is_empty());
    }

    /// Canned endpoint: routes on recognizable substrings of the incoming
    /// query. Gold query → two resource results (one of which also matches
    /// the keyword search); subject fetches → per-subject rows; keyword
    /// search → rows for the matching subjects.
    fn spawn_mock() -> (String, std::thread::JoinHandle<()>) {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let s2 = Arc::clone(&server);
        let handle = std::thread::spawn(move || {
            loop {
                let Ok(mut req) = s2.recv() else { return };
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let decoded = body.replace('+', " ");
                let decoded = percent_decode(&decoded);
                if decoded.contains("shutdown-now") {
                    let _ = req.respond(tiny_http::Response::from_string("bye"));
                    return;
                }
                let spo = |rows: &[(&str, &str, &str, bool)]| -> String {
                    let bindings: Vec<String> = rows
                        .iter()
                        .map(|(s, p, o, is_uri)| {
                            let obj = if *is_uri {
                                format!("{{\"type\": \"uri\", \"value\": \"{o}\"}}")
                            } else {
                                format!("{{\"type\": \"literal\", \"value\": \"{o}\", \"xml:lang\": \"en\"}}")
                            };
                            format!(
                                "{{\"s\": {{\"type\": \"uri\", \"value\": \"{s}\"}}, \
                                  \"p\": {{\"type\": \"uri\", \"value\": \"{p}\"}}, \
                                  \"o\": {obj}}}"
                            )
                        })
                        .collect();
                    format!(
                        "{{\"head\": {{\"vars\": [\"s\", \"p\", \"o\"]}}, \
                          \"results\": {{\"bindings\": [{}]}}}}",
                        bindings.join(", ")
                    )
                };
                const LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
                const ABSTRACT: &str = "http://dbpedia.org/ontology/abstract";
                let response = if decoded.contains("dbpedia.org/ontology/founded") {
                    // The gold query.
                    "{\"head\": {\"vars\": [\"uri\"]}, \"results\": {\"bindings\": [\
                      {\"uri\": {\"type\": \"uri\", \"value\": \"http://ex/John_Batman\"}}, \
                      {\"uri\": {\"type\": \"uri\", \"value\": \"http://ex/Empty_Node\"}}\
                     ]}}"
                        .to_string()
                } else if decoded.contains("VALUES ?s { <http://ex/John_Batman> }") {
                    spo(&[(
                        "http://ex/John_Batman",
                        ABSTRACT,
                        "John Batman founded Melbourne.",
                        false,
                    )])
                } else if decoded.contains("VALUES ?s { <http://ex/Empty_Node> }") {
                    spo(&[])
                } else if decoded.contains("\"founded\"") {
                    // Keyword search for "founded": returns the gold node
                    // (excluded) and one distractor.
                    spo(&[
                        ("http://ex/John_Batman", ABSTRACT, "John Batman founded Melbourne.", false),
                        ("http://ex/Founded_Festival", LABEL, "Founded Festival", false),
                    ])
                } else if decoded.contains("\"melbourne\"") {
                    spo(&[
                        ("http://ex/Melbourne", LABEL, "Melbourne", false),
                        ("http://ex/Founded_Festival", LABEL, "Founded Festival", false),
                    ])
                } else {
                    spo(&[])
                };
                let _ = req.respond(
                    tiny_http::Response::from_string(response).with_status_code(200),
                );
            }
        });
        (format!("http://127.0.0.1:{port}/sparql"), handle)
    }

    fn percent_decode(s: &str) -> String {
        let bytes = s.as_bytes();
        let mut out = Vec::with_capacity(bytes.len());
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'%' && i + 3 <= bytes.len() {
                if let Ok(v) = u8::from_str_radix(&s[i + 1..i + 3], 16) {
                    out.push(v);
                    i += 3;
                    continue;
                }
            }
            out.push(bytes[i]);
            i += 1;
        }
        String::from_utf8_lossy(&out).into_owned()
    }

    #[test]
    fn dataset_synthesis_per_node_positives_and_keyword_negatives() {
        let (url, handle) = spawn_mock();
        let policy = RetryPolicy { max_attempts: 1, initial_backoff_ms: 1, rate_limit_ms: 0 };
        let client = SearchClient::new(&url, policy);
        let questions = parse_qald9(SAMPLE).unwrap();
        let f = RelationFilter::default_f_rel();
        let (records, stats) =
            build_qald9_dataset(&questions, &client, &f, &Qald9Limits::default()).unwrap();

        // One positive: John_Batman (Empty_Node has no retained triples).
        let positives: Vec<&Qald9Record> =
            records.iter().filter(|r| r.label == Label::Positive).collect();
        assert_eq!(positives.len(), 1);
        assert_eq!(positives[0].subject, "http://ex/John_Batman");
        assert!(positives[0].kg_doc.contains("rdf:about=\"http://ex/John_Batman\""));
        assert!(positives[0].kg_doc.contains("John Batman founded Melbourne."));

        // Negatives: keyword subjects minus the result set, deduplicated
        // across keywords: Founded_Festival and Melbourne.
        let mut negatives: Vec<&str> = records
            .iter()
            .filter(|r| r.label == Label::Negative)
            .map(|r| r.subject.as_str())
            .collect();
        negatives.sort_unstable();
        assert_eq!(negatives, vec!["http://ex/Founded_Festival", "http://ex/Melbourne"]);
        for r in records.iter().filter(|r| r.label == Label::Negative) {
            assert_ne!(r.subject, "http://ex/John_Batman");
            assert!(!r.kg_doc.is_empty());
        }

        assert_eq!(
            stats,
            Qald9Stats { questions: 1, skipped_empty: 0, positives: 1, negatives: 2 }
        );

        // Shut the mock down.
        let shutdown = SearchClient::new(
            &url,
            RetryPolicy { max_attempts: 1, initial_backoff_ms: 1, rate_limit_ms: 0 },
        );
        let _ = shutdown.execute_select_raw("shutdown-now");
        handle.join().unwrap();
    }

    #[test]
    fn question_with_empty_results_is_skipped_and_counted() {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let s2 = Arc::clone(&server);
        let handle = std::thread::spawn(move || {
            for _ in 0..1 {
                let Ok(req) = s2.recv() else { return };
                let _ = req.respond(tiny_http::Response::from_string(
                    "{\"head\": {\"vars\": [\"uri\"]}, \"results\": {\"bindings\": []}}",
                ));
            }
        });
        let policy = RetryPolicy { max_attempts: 1, initial_backoff_ms: 1, rate_limit_ms: 0 };
        let client = SearchClient::new(format!("http://127.0.0.1:{port}/sparql"), policy);
        let questions = vec![Qald9Question {
            id: "q".into(),
            question: "Anything?".into(),
            sparql: "SELECT ?uri WHERE { }".into(),
            keywords: vec!["unused".into()],
        }];
        let f = RelationFilter::default_f_rel();
        let (records, stats) =
            build_qald9_dataset(&questions, &client, &f, &Qald9Limits::default()).unwrap();
        assert!(records.is_empty());
        assert_eq!(
            stats,
            Qald9Stats { questions: 1, skipped_empty: 1, positives: 0, negatives: 0 }
        );
        handle.join().unwrap();
    }

    #[test]
    fn records_round_trip_through_ndjson() {
        let record = Qald9Record {
            question_id: "7".into(),
            question: "Who founded Melbourne?".into(),
            sparql: "SELECT ?uri WHERE { }".into(),
            keywords: vec!["founded".into()],
            subject: "http://ex/John_Batman".into(),
            kg_doc: "<?xml version=\"1.0\"?>...".into(),
            label: Label::Positive,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qald.ndjson");
        write_records(&path, &[record.clone()]).unwrap();
        let data = std::fs::read_to_string(&path).unwrap();
        let back: Qald9Record = serde_json::from_str(data.trim()).unwrap();
        assert_eq!(back, record);
    }
}
