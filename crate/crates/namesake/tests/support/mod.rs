//! Shared machinery for the acceptance suite: an in-process SPARQL endpoint
//! backed by a real query evaluator, independently written oracles for the
//! retrieval metrics and the late-interaction score, and the fixture stores.

pub mod oracle;

use std::sync::Arc;
use std::thread::JoinHandle;

use oxrdf::{Dataset, GraphName, Literal, NamedNode, Quad};
use sparesults::{QueryResultsFormat, QueryResultsSerializer};
use spareval::{QueryEvaluator, QueryResults};
use spargebra::SparqlParser;

use namesake::search::{Object, Triple};

// ---------------------------------------------------------------------------
// In-process SPARQL endpoint.
// ---------------------------------------------------------------------------

/// A live HTTP SPARQL endpoint evaluating queries against a fixed dataset
/// with a full SPARQL 1.1 engine, answering in the standard JSON results
/// format. Shuts down on drop.
pub struct SparqlEndpoint {
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
    pub url: String,
}

impl SparqlEndpoint {
    pub fn serve(dataset: Dataset) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind"));
        let port = server.server_addr().to_ip().expect("ip addr").port();
        let url = format!("http://127.0.0.1:{port}/sparql");
        let srv = Arc::clone(&server);
        let handle = std::thread::spawn(move || {
            for mut request in srv.incoming_requests() {
                let mut body = String::new();
                if request.as_reader().read_to_string(&mut body).is_err() {
                    continue;
                }
                let reply = match answer(&dataset, &body) {
                    Ok(json) => tiny_http::Response::from_string(json).with_header(
                        tiny_http::Header::from_bytes(
                            &b"Content-Type"[..],
                            &b"application/sparql-results+json"[..],
                        )
                        .expect("header"),
                    ),
                    Err(msg) => tiny_http::Response::from_string(msg).with_status_code(400),
                };
                let _ = request.respond(reply);
            }
        });
        SparqlEndpoint { server, handle: Some(handle), url }
    }
}

impl Drop for SparqlEndpoint {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn answer(dataset: &Dataset, body: &str) -> Result<String, String> {
    let sparql = form_field(body, "query").ok_or("missing query form field")?;
    let query = SparqlParser::new()
        .parse_query(&sparql)
        .map_err(|e| format!("parse error: {e}"))?;
    let results = QueryEvaluator::new()
        .prepare(&query)
        .execute(dataset)
        .map_err(|e| format!("evaluation error: {e}"))?;
    let QueryResults::Solutions(solutions) = results else {
        return Err("only SELECT queries are served".into());
    };
    let variables = solutions.variables().to_vec();
    let mut buf = Vec::new();
    let mut ser = QueryResultsSerializer::from_format(QueryResultsFormat::Json)
        .serialize_solutions_to_writer(&mut buf, variables)
        .map_err(|e| e.to_string())?;
    for solution in solutions {
        let solution = solution.map_err(|e| e.to_string())?;
        ser.serialize(&solution).map_err(|e| e.to_string())?;
    }
    ser.finish().map_err(|e| e.to_string())?;
    String::from_utf8(buf).map_err(|e| e.to_string())
}

fn form_field(body: &str, name: &str) -> Option<String> {
    body.split('&').find_map(|pair| {
        let (k, v) = pair.split_once('=')?;
        (k == name).then(|| percent_decode(v))
    })
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => {
                out.push(b' ');
                i += 1;
            }
            b'%' if i + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).unwrap_or("");
                match u8::from_str_radix(hex, 16) {
                    Ok(b) => {
                        out.push(b);
                        i += 3;
                    }
                    Err(_) => {
                        out.push(bytes[i]);
                        i += 1;
                    }
                }
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

// ---------------------------------------------------------------------------
// Quad/triple construction helpers.
// ---------------------------------------------------------------------------

pub fn uri_quad(s: &str, p: &str, o: &str) -> Quad {
    Quad::new(
        NamedNode::new(s).expect("subject iri"),
        NamedNode::new(p).expect("predicate iri"),
        NamedNode::new(o).expect("object iri"),
        GraphName::DefaultGraph,
    )
}

pub fn lang_quad(s: &str, p: &str, value: &str, lang: &str) -> Quad {
    Quad::new(
        NamedNode::new(s).expect("subject iri"),
        NamedNode::new(p).expect("predicate iri"),
        Literal::new_language_tagged_literal(value, lang).expect("language tag"),
        GraphName::DefaultGraph,
    )
}

pub fn plain_quad(s: &str, p: &str, value: &str) -> Quad {
    Quad::new(
        NamedNode::new(s).expect("subject iri"),
        NamedNode::new(p).expect("predicate iri"),
        Literal::new_simple_literal(value),
        GraphName::DefaultGraph,
    )
}

pub fn typed_quad(s: &str, p: &str, value: &str, datatype: &str) -> Quad {
    Quad::new(
        NamedNode::new(s).expect("subject iri"),
        NamedNode::new(p).expect("predicate iri"),
        Literal::new_typed_literal(value, NamedNode::new(datatype).expect("datatype iri")),
        GraphName::DefaultGraph,
    )
}

pub fn typed_triple(s: &str, p: &str, value: &str, datatype: &str) -> Triple {
    Triple {
        subject: s.to_string(),
        predicate: p.to_string(),
        object: Object::Literal {
            value: value.to_string(),
            lang: None,
            datatype: Some(datatype.to_string()),
        },
    }
}

// ---------------------------------------------------------------------------
// Conformance fixture: 60 triples, of which exactly 23 satisfy all three
// extraction constraints for the root name "Batman" (subject containment in
// URI or label, whitelisted predicate, English-or-untagged object).
// ---------------------------------------------------------------------------

pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";
pub const DBO_ABSTRACT: &str = "http://dbpedia.org/ontology/abstract";
pub const DBO_BIRTH_DATE: &str = "http://dbpedia.org/ontology/birthDate";
pub const DBO_DEATH_DATE: &str = "http://dbpedia.org/ontology/deathDate";
pub const DBO_BIRTH_PLACE: &str = "http://dbpedia.org/ontology/birthPlace";
pub const DBO_DEATH_PLACE: &str = "http://dbpedia.org/ontology/deathPlace";
pub const DBO_SPOUSE: &str = "http://dbpedia.org/ontology/spouse";
pub const DBO_COUNTRY: &str = "http://dbpedia.org/ontology/country";
pub const DBO_LOCATION: &str = "http://dbpedia.org/ontology/location";
pub const DBP_OCCUPATION: &str = "http://dbpedia.org/property/occupation";
pub const DBP_DATE: &str = "http://dbpedia.org/property/date";
pub const DBP_CHILDREN: &str = "http://dbpedia.org/property/children";
pub const DBP_PLACE: &str = "http://dbpedia.org/property/place";
pub const WGS_LAT: &str = "http://www.w3.org/2003/01/geo/wgs84_pos#lat";
pub const WGS_LONG: &str = "http://www.w3.org/2003/01/geo/wgs84_pos#long";

// Outside the relation whitelist.
const FOAF_DEPICTION: &str = "http://xmlns.com/foaf/0.1/depiction";
const FOAF_PAGE: &str = "http://xmlns.com/foaf/0.1/page";
const DBO_WIKILINK: &str = "http://dbpedia.org/ontology/wikiPageWikiLink";
const DBP_TEMPLATE: &str = "http://dbpedia.org/property/wikiPageUsesTemplate";
const DCT_SUBJECT: &str = "http://purl.org/dc/terms/subject";
const OWL_SAMEAS: &str = "http://www.w3.org/2002/07/owl#sameAs";

const XSD_DATE: &str = "http://www.w3.org/2001/XMLSchema#date";
const XSD_FLOAT: &str = "http://www.w3.org/2001/XMLSchema#float";

pub const JB: &str = "http://dbpedia.org/resource/John_Batman";
pub const BC: &str = "http://dbpedia.org/resource/Batman_(comics)";
pub const BM: &str = "http://dbpedia.org/resource/Batmania";
pub const MF: &str = "http://dbpedia.org/resource/Melbourne_Founder";
const RH: &str = "http://dbpedia.org/resource/Robin_Hood";
const UT: &str = "http://dbpedia.org/resource/Unrelated_Town";

/// The full 60-triple store served by the endpoint in the conformance test.
pub fn conformance_store() -> Dataset {
    let mut quads = Vec::new();

    // John_Batman: subject matches by URI. 9 conforming triples.
    quads.push(lang_quad(JB, RDFS_LABEL, "John Batman", "en"));
    quads.push(lang_quad(
        JB,
        DBO_ABSTRACT,
        "John Batman was an Australian grazier, entrepreneur and explorer.",
        "en",
    ));
    quads.push(typed_quad(JB, DBO_BIRTH_DATE, "1801-01-21", XSD_DATE));
    quads.push(typed_quad(JB, DBO_DEATH_DATE, "1839-05-06", XSD_DATE));
    quads.push(uri_quad(JB, DBO_BIRTH_PLACE, "http://dbpedia.org/resource/Parramatta"));
    quads.push(uri_quad(JB, DBO_DEATH_PLACE, "http://dbpedia.org/resource/Melbourne"));
    quads.push(uri_quad(JB, DBO_SPOUSE, "http://dbpedia.org/resource/Eliza_Batman"));
    quads.push(lang_quad(JB, DBP_OCCUPATION, "Grazier", "en"));
    quads.push(lang_quad(JB, RDFS_COMMENT, "Australian settler and founder of Melbourne", "en"));
    // John_Batman: 6 non-conforming (wrong language or unlisted predicate).
    quads.push(lang_quad(JB, DBO_ABSTRACT, "John Batman était un éleveur australien.", "fr"));
    quads.push(lang_quad(
        JB,
        DBO_ABSTRACT,
        "John Batman foi um criador de gado australiano.",
        "pt",
    ));
    quads.push(lang_quad(JB, RDFS_COMMENT, "Australischer Siedler", "de"));
    quads.push(lang_quad(JB, DBP_OCCUPATION, "Éleveur", "fr"));
    quads.push(uri_quad(JB, FOAF_DEPICTION, "http://commons.example.org/JohnBatman.jpg"));
    quads.push(uri_quad(JB, DBO_WIKILINK, "http://dbpedia.org/resource/Tasmania"));

    // Batman_(comics): subject matches by URI. 4 conforming triples.
    quads.push(lang_quad(BC, RDFS_LABEL, "Batman (comics)", "en"));
    quads.push(lang_quad(
        BC,
        DBO_ABSTRACT,
        "Batman is a superhero who appears in American comic books.",
        "en",
    ));
    quads.push(plain_quad(BC, DBP_DATE, "1939-03-30"));
    quads.push(uri_quad(BC, DBO_COUNTRY, "http://dbpedia.org/resource/United_States"));
    // Batman_(comics): 5 non-conforming.
    quads.push(lang_quad(BC, DBO_ABSTRACT, "Batman ist ein Superheld.", "de"));
    quads.push(lang_quad(BC, DBO_ABSTRACT, "Batman é um super-herói.", "pt"));
    quads.push(lang_quad(BC, RDFS_LABEL, "Batman (cómic)", "es"));
    quads.push(uri_quad(BC, DCT_SUBJECT, "http://dbpedia.org/resource/Category:Superheroes"));
    quads.push(uri_quad(BC, FOAF_PAGE, "http://batman.example.org/"));

    // Batmania: subject matches by URI (containment). 6 conforming triples.
    quads.push(lang_quad(BM, RDFS_LABEL, "Batmania", "en"));
    quads.push(lang_quad(
        BM,
        RDFS_COMMENT,
        "An early name proposed for the settlement that became Melbourne.",
        "en",
    ));
    quads.push(typed_quad(BM, WGS_LAT, "-37.8136", XSD_FLOAT));
    quads.push(typed_quad(BM, WGS_LONG, "144.9631", XSD_FLOAT));
    quads.push(uri_quad(BM, DBO_LOCATION, "http://dbpedia.org/resource/Victoria_(state)"));
    quads.push(uri_quad(BM, DBP_PLACE, "http://dbpedia.org/resource/Port_Phillip"));
    // Batmania: 2 non-conforming.
    quads.push(lang_quad(BM, RDFS_COMMENT, "Ein früher Name für Melbourne.", "de"));
    quads.push(uri_quad(BM, DBP_TEMPLATE, "http://dbpedia.org/resource/Template:Infobox_settlement"));

    // Melbourne_Founder: URI does not contain the root; matches via its
    // English label. 4 conforming triples.
    quads.push(lang_quad(MF, RDFS_LABEL, "William Batman Smith", "en"));
    quads.push(lang_quad(MF, DBO_ABSTRACT, "A founder figure associated with early Melbourne.", "en"));
    quads.push(uri_quad(MF, DBO_BIRTH_PLACE, "http://dbpedia.org/resource/London"));
    quads.push(plain_quad(MF, DBP_CHILDREN, "3"));
    // Melbourne_Founder: 2 non-conforming.
    quads.push(uri_quad(MF, OWL_SAMEAS, "http://www.wikidata.org/entity/Q999999"));
    quads.push(lang_quad(MF, DBO_ABSTRACT, "Ein Gründer aus Melbourne.", "de"));

    // Robin_Hood: subject never matches; 11 triples, none conforming.
    quads.push(lang_quad(RH, RDFS_LABEL, "Robin Hood", "en"));
    quads.push(lang_quad(RH, DBO_ABSTRACT, "Robin Hood is a legendary heroic outlaw.", "en"));
    quads.push(lang_quad(RH, RDFS_COMMENT, "Legendary English outlaw", "en"));
    quads.push(uri_quad(RH, DBO_BIRTH_PLACE, "http://dbpedia.org/resource/Loxley"));
    quads.push(uri_quad(RH, DBO_COUNTRY, "http://dbpedia.org/resource/England"));
    quads.push(lang_quad(RH, DBP_OCCUPATION, "Outlaw", "en"));
    quads.push(uri_quad(RH, DBO_SPOUSE, "http://dbpedia.org/resource/Maid_Marian"));
    quads.push(plain_quad(RH, DBP_DATE, "1377"));
    quads.push(uri_quad(RH, DBO_LOCATION, "http://dbpedia.org/resource/Sherwood_Forest"));
    quads.push(uri_quad(RH, DBP_PLACE, "http://dbpedia.org/resource/Nottingham"));
    quads.push(uri_quad(RH, DCT_SUBJECT, "http://dbpedia.org/resource/Category:Folklore"));

    // Unrelated_Town: subject never matches; 11 triples, none conforming.
    quads.push(lang_quad(UT, RDFS_LABEL, "Quiet Village", "en"));
    quads.push(lang_quad(UT, DBO_ABSTRACT, "A small quiet village with no famous namesake.", "en"));
    quads.push(lang_quad(UT, RDFS_COMMENT, "A village", "en"));
    quads.push(typed_quad(UT, WGS_LAT, "51.0", XSD_FLOAT));
    quads.push(typed_quad(UT, WGS_LONG, "-1.5", XSD_FLOAT));
    quads.push(uri_quad(UT, DBO_COUNTRY, "http://dbpedia.org/resource/England"));
    quads.push(uri_quad(UT, DBO_LOCATION, "http://dbpedia.org/resource/Hampshire"));
    quads.push(plain_quad(UT, DBP_CHILDREN, "0"));
    quads.push(plain_quad(UT, DBP_DATE, "1086"));
    quads.push(lang_quad(UT, RDFS_LABEL, "Stilles Dorf", "de"));
    quads.push(lang_quad(UT, DBO_ABSTRACT, "Un village tranquille.", "fr"));

    assert_eq!(quads.len(), 60, "the conformance store must hold exactly 60 triples");
    Dataset::from_iter(quads)
}

/// The 23 triples of [`conformance_store`] that satisfy all three
/// constraints, hand-derived from the store above (not recomputed through
/// the filters under test).
pub fn expected_conforming() -> Vec<Triple> {
    vec![
        // John_Batman (9).
        Triple::literal(JB, RDFS_LABEL, "John Batman", Some("en")),
        Triple::literal(
            JB,
            DBO_ABSTRACT,
            "John Batman was an Australian grazier, entrepreneur and explorer.",
            Some("en"),
        ),
        typed_triple(JB, DBO_BIRTH_DATE, "1801-01-21", XSD_DATE),
        typed_triple(JB, DBO_DEATH_DATE, "1839-05-06", XSD_DATE),
        Triple::uri(JB, DBO_BIRTH_PLACE, "http://dbpedia.org/resource/Parramatta"),
        Triple::uri(JB, DBO_DEATH_PLACE, "http://dbpedia.org/resource/Melbourne"),
        Triple::uri(JB, DBO_SPOUSE, "http://dbpedia.org/resource/Eliza_Batman"),
        Triple::literal(JB, DBP_OCCUPATION, "Grazier", Some("en")),
        Triple::literal(JB, RDFS_COMMENT, "Australian settler and founder of Melbourne", Some("en")),
        // Batman_(comics) (4).
        Triple::literal(BC, RDFS_LABEL, "Batman (comics)", Some("en")),
        Triple::literal(
            BC,
            DBO_ABSTRACT,
            "Batman is a superhero who appears in American comic books.",
            Some("en"),
        ),
        Triple::literal(BC, DBP_DATE, "1939-03-30", None),
        Triple::uri(BC, DBO_COUNTRY, "http://dbpedia.org/resource/United_States"),
        // Batmania (6).
        Triple::literal(BM, RDFS_LABEL, "Batmania", Some("en")),
        Triple::literal(
            BM,
            RDFS_COMMENT,
            "An early name proposed for the settlement that became Melbourne.",
            Some("en"),
        ),
        typed_triple(BM, WGS_LAT, "-37.8136", XSD_FLOAT),
        typed_triple(BM, WGS_LONG, "144.9631", XSD_FLOAT),
        Triple::uri(BM, DBO_LOCATION, "http://dbpedia.org/resource/Victoria_(state)"),
        Triple::uri(BM, DBP_PLACE, "http://dbpedia.org/resource/Port_Phillip"),
        // Melbourne_Founder (4).
        Triple::literal(MF, RDFS_LABEL, "William Batman Smith", Some("en")),
        Triple::literal(MF, DBO_ABSTRACT, "A founder figure associated with early Melbourne.", Some("en")),
        Triple::uri(MF, DBO_BIRTH_PLACE, "http://dbpedia.org/resource/London"),
        Triple::literal(MF, DBP_CHILDREN, "3", None),
    ]
}

// ---------------------------------------------------------------------------
// End-to-end fixture: a store covering the five-entry gazetteer. The
// John_Batman abstract quotes the Batman Street anchor question verbatim, so
// under exact-token-match scoring its document dominates every competitor
// for that entry.
// ---------------------------------------------------------------------------

pub const BATMAN_QUESTION: &str = "Who is Batman Street most likely named after, in Melbourne, \
                                   Australia? If it is not a person, find any other origin.";

pub fn e2e_store() -> Dataset {
    let mut quads = Vec::new();

    let planted = format!("John Batman founded Melbourne. {BATMAN_QUESTION} He is the namesake.");
    quads.push(lang_quad(JB, RDFS_LABEL, "John Batman", "en"));
    quads.push(lang_quad(JB, DBO_ABSTRACT, &planted, "en"));
    quads.push(uri_quad(JB, DBO_BIRTH_PLACE, "http://dbpedia.org/resource/Parramatta"));

    // Competitors inside the Batman snapshot.
    quads.push(lang_quad(BC, RDFS_LABEL, "Batman (comics)", "en"));
    quads.push(lang_quad(BC, DBO_ABSTRACT, "A fictional superhero of comic books.", "en"));
    quads.push(lang_quad(BM, RDFS_LABEL, "Batmania", "en"));
    quads.push(lang_quad(BM, RDFS_COMMENT, "An early proposed settlement name.", "en"));

    // Bourke.
    let bourke = "http://dbpedia.org/resource/Richard_Bourke";
    quads.push(lang_quad(bourke, RDFS_LABEL, "Richard Bourke", "en"));
    quads.push(lang_quad(bourke, DBO_ABSTRACT, "Richard Bourke served as Governor of New South Wales.", "en"));

    // Collins.
    let collins = "http://dbpedia.org/resource/David_Collins_(lieutenant_governor)";
    quads.push(lang_quad(collins, RDFS_LABEL, "David Collins", "en"));
    quads.push(lang_quad(collins, DBO_ABSTRACT, "David Collins was the first lieutenant governor of Van Diemen's Land.", "en"));

    // Swanston.
    let swanston = "http://dbpedia.org/resource/Charles_Swanston";
    quads.push(lang_quad(swanston, RDFS_LABEL, "Charles Swanston", "en"));
    quads.push(lang_quad(swanston, DBO_ABSTRACT, "Charles Swanston was a banker and politician.", "en"));

    // Nothing matches "Voidish".
    Dataset::from_iter(quads)
}

// ---------------------------------------------------------------------------
// Miscellaneous.
// ---------------------------------------------------------------------------

/// Read a directory tree into relative-path -> content bytes.
pub fn read_tree(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    fn walk(
        base: &std::path::Path,
        dir: &std::path::Path,
        out: &mut std::collections::BTreeMap<String, Vec<u8>>,
    ) {
        for entry in std::fs::read_dir(dir).expect("read_dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).expect("prefix").to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).expect("read file"));
            }
        }
    }
    walk(root, root, &mut out);
    out
}

/// Write an executable generator script that answers with the subject of the
/// last extract in the prompt (the most relevant one under tail-first
/// ordering), turning its local name into a human answer.
pub fn write_tail_choice_generator(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("tail_choice_gen.py");
    let script = r#"#!/usr/bin/env python3
import json, re, sys

req = json.load(sys.stdin)
uris = re.findall(r'rdf:about="([^"]+)"', req["prompt"])
if not uris:
    print(json.dumps({"text": "There is no relevant information in the extracts."}))
    sys.exit(0)
choice = uris[-1]
answer = choice.rsplit("/", 1)[-1].split("(")[0].replace("_", " ").strip()
print(json.dumps({"text": f"<CHOICE> {choice} </CHOICE> <ANSWER> {answer} </ANSWER>"}))
"#;
    std::fs::write(&path, script).expect("write script");
    let mut perms = std::fs::metadata(&path).expect("metadata").permissions();
    use std::os::unix::fs::PermissionsExt;
    perms.set_mode(0o755);
    std::fs::set_permissions(&path, perms).expect("chmod");
    path
}
