//! Deterministic, prefix-compacted RDF/XML serialization and a parser for
//! the emitted subset.
//!
//! Predicates are rendered as prefixed QName elements with a sorted
//! namespace table, which is what keeps the documents compact for the
//! encoder; subject and object URIs appear as full IRIs in `rdf:about` /
//! `rdf:resource` attributes, as the RDF/XML grammar requires. Output is
//! byte-deterministic: triples in canonical order, namespace declarations
//! sorted by prefix.

use std::collections::BTreeMap;

use quick_xml::events::Event;
use quick_xml::NsReader;

use crate::error::{Error, Result};
use crate::search::{canonical_sort, Object, Triple};

pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";

/// Bijective prefix <-> namespace table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixMap {
    prefix_to_ns: BTreeMap<String, String>,
    ns_to_prefix: BTreeMap<String, String>,
}

impl PrefixMap {
    pub fn empty() -> Self {
        let mut pm = PrefixMap { prefix_to_ns: BTreeMap::new(), ns_to_prefix: BTreeMap::new() };
        pm.insert("rdf", RDF_NS).expect("rdf prefix");
        pm
    }

    /// Common namespaces for DBpedia-flavored snapshots.
    pub fn with_defaults() -> Self {
        let mut pm = Self::empty();
        for (prefix, ns) in [
            ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
            ("dbo", "http://dbpedia.org/ontology/"),
            ("dbp", "http://dbpedia.org/property/"),
            ("dbr", "http://dbpedia.org/resource/"),
            ("foaf", "http://xmlns.com/foaf/0.1/"),
            ("geo", "http://www.w3.org/2003/01/geo/wgs84_pos#"),
            ("xsd", "http://www.w3.org/2001/XMLSchema#"),
        ] {
            pm.insert(prefix, ns).expect("default prefixes are disjoint");
        }
        pm
    }

    pub fn insert(&mut self, prefix: &str, ns: &str) -> Result<()> {
        if let Some(existing) = self.prefix_to_ns.get(prefix) {
            if existing != ns {
                return Err(Error::RdfXml(format!(
                    "prefix {prefix:?} already bound to {existing:?}"
                )));
            }
            return Ok(());
        }
        if let Some(existing) = self.ns_to_prefix.get(ns) {
            return Err(Error::RdfXml(format!(
                "namespace {ns:?} already bound to prefix {existing:?}"
            )));
        }
        self.prefix_to_ns.insert(prefix.to_string(), ns.to_string());
        self.ns_to_prefix.insert(ns.to_string(), prefix.to_string());
        Ok(())
    }

    pub fn prefix_for(&self, ns: &str) -> Option<&str> {
        self.ns_to_prefix.get(ns).map(String::as_str)
    }

    pub fn ns_for(&self, prefix: &str) -> Option<&str> {
        self.prefix_to_ns.get(prefix).map(String::as_str)
    }

    /// Extend with generated prefixes (`ns1`, `ns2`, ...) for any namespace
    /// not yet covered; namespaces are assigned in sorted order so the
    /// result is deterministic.
    pub fn covering<'a>(&self, namespaces: impl IntoIterator<Item = &'a str>) -> PrefixMap {
        let mut pm = self.clone();
        let mut todo: Vec<&str> =
            namespaces.into_iter().filter(|ns| pm.prefix_for(ns).is_none()).collect();
        todo.sort_unstable();
        todo.dedup();
        let mut counter = 1usize;
        for ns in todo {
            loop {
                let candidate = format!("ns{counter}");
                counter += 1;
                if pm.ns_for(&candidate).is_none() {
                    pm.insert(&candidate, ns).expect("fresh prefix");
                    break;
                }
            }
        }
        pm
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

/// Split a URI into (namespace, local) where the local part is the longest
/// suffix usable as an XML element name. Returns `None` when no such suffix
/// exists (e.g. the URI ends with `/`).
pub fn split_for_qname(uri: &str) -> Option<(&str, &str)> {
    let mut start = uri.len();
    for (idx, c) in uri.char_indices().rev() {
        if is_name_char(c) {
            start = idx;
        } else {
            break;
        }
    }
    // Advance past any leading characters that cannot start a name.
    let mut local_start = None;
    for (idx, c) in uri[start..].char_indices() {
        if is_name_start(c) {
            local_start = Some(start + idx);
            break;
        }
    }
    let local_start = local_start?;
    if local_start == 0 {
        return None; // no namespace part at all
    }
    Some((&uri[..local_start], &uri[local_start..]))
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            // Bare CR would be folded to LF by XML end-of-line handling.
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            // Whitespace would be folded to spaces by attribute-value
            // normalization.
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

fn predicate_qname<'a>(predicate: &'a str, pm: &'a PrefixMap) -> Result<(String, &'a str)> {
    let (ns, local) = split_for_qname(predicate).ok_or_else(|| {
        Error::RdfXml(format!("predicate {predicate:?} has no XML-name-safe local part"))
    })?;
    let prefix = pm
        .prefix_for(ns)
        .ok_or_else(|| Error::RdfXml(format!("no prefix for namespace {ns:?}")))?;
    Ok((format!("{prefix}:{local}"), ns))
}

fn render_property(t: &Triple, pm: &PrefixMap, out: &mut String) -> Result<()> {
    let (qname, _) = predicate_qname(&t.predicate, pm)?;
    match &t.object {
        Object::Uri { value } => {
            out.push_str(&format!("    <{qname} rdf:resource=\"{}\"/>\n", escape_attr(value)));
        }
        Object::Literal { value, lang, datatype } => {
            out.push_str(&format!("    <{qname}"));
            if let Some(lang) = lang {
                out.push_str(&format!(" xml:lang=\"{}\"", escape_attr(lang)));
            }
            if let Some(dt) = datatype {
                out.push_str(&format!(" rdf:datatype=\"{}\"", escape_attr(dt)));
            }
            out.push_str(&format!(">{}</{qname}>\n", escape_text(value)));
        }
    }
    Ok(())
}

/// Prefix map actually needed to render these triples: the base map plus
/// generated prefixes for any predicate namespace it does not cover.
pub fn covering_prefix_map(triples: &[Triple], base: &PrefixMap) -> Result<PrefixMap> {
    let mut namespaces = Vec::new();
    for t in triples {
        let (ns, _) = split_for_qname(&t.predicate).ok_or_else(|| {
            Error::RdfXml(format!("predicate {:?} has no XML-name-safe local part", t.predicate))
        })?;
        namespaces.push(ns);
    }
    Ok(base.covering(namespaces))
}

/// Serialize triples as a complete RDF/XML document: subjects sorted,
/// predicates sorted within subject, namespace declarations sorted by
/// prefix. Same triples, same bytes.
pub fn compact_and_serialize(triples: &[Triple], pm: &PrefixMap) -> Result<String> {
    let pm = covering_prefix_map(triples, pm)?;
    let mut sorted = triples.to_vec();
    canonical_sort(&mut sorted);
    sorted.dedup();

    // Namespaces used by predicate QNames, plus rdf itself.
    let mut used: Vec<&str> = vec![RDF_NS];
    for t in &sorted {
        let (ns, _) = split_for_qname(&t.predicate).expect("validated by covering_prefix_map");
        used.push(ns);
    }
    let mut decls: Vec<(&str, &str)> =
        used.iter().map(|ns| (pm.prefix_for(ns).expect("covered"), *ns)).collect();
    decls.sort_unstable();
    decls.dedup();

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<rdf:RDF");
    for (prefix, ns) in decls {
        out.push_str(&format!(" xmlns:{prefix}=\"{}\"", escape_attr(ns)));
    }
    if sorted.is_empty() {
        out.push_str("/>\n");
        return Ok(out);
    }
    out.push_str(">\n");

    let mut current_subject: Option<&str> = None;
    for t in &sorted {
        if current_subject != Some(t.subject.as_str()) {
            if current_subject.is_some() {
                out.push_str("  </rdf:Description>\n");
            }
            out.push_str(&format!(
                "  <rdf:Description rdf:about=\"{}\">\n",
                escape_attr(&t.subject)
            ));
            current_subject = Some(t.subject.as_str());
        }
        render_property(t, &pm, &mut out)?;
    }
    out.push_str("  </rdf:Description>\n");
    out.push_str("</rdf:RDF>\n");
    Ok(out)
}

/// Serialize one subject's triples as its `rdf:Description` block — the
/// per-subject document text used by the chunker. The block is exactly the
/// subject's section of the full document.
pub fn subject_fragment(subject: &str, triples: &[Triple], pm: &PrefixMap) -> Result<String> {
    let own: Vec<Triple> = triples.iter().filter(|t| t.subject == subject).cloned().collect();
    let pm = covering_prefix_map(&own, pm)?;
    let mut sorted = own;
    canonical_sort(&mut sorted);
    sorted.dedup();
    let mut out = String::new();
    out.push_str(&format!("  <rdf:Description rdf:about=\"{}\">\n", escape_attr(subject)));
    for t in &sorted {
        render_property(t, &pm, &mut out)?;
    }
    out.push_str("  </rdf:Description>\n");
    Ok(out)
}

/// Parse an RDF/XML document of the subset this module emits (plain
/// `rdf:Description` blocks with `rdf:about`, property elements carrying
/// either an `rdf:resource` attribute or literal text with optional
/// `xml:lang` / `rdf:datatype`).
pub fn parse(xml: &str) -> Result<Vec<Triple>> {
    let mut reader = NsReader::from_str(xml);
    reader.config_mut().trim_text(false);

    #[derive(PartialEq)]
    enum Where {
        Start,
        InRdf,
        InDescription,
        InProperty,
    }

    let mut state = Where::Start;
    let mut triples = Vec::new();
    let mut subject = String::new();
    let mut predicate = String::new();
    let mut lang: Option<String> = None;
    let mut datatype: Option<String> = None;
    let mut text = String::new();
    // Set when the open property element already emitted a Uri triple via
    // rdf:resource; its end tag must not emit a literal as well.
    let mut resource_pending = false;

    let err = |msg: &str| Error::RdfXml(msg.to_string());

    loop {
        let (resolved, event) =
            reader.read_resolved_event().map_err(|e| Error::RdfXml(e.to_string()))?;
        let is_empty = matches!(event, Event::Empty(_));
        match event {
            Event::Decl(_) | Event::Comment(_) => {}
            Event::Text(t) => {
                let decoded = t.xml10_content().map_err(|e| Error::RdfXml(e.to_string()))?;
                let decoded = quick_xml::escape::unescape(&decoded)
                    .map_err(|e| Error::RdfXml(e.to_string()))?
                    .into_owned();
                if state == Where::InProperty {
                    text.push_str(&decoded);
                } else if !decoded.trim().is_empty() {
                    return Err(err("unexpected text outside a property element"));
                }
            }
            // `&amp;`, `&#13;`, ... inside text arrive as their own events.
            Event::GeneralRef(r) => {
                if state != Where::InProperty {
                    return Err(err("entity reference outside a property element"));
                }
                if let Some(c) = r.resolve_char_ref().map_err(|e| Error::RdfXml(e.to_string()))? {
                    text.push(c);
                } else {
                    let name = r.decode().map_err(|e| Error::RdfXml(e.to_string()))?;
                    match quick_xml::escape::resolve_predefined_entity(&name) {
                        Some(replacement) => text.push_str(replacement),
                        None => {
                            return Err(Error::RdfXml(format!(
                                "unknown entity reference &{name};"
                            )))
                        }
                    }
                }
            }
            Event::Start(e) | Event::Empty(e) => {
                let ns = match resolved {
                    quick_xml::name::ResolveResult::Bound(ns) => {
                        String::from_utf8_lossy(ns.as_ref()).into_owned()
                    }
                    _ => return Err(err("element with unresolved namespace")),
                };
                let local = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                match state {
                    Where::Start => {
                        if ns != RDF_NS || local != "RDF" {
                            return Err(err("root element is not rdf:RDF"));
                        }
                        if is_empty {
                            return Ok(triples);
                        }
                        state = Where::InRdf;
                    }
                    Where::InRdf => {
                        if ns != RDF_NS || local != "Description" {
                            return Err(err("expected rdf:Description"));
                        }
                        subject.clear();
                        for attr in e.attributes() {
                            let attr = attr.map_err(|e| Error::RdfXml(e.to_string()))?;
                            if attr.key.as_ref() == b"rdf:about" {
                                subject = attr
                                    .decoded_and_normalized_value(
                                        quick_xml::XmlVersion::Implicit1_0,
                                        reader.decoder(),
                                    )
                                    .map_err(|e| Error::RdfXml(e.to_string()))?
                                    .into_owned();
                            }
                        }
                        if subject.is_empty() {
                            return Err(err("rdf:Description without rdf:about"));
                        }
                        if !is_empty {
                            state = Where::InDescription;
                        }
                    }
                    Where::InDescription => {
                        predicate = format!("{ns}{local}");
                        lang = None;
                        datatype = None;
                        text.clear();
                        let mut resource: Option<String> = None;
                        for attr in e.attributes() {
                            let attr = attr.map_err(|e| Error::RdfXml(e.to_string()))?;
                            let value = attr
                                .decoded_and_normalized_value(
                                    quick_xml::XmlVersion::Implicit1_0,
                                    reader.decoder(),
                                )
                                .map_err(|e| Error::RdfXml(e.to_string()))?
                                .into_owned();
                            match attr.key.as_ref() {
                                b"rdf:resource" => resource = Some(value),
                                b"rdf:datatype" => datatype = Some(value),
                                b"xml:lang" => lang = Some(value),
                                _ => {}
                            }
                        }
                        if let Some(value) = resource {
                            triples.push(Triple {
                                subject: subject.clone(),
                                predicate: predicate.clone(),
                                object: Object::Uri { value },
                            });
                            if !is_empty {
                                // <p rdf:resource="..."></p> — consume the end tag.
                                state = Where::InProperty;
                                resource_pending = true;
                                text.clear();
                            }
                        } else if is_empty {
                            triples.push(Triple {
                                subject: subject.clone(),
                                predicate: predicate.clone(),
                                object: Object::Literal {
                                    value: String::new(),
                                    lang: lang.take(),
                                    datatype: datatype.take(),
                                },
                            });
                        } else {
                            state = Where::InProperty;
                        }
                    }
                    Where::InProperty => return Err(err("nested property elements")),
                }
            }
            Event::End(e) => {
                let local = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                match state {
                    Where::InProperty => {
                        if resource_pending {
                            // The Uri triple was emitted at the start tag.
                            if !text.trim().is_empty() {
                                return Err(err(
                                    "property element has both rdf:resource and text content",
                                ));
                            }
                            resource_pending = false;
                            text.clear();
                        } else {
                            triples.push(Triple {
                                subject: subject.clone(),
                                predicate: predicate.clone(),
                                object: Object::Literal {
                                    value: std::mem::take(&mut text),
                                    lang: lang.take(),
                                    datatype: datatype.take(),
                                },
                            });
                        }
                        state = Where::InDescription;
                    }
                    Where::InDescription if local == "Description" => state = Where::InRdf,
                    Where::InRdf if local == "RDF" => {}
                    _ => return Err(err("unbalanced element nesting")),
                }
            }
            Event::Eof => break,
            _ => return Err(err("unsupported XML construct")),
        }
    }
    Ok(triples)
}
