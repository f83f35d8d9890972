//! Ranking-quality metrics and their aggregation over judged queries.
//!
//! Relevance is judged per (query, item) on three binary channels: `sem`
//! (semantic match to the recorded origin) and the spatial containment
//! channels `geo_aus` / `geo_vic`. Reports carry means over all N queries
//! and over the starred N* subset — queries whose extracted snapshot
//! actually mentions the true origin. `map` here follows the convention
//! that MAP is the mean of P@k over queries; the classical average
//! precision is also emitted, under `classical_ap`, to avoid ambiguity.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary flag that accepts JSON `true`/`false` or `1`/`0`.
fn flag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bool(bool),
        Int(u8),
    }
    match Raw::deserialize(d)? {
        Raw::Bool(b) => Ok(b),
        Raw::Int(0) => Ok(false),
        Raw::Int(1) => Ok(true),
        Raw::Int(other) => Err(serde::de::Error::custom(format!(
            "flag must be 0 or 1, got {other}"
        ))),
    }
}

fn flag_out<S: serde::Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

/// One judged (query, item) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub query_id: String,
    pub item_id: String,
    #[serde(deserialize_with = "flag", serialize_with = "flag_out")]
    pub sem: bool,
    #[serde(deserialize_with = "flag", serialize_with = "flag_out")]
    pub geo_aus: bool,
    #[serde(deserialize_with = "flag", serialize_with = "flag_out")]
    pub geo_vic: bool,
}

/// Per-query bookkeeping: did the search stage produce a snapshot, and
/// does that snapshot mention the true origin (the starred subset).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryMeta {
    pub query_id: String,
    #[serde(deserialize_with = "flag", serialize_with = "flag_out")]
    pub kg_extracted: bool,
    #[serde(deserialize_with = "flag", serialize_with = "flag_out")]
    pub origin_mentioned: bool,
}

/// Relevance channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Channel {
    Sem,
    GeoAus,
    GeoVic,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Sem, Channel::GeoAus, Channel::GeoVic];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Sem => "sem",
            Channel::GeoAus => "geo_aus",
            Channel::GeoVic => "geo_vic",
        }
    }

    fn of(self, j: &RelevanceJudgment) -> bool {
        match self {
            Channel::Sem => j.sem,
            Channel::GeoAus => j.geo_aus,
            Channel::GeoVic => j.geo_vic,
        }
    }
}

/// 1 iff any of the first min(k, len) entries is relevant.
pub fn hr_at_k(rels: &[bool], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    if rels.iter().take(k).any(|&r| r) {
        1.0
    } else {
        0.0
    }
}

/// 1/r for the first relevant rank r <= k, else 0.
pub fn mrr_at_k(rels: &[bool], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    rels.iter()
        .take(k)
        .position(|&r| r)
        .map(|idx| 1.0 / (idx as f64 + 1.0))
        .unwrap_or(0.0)
}

fn discount(rank: usize) -> f64 {
    // rank is 1-based.
    1.0 / ((rank as f64) + 1.0).log2()
}

/// Binary-gain nDCG with a 1/log2(rank+1) discount. The ideal DCG places
/// the query's total relevant count (capped at k) at the top; 0 when the
/// list holds no relevant item at all.
pub fn ndcg_at_k(rels: &[bool], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let total_relevant = rels.iter().filter(|&&r| r).count();
    if total_relevant == 0 {
        return 0.0;
    }
    let dcg: f64 = rels
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(idx, _)| discount(idx + 1))
        .sum();
    let ideal: f64 = (1..=total_relevant.min(k)).map(discount).sum();
    dcg / ideal
}

/// (#relevant in top k) / k.
pub fn precision_at_k(rels: &[bool], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    rels.iter().take(k).filter(|&&r| r).count() as f64 / k as f64
}

/// Mean of P@k over queries — the MAP convention used in these reports.
pub fn map_at_k(rel_lists: &[Vec<bool>], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    if rel_lists.is_empty() {
        return 0.0;
    }
    rel_lists.iter().map(|rels| precision_at_k(rels, k)).sum::<f64>() / rel_lists.len() as f64
}

/// Classical average precision at k for one list: mean over the relevant
/// positions r <= k of P@r, normalized by min(total relevant, k).
pub fn classical_ap_at_k(rels: &[bool], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let total_relevant = rels.iter().filter(|&&r| r).count();
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (idx, &r) in rels.iter().take(k).enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (idx + 1) as f64;
        }
    }
    sum / total_relevant.min(k) as f64
}

/// Signed relative change (current − previous) / previous.
pub fn delta_hr(hr_current: f64, hr_previous: f64) -> Result<f64> {
    if hr_previous == 0.0 {
        return Err(Error::UndefinedBase);
    }
    Ok((hr_current - hr_previous) / hr_previous)
}

/// Aggregated means for one relevance channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub hr: f64,
    pub mrr: f64,
    pub ndcg: f64,
    /// Mean P@k over the queries — simultaneously the MAP figure.
    pub map: f64,
    pub classical_ap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k: usize,
    /// Number of queries scored (all meta records).
    pub n: usize,
    /// Size of the starred subset (origin mentioned in the snapshot).
    pub n_star: usize,
    pub per_channel: BTreeMap<String, ChannelMetrics>,
    /// Same metrics restricted to the starred subset.
    pub per_channel_starred: BTreeMap<String, ChannelMetrics>,
    /// kg_extracted count / n.
    pub extracted_ratio: f64,
    /// origin_mentioned count / n.
    pub origin_mentioned_ratio: f64,
}

/// Per-rank relevance cells for one channel — one row per query, k cells
/// of 0/1, zero-padded past the end of the ranked list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankGrid {
    pub channel: String,
    pub k: usize,
    pub rows: Vec<RankGridRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankGridRow {
    pub query_id: String,
    pub cells: Vec<u8>,
}

fn validate_judgment(j: &RelevanceJudgment) -> Result<()> {
    if j.geo_vic && !j.geo_aus {
        return Err(Error::Config(format!(
            "judgment ({}, {}) has geo_vic without geo_aus; Victoria lies inside Australia",
            j.query_id, j.item_id
        )));
    }
    Ok(())
}

fn validate_meta(m: &QueryMeta) -> Result<()> {
    if m.origin_mentioned && !m.kg_extracted {
        return Err(Error::Config(format!(
            "meta for {} claims an origin mention without an extracted snapshot",
            m.query_id
        )));
    }
    Ok(())
}

/// Load newline-delimited judgment records, enforcing channel containment
/// and rejecting duplicate (query, item) pairs.
pub fn load_judgments(path: &Path) -> Result<Vec<RelevanceJudgment>> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_judgments(&data)
}

pub fn parse_judgments(data: &str) -> Result<Vec<RelevanceJudgment>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for line in data.lines().filter(|l| !l.trim().is_empty()) {
        let j: RelevanceJudgment = serde_json::from_str(line)?;
        validate_judgment(&j)?;
        if !seen.insert((j.query_id.clone(), j.item_id.clone())) {
            return Err(Error::Config(format!(
                "duplicate judgment for ({}, {})",
                j.query_id, j.item_id
            )));
        }
        out.push(j);
    }
    Ok(out)
}

/// Load newline-delimited meta records, enforcing mention ⇒ extraction
/// and rejecting duplicate query ids.
pub fn load_meta(path: &Path) -> Result<Vec<QueryMeta>> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_meta(&data)
}

pub fn parse_meta(data: &str) -> Result<Vec<QueryMeta>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for line in data.lines().filter(|l| !l.trim().is_empty()) {
        let m: QueryMeta = serde_json::from_str(line)?;
        validate_meta(&m)?;
        if !seen.insert(m.query_id.clone()) {
            return Err(Error::Config(format!("duplicate meta for {}", m.query_id)));
        }
        out.push(m);
    }
    Ok(out)
}

fn channel_rels(
    channel: Channel,
    query_id: &str,
    ranked: &[String],
    judgments: &BTreeMap<(String, String), RelevanceJudgment>,
) -> Result<Vec<bool>> {
    ranked
        .iter()
        .map(|item| {
            judgments
                .get(&(query_id.to_string(), item.clone()))
                .map(|j| channel.of(j))
                .ok_or_else(|| Error::MissingJudgment {
                    query_id: query_id.to_string(),
                    item_id: item.clone(),
                })
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn summarize(rel_lists: &[Vec<bool>], k: usize) -> ChannelMetrics {
    let hr: Vec<f64> = rel_lists.iter().map(|r| hr_at_k(r, k)).collect();
    let mrr: Vec<f64> = rel_lists.iter().map(|r| mrr_at_k(r, k)).collect();
    let ndcg: Vec<f64> = rel_lists.iter().map(|r| ndcg_at_k(r, k)).collect();
    let ap: Vec<f64> = rel_lists.iter().map(|r| classical_ap_at_k(r, k)).collect();
    ChannelMetrics {
        hr: mean(&hr),
        mrr: mean(&mrr),
        ndcg: mean(&ndcg),
        map: map_at_k(rel_lists, k),
        classical_ap: mean(&ap),
    }
}

/// Aggregate metrics over every query in `meta`. A query without a ranked
/// list contributes zeros (the pipeline produced nothing for it); a ranked
/// item without a judgment is an error, never treated as irrelevant.
pub fn aggregate(
    judgments: &[RelevanceJudgment],
    rankings: &BTreeMap<String, Vec<String>>,
    meta: &[QueryMeta],
    k: usize,
) -> Result<MetricsReport> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    for j in judgments {
        validate_judgment(j)?;
    }
    for m in meta {
        validate_meta(m)?;
    }
    let meta_ids: std::collections::BTreeSet<&str> =
        meta.iter().map(|m| m.query_id.as_str()).collect();
    if meta_ids.len() != meta.len() {
        return Err(Error::Config("duplicate query ids in meta".into()));
    }
    for query_id in rankings.keys() {
        if !meta_ids.contains(query_id.as_str()) {
            return Err(Error::Config(format!(
                "ranked query {query_id:?} has no meta record"
            )));
        }
    }

    let lookup: BTreeMap<(String, String), RelevanceJudgment> = judgments
        .iter()
        .map(|j| ((j.query_id.clone(), j.item_id.clone()), j.clone()))
        .collect();

    let empty: Vec<String> = Vec::new();
    let mut per_channel = BTreeMap::new();
    let mut per_channel_starred = BTreeMap::new();
    for channel in Channel::ALL {
        let mut all_lists = Vec::with_capacity(meta.len());
        let mut starred_lists = Vec::new();
        for m in meta {
            let ranked = rankings.get(&m.query_id).unwrap_or(&empty);
            let rels = channel_rels(channel, &m.query_id, ranked, &lookup)?;
            if m.origin_mentioned {
                starred_lists.push(rels.clone());
            }
            all_lists.push(rels);
        }
        per_channel.insert(channel.name().to_string(), summarize(&all_lists, k));
        per_channel_starred.insert(channel.name().to_string(), summarize(&starred_lists, k));
    }

    let n = meta.len();
    let extracted = meta.iter().filter(|m| m.kg_extracted).count();
    let mentioned = meta.iter().filter(|m| m.origin_mentioned).count();
    Ok(MetricsReport {
        k,
        n,
        n_star: mentioned,
        per_channel,
        per_channel_starred,
        extracted_ratio: if n == 0 { 0.0 } else { extracted as f64 / n as f64 },
        origin_mentioned_ratio: if n == 0 { 0.0 } else { mentioned as f64 / n as f64 },
    })
}

/// Per-rank relevance grid for one channel (plot data).
pub fn rank_grid(
    judgments: &[RelevanceJudgment],
    rankings: &BTreeMap<String, Vec<String>>,
    channel: Channel,
    k: usize,
) -> Result<RankGrid> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let lookup: BTreeMap<(String, String), RelevanceJudgment> = judgments
        .iter()
        .map(|j| ((j.query_id.clone(), j.item_id.clone()), j.clone()))
        .collect();
    let mut rows = Vec::with_capacity(rankings.len());
    for (query_id, ranked) in rankings {
        let rels = channel_rels(channel, query_id, ranked, &lookup)?;
        let mut cells: Vec<u8> = rels.iter().take(k).map(|&r| u8::from(r)).collect();
        cells.resize(k, 0);
        rows.push(RankGridRow { query_id: query_id.clone(), cells });
    }
    Ok(RankGrid { channel: channel.name().to_string(), k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rels(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn hr_basics() {
        assert_eq!(hr_at_k(&rels(&[1, 0, 0]), 10), 1.0);
        assert_eq!(hr_at_k(&rels(&[0, 0, 0]), 3), 0.0);
        assert_eq!(hr_at_k(&rels(&[0, 0, 0, 1]), 3), 0.0);
        assert_eq!(hr_at_k(&[], 5), 0.0);
    }

    #[test]
    fn mrr_basics() {
        assert_eq!(mrr_at_k(&rels(&[1, 0, 0]), 10), 1.0);
        assert!((mrr_at_k(&rels(&[0, 0, 1]), 10) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(mrr_at_k(&rels(&[0, 0, 0, 1]), 3), 0.0);
    }

    #[test]
    fn ndcg_basics() {
        assert_eq!(ndcg_at_k(&rels(&[1, 0, 0]), 3), 1.0);
        // Single relevant item at rank 3: 1/log2(4) = 0.5.
        assert!((ndcg_at_k(&rels(&[0, 0, 1]), 3) - 0.5).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&rels(&[0, 0, 0]), 3), 0.0);
        // Relevant item exists but past k: dcg 0, ideal positive.
        assert_eq!(ndcg_at_k(&rels(&[0, 0, 0, 1]), 3), 0.0);
    }

    #[test]
    fn precision_and_map_basics() {
        let mut list = vec![true, true];
        list.extend(vec![false; 8]);
        assert!((precision_at_k(&list, 10) - 0.2).abs() < 1e-12);
        let lists = vec![list, vec![false; 10]];
        assert!((map_at_k(&lists, 10) - 0.1).abs() < 1e-12);
        assert_eq!(precision_at_k(&rels(&[1, 1, 1]), 3), 1.0);
    }

    #[test]
    fn classical_ap_differs_from_mean_precision() {
        // One relevant at rank 1 of 3: AP = 1.0, P@3 = 1/3.
        let list = rels(&[1, 0, 0]);
        assert_eq!(classical_ap_at_k(&list, 3), 1.0);
        assert!((precision_at_k(&list, 3) - 1.0 / 3.0).abs() < 1e-12);
        // Two relevant at ranks 1 and 3: AP = (1 + 2/3)/2 = 5/6.
        let list = rels(&[1, 0, 1]);
        assert!((classical_ap_at_k(&list, 3) - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn delta_hr_basics() {
        assert_eq!(delta_hr(0.375, 0.375).unwrap(), 0.0);
        assert!((delta_hr(0.30, 0.375).unwrap() + 0.2).abs() < 1e-12);
        assert!(matches!(delta_hr(0.5, 0.0), Err(Error::UndefinedBase)));
    }

    fn meta(query_id: &str, extracted: bool, mentioned: bool) -> QueryMeta {
        QueryMeta { query_id: query_id.into(), kg_extracted: extracted, origin_mentioned: mentioned }
    }

    fn judgment(q: &str, i: &str, sem: u8, aus: u8, vic: u8) -> RelevanceJudgment {
        RelevanceJudgment {
            query_id: q.into(),
            item_id: i.into(),
            sem: sem == 1,
            geo_aus: aus == 1,
            geo_vic: vic == 1,
        }
    }

    #[test]
    fn aggregate_reports_counts_and_channel_means() {
        let judgments = vec![
            judgment("q1", "a", 1, 1, 1),
            judgment("q1", "b", 0, 0, 0),
            judgment("q2", "c", 0, 1, 0),
            judgment("q2", "d", 0, 0, 0),
        ];
        let mut rankings = BTreeMap::new();
        rankings.insert("q1".to_string(), vec!["a".to_string(), "b".to_string()]);
        rankings.insert("q2".to_string(), vec!["c".to_string(), "d".to_string()]);
        let meta = vec![
            meta("q1", true, true),
            meta("q2", true, true),
            meta("q3", true, false),
            meta("q4", false, false),
        ];
        let report = aggregate(&judgments, &rankings, &meta, 10).unwrap();
        assert_eq!(report.n, 4);
        assert_eq!(report.n_star, 2);
        assert_eq!(report.extracted_ratio, 3.0 / 4.0);
        assert_eq!(report.origin_mentioned_ratio, 2.0 / 4.0);
        // sem: q1 hits, q2/q3/q4 miss → HR 0.25 over N, 0.5 over N*.
        let sem = &report.per_channel["sem"];
        assert_eq!(sem.hr, 0.25);
        let sem_star = &report.per_channel_starred["sem"];
        assert_eq!(sem_star.hr, 0.5);
        // geo_aus: q1 and q2 hit → 0.5 over N, 1.0 over N*.
        assert_eq!(report.per_channel["geo_aus"].hr, 0.5);
        assert_eq!(report.per_channel_starred["geo_aus"].hr, 1.0);
        // geo_vic: only q1 → MRR mean = 1/4.
        assert_eq!(report.per_channel["geo_vic"].mrr, 0.25);
    }

    #[test]
    fn missing_judgment_is_an_error_not_zero() {
        let judgments = vec![judgment("q1", "a", 1, 1, 1)];
        let mut rankings = BTreeMap::new();
        rankings.insert("q1".to_string(), vec!["a".to_string(), "unjudged".to_string()]);
        let meta_rows = vec![meta("q1", true, true)];
        match aggregate(&judgments, &rankings, &meta_rows, 10) {
            Err(Error::MissingJudgment { query_id, item_id }) => {
                assert_eq!(query_id, "q1");
                assert_eq!(item_id, "unjudged");
            }
            other => panic!("expected MissingJudgment, got {other:?}"),
        }
    }

    #[test]
    fn containment_violations_are_rejected() {
        let bad = judgment("q1", "a", 0, 0, 1); // vic without aus
        assert!(validate_judgment(&bad).is_err());
        assert!(parse_judgments(
            "{\"query_id\":\"q\",\"item_id\":\"i\",\"sem\":0,\"geo_aus\":0,\"geo_vic\":1}"
        )
        .is_err());
        assert!(parse_meta(
            "{\"query_id\":\"q\",\"kg_extracted\":0,\"origin_mentioned\":1}"
        )
        .is_err());
    }

    #[test]
    fn judgment_files_round_trip_with_numeric_flags() {
        let text = "{\"query_id\":\"q1\",\"item_id\":\"a\",\"sem\":1,\"geo_aus\":1,\"geo_vic\":0}\n\
                    {\"query_id\":\"q1\",\"item_id\":\"b\",\"sem\":false,\"geo_aus\":true,\"geo_vic\":false}\n";
        let parsed = parse_judgments(text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert!(parsed[0].sem && parsed[0].geo_aus && !parsed[0].geo_vic);
        assert!(!parsed[1].sem && parsed[1].geo_aus);
        // Duplicates rejected.
        let dup = format!("{}{}", text.lines().next().unwrap(), "\n");
        let doubled = format!("{dup}{dup}");
        assert!(parse_judgments(&doubled).is_err());
    }

    #[test]
    fn unranked_queries_contribute_zeros() {
        let judgments = vec![judgment("q1", "a", 1, 1, 1)];
        let mut rankings = BTreeMap::new();
        rankings.insert("q1".to_string(), vec!["a".to_string()]);
        let meta_rows = vec![meta("q1", true, true), meta("q2", false, false)];
        let report = aggregate(&judgments, &rankings, &meta_rows, 10).unwrap();
        assert_eq!(report.per_channel["sem"].hr, 0.5);
    }

    #[test]
    fn table3_fixture_ratios() {
        let mut meta_rows = Vec::new();
        for i in 0..248 {
            let extracted = i < 222;
            let mentioned = i < 93;
            meta_rows.push(meta(&format!("q{i}"), extracted, mentioned));
        }
        let report = aggregate(&[], &BTreeMap::new(), &meta_rows, 10).unwrap();
        assert_eq!(report.n, 248);
        assert_eq!(report.n_star, 93);
        assert!((report.extracted_ratio - 0.895).abs() < 0.0005);
        assert_eq!(report.origin_mentioned_ratio, 0.375);
    }

    #[test]
    fn rank_grid_layout() {
        let judgments = vec![
            judgment("q1", "a", 1, 0, 0),
            judgment("q1", "b", 0, 0, 0),
            judgment("q2", "c", 1, 1, 1),
        ];
        let mut rankings = BTreeMap::new();
        rankings.insert("q1".to_string(), vec!["a".to_string(), "b".to_string()]);
        rankings.insert("q2".to_string(), vec!["c".to_string()]);
        let grid = rank_grid(&judgments, &rankings, Channel::Sem, 3).unwrap();
        assert_eq!(grid.channel, "sem");
        assert_eq!(grid.rows.len(), 2);
        assert_eq!(grid.rows[0].query_id, "q1");
        assert_eq!(grid.rows[0].cells, vec![1, 0, 0]);
        assert_eq!(grid.rows[1].cells, vec![1, 0, 0]);
    }

    proptest! {
        #[test]
        fn hr_dominates_mrr_and_ndcg(bits in proptest::collection::vec(0u8..2, 0..20), k in 1usize..12) {
            let list = rels(&bits);
            let hr = hr_at_k(&list, k);
            prop_assert!(hr >= mrr_at_k(&list, k) - 1e-12);
            prop_assert!(hr >= ndcg_at_k(&list, k) - 1e-12);
            prop_assert!(mrr_at_k(&list, k) >= 0.0);
            prop_assert!(ndcg_at_k(&list, k) >= 0.0);
        }

        #[test]
        fn metrics_ignore_items_beyond_k(bits in proptest::collection::vec(0u8..2, 0..20), k in 1usize..12) {
            let full = rels(&bits);
            let mut head = full.clone();
            head.truncate(k);
            prop_assert_eq!(hr_at_k(&head, k), hr_at_k(&full, k));
            prop_assert_eq!(mrr_at_k(&head, k), mrr_at_k(&full, k));
            prop_assert_eq!(precision_at_k(&head, k), precision_at_k(&full, k));
            // nDCG's ideal depends on the total relevant count, which is
            // only invariant when the truncated tail held no relevant items.
            if bits.iter().skip(k).all(|&b| b == 0) {
                prop_assert_eq!(ndcg_at_k(&head, k), ndcg_at_k(&full, k));
            }
        }

        #[test]
        fn hr_and_hit_count_monotone_in_k(bits in proptest::collection::vec(0u8..2, 0..20), k in 1usize..12) {
            let list = rels(&bits);
            prop_assert!(hr_at_k(&list, k + 1) >= hr_at_k(&list, k));
            let hits_k = precision_at_k(&list, k) * k as f64;
            let hits_k1 = precision_at_k(&list, k + 1) * (k + 1) as f64;
            prop_assert!(hits_k1 >= hits_k - 1e-9);
        }

        #[test]
        fn all_metrics_bounded_by_unit_interval(bits in proptest::collection::vec(0u8..2, 0..20), k in 1usize..12) {
            let list = rels(&bits);
            for v in [hr_at_k(&list, k), mrr_at_k(&list, k), ndcg_at_k(&list, k), precision_at_k(&list, k), classical_ap_at_k(&list, k)] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }
}
