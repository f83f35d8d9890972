//! Synthesis of templated question/answer fine-tuning records from the
//! spatial graphs: border questions over the country graph and proximity
//! questions over the city graph, each with controlled negative sampling.
//!
//! Every record instantiates its template exactly — no free-form text —
//! so emitted questions and answers can be parsed back into their slots.
//! Negative answers are sampled per question, without replacement, from
//! entities for which the stated relation is false in the source graph.
//! When a question's negative pool is smaller than requested, all
//! available negatives are emitted and the question's records are flagged
//! `ratio_infeasible` instead of aborting the run.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CityNode, CountryNode, SpatialGraph};
use crate::util::{rng_for, stable_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Country,
    City,
    Qald9Rdf,
}

/// One templated question/answer record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    pub label: Label,
    pub dataset: DatasetKind,
    /// Per-question RNG seed (derived from the master seed and the
    /// question's anchor entity).
    pub seed: u64,
    /// Position of this record in its question's emission sequence.
    pub draw_index: usize,
    /// The question's negative pool was smaller than requested; all
    /// available negatives were emitted.
    pub ratio_infeasible: bool,
}

pub fn country_question(country: &str) -> String {
    format!("Give a country that shares a border with {country}.")
}

pub fn country_answer(neighbor: &str, country: &str) -> String {
    format!("{neighbor} shares a border with {country}.")
}

pub fn city_question(city: &str, country: &str) -> String {
    format!("Give a city near {city} in {country}.")
}

pub fn city_answer(city_j: &str, country_j: &str, city_i: &str, country_i: &str) -> String {
    format!("{city_j} in {country_j} is a neighbor of {city_i} in {country_i}.")
}

/// Parse a border question back into its country slot.
pub fn parse_country_question(q: &str) -> Option<&str> {
    q.strip_prefix("Give a country that shares a border with ")?.strip_suffix('.')
}

/// Parse a border answer back into (neighbor, country).
pub fn parse_country_answer(a: &str) -> Option<(&str, &str)> {
    let body = a.strip_suffix('.')?;
    let idx = body.find(" shares a border with ")?;
    Some((&body[..idx], &body[idx + " shares a border with ".len()..]))
}

/// Parse a proximity question back into (city, country). The split is at
/// the last " in ", so city names containing " in " stay intact.
pub fn parse_city_question(q: &str) -> Option<(&str, &str)> {
    let body = q.strip_prefix("Give a city near ")?.strip_suffix('.')?;
    let idx = body.rfind(" in ")?;
    Some((&body[..idx], &body[idx + 4..]))
}

/// Parse a proximity answer back into ((city_j, country_j), (city_i, country_i)).
pub fn parse_city_answer(a: &str) -> Option<((&str, &str), (&str, &str))> {
    let body = a.strip_suffix('.')?;
    let idx = body.find(" is a neighbor of ")?;
    let (left, right) = (&body[..idx], &body[idx + " is a neighbor of ".len()..]);
    let li = left.rfind(" in ")?;
    let ri = right.rfind(" in ")?;
    Some(((&left[..li], &left[li + 4..]), (&right[..ri], &right[ri + 4..])))
}

/// First `amount` entries of a seeded partial Fisher–Yates shuffle of
/// `0..pool` — uniform sampling without replacement.
fn sample_indices(rng: &mut impl Rng, pool: usize, amount: usize) -> Vec<usize> {
    let amount = amount.min(pool);
    let mut idx: Vec<usize> = (0..pool).collect();
    for i in 0..amount {
        let j = rng.random_range(i..pool);
        idx.swap(i, j);
    }
    idx.truncate(amount);
    idx
}

/// Border-question records. One question per country with at least one
/// neighbor; one positive per neighbor; `neg_per_question` negatives drawn
/// uniformly without replacement from the non-neighbors (never the country
/// itself). Deterministic given (graph, neg_per_question, seed).
pub fn gen_country_pairs(
    countries: &[CountryNode],
    graph: &SpatialGraph,
    neg_per_question: usize,
    master_seed: u64,
) -> Result<Vec<QAPair>> {
    if graph.node_count != countries.len() {
        return Err(Error::Config(format!(
            "country graph has {} nodes but {} country records were supplied",
            graph.node_count,
            countries.len()
        )));
    }
    let adjacency = graph.adjacency();
    let mut out = Vec::new();
    for (i, country) in countries.iter().enumerate() {
        let mut neighbors: Vec<usize> = adjacency[i].iter().copied().collect();
        neighbors.sort_unstable();
        if neighbors.is_empty() {
            continue;
        }
        let neighbor_set: std::collections::BTreeSet<usize> = neighbors.iter().copied().collect();
        let pool: Vec<usize> =
            (0..countries.len()).filter(|&j| j != i && !neighbor_set.contains(&j)).collect();
        let ratio_infeasible = pool.len() < neg_per_question;

        let seed = stable_seed(master_seed, &["country", &country.code]);
        let mut rng = rng_for(master_seed, &["country", &country.code]);
        let question = country_question(&country.name);
        let mut draw_index = 0usize;

        for &j in &neighbors {
            out.push(QAPair {
                question: question.clone(),
                answer: country_answer(&countries[j].name, &country.name),
                label: Label::Positive,
                dataset: DatasetKind::Country,
                seed,
                draw_index,
                ratio_infeasible,
            });
            draw_index += 1;
        }
        for pick in sample_indices(&mut rng, pool.len(), neg_per_question) {
            let k = pool[pick];
            out.push(QAPair {
                question: question.clone(),
                answer: country_answer(&countries[k].name, &country.name),
                label: Label::Negative,
                dataset: DatasetKind::Country,
                seed,
                draw_index,
                ratio_infeasible,
            });
            draw_index += 1;
        }
    }
    Ok(out)
}

/// Proximity-question records. One question per city with at least one
/// in-range neighbor; one positive per neighbor; per question at most
/// `max_neg_ratio × positives` negatives drawn from the out-of-range
/// cities. `country_names` maps country codes to display names (codes are
/// used verbatim when unmapped). Deterministic given (graph, ratio, seed).
pub fn gen_city_pairs(
    cities: &[CityNode],
    graph: &SpatialGraph,
    country_names: &BTreeMap<String, String>,
    max_neg_ratio: f64,
    master_seed: u64,
) -> Result<Vec<QAPair>> {
    if graph.node_count != cities.len() {
        return Err(Error::Config(format!(
            "city graph has {} nodes but {} city records were supplied",
            graph.node_count,
            cities.len()
        )));
    }
    if !(max_neg_ratio >= 0.0) {
        return Err(Error::Config("max_neg_ratio must be non-negative".into()));
    }
    let name_of = |city: &CityNode| -> String {
        country_names.get(&city.country_code).cloned().unwrap_or_else(|| city.country_code.clone())
    };
    let adjacency = graph.adjacency();
    let mut out = Vec::new();
    for (i, city) in cities.iter().enumerate() {
        let mut neighbors: Vec<usize> = adjacency[i].iter().copied().collect();
        neighbors.sort_unstable();
        if neighbors.is_empty() {
            continue;
        }
        let neighbor_set: std::collections::BTreeSet<usize> = neighbors.iter().copied().collect();
        let pool: Vec<usize> =
            (0..cities.len()).filter(|&j| j != i && !neighbor_set.contains(&j)).collect();
        let want = (max_neg_ratio * neighbors.len() as f64).floor() as usize;
        let ratio_infeasible = pool.len() < want;

        let id = city.geoname_id.to_string();
        let seed = stable_seed(master_seed, &["city", &id]);
        let mut rng = rng_for(master_seed, &["city", &id]);
        let country_i = name_of(city);
        let question = city_question(&city.name, &country_i);
        let mut draw_index = 0usize;

        for &j in &neighbors {
            out.push(QAPair {
                question: question.clone(),
                answer: city_answer(&cities[j].name, &name_of(&cities[j]), &city.name, &country_i),
                label: Label::Positive,
                dataset: DatasetKind::City,
                seed,
                draw_index,
                ratio_infeasible,
            });
            draw_index += 1;
        }
        for pick in sample_indices(&mut rng, pool.len(), want) {
            let k = pool[pick];
            out.push(QAPair {
                question: question.clone(),
                answer: city_answer(&cities[k].name, &name_of(&cities[k]), &city.name, &country_i),
                label: Label::Negative,
                dataset: DatasetKind::City,
                seed,
                draw_index,
                ratio_infeasible,
            });
            draw_index += 1;
        }
    }
    Ok(out)
}

/// Write records as newline-delimited JSON.
pub fn write_pairs(path: &Path, pairs: &[QAPair]) -> Result<()> {
    let mut buf = String::new();
    for pair in pairs {
        buf.push_str(&serde_json::to_string(pair)?);
        buf.push('\n');
    }
    crate::util::atomic_write(path, buf.as_bytes())
}

pub fn read_pairs(path: &Path) -> Result<Vec<QAPair>> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    data.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
