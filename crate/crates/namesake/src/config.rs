//! Declarative pipeline configuration: one TOML file, environment overrides
//! for the endpoint URLs, and a content hash over every artifact-affecting
//! field so runs with the same effective configuration share a cache
//! directory.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::DocOrdering;
use crate::search::RetryPolicy;
use crate::util::sha256_hex;

/// Environment variables that override the corresponding endpoint fields.
pub const ENV_SPARQL_URL: &str = "NAMESAKE_SPARQL_URL";
pub const ENV_ENCODER_URL: &str = "NAMESAKE_ENCODER_URL";
pub const ENV_GENERATOR_URL: &str = "NAMESAKE_GENERATOR_URL";

/// Either an explicit count or "let the library pick".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutoOr {
    Auto,
    Fixed(usize),
}

impl AutoOr {
    pub fn resolve(self, auto: usize) -> usize {
        match self {
            AutoOr::Auto => auto,
            AutoOr::Fixed(n) => n,
        }
    }
}

impl std::str::FromStr for AutoOr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AutoOr::Auto);
        }
        s.parse::<usize>().map(AutoOr::Fixed).map_err(|_| {
            Error::Config(format!("expected \"auto\" or a non-negative integer, got {s:?}"))
        })
    }
}

impl Serialize for AutoOr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for AutoOr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = AutoOr;
            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "\"auto\" or a non-negative integer")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<AutoOr, E> {
                if v == "auto" {
                    Ok(AutoOr::Auto)
                } else {
                    Err(E::custom(format!("expected \"auto\" or an integer, got {v:?}")))
                }
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<AutoOr, E> {
                Ok(AutoOr::Fixed(v as usize))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<AutoOr, E> {
                if v < 0 {
                    return Err(E::custom("count cannot be negative"));
                }
                Ok(AutoOr::Fixed(v as usize))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    /// SPARQL endpoint URL.
    pub sparql: String,
    /// Encoder backend: `http(s)://…` or `hash:<dim>[:<seed>]`.
    pub encoder: String,
    /// Generator backend: `http(s)://…` or `script:<path>`.
    pub generator: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            sparql: "https://dbpedia.org/sparql".into(),
            encoder: "hash:64".into(),
            generator: "http://127.0.0.1:8080/generate".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    pub k_searcher: usize,
    pub max_subjects: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings { k_searcher: 10_000, max_subjects: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexSettings {
    pub doc_token_cap: usize,
    pub clusters: AutoOr,
    pub encoder_dim: usize,
    pub encoder_max_len: usize,
}

impl Default for IndexSettings {
    fn default() -> Self {
        IndexSettings {
            doc_token_cap: crate::index::DOC_TOKEN_CAP,
            clusters: AutoOr::Auto,
            encoder_dim: 64,
            encoder_max_len: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankSettings {
    pub k_ranker: usize,
    pub probe_clusters: AutoOr,
}

impl Default for RankSettings {
    fn default() -> Self {
        RankSettings { k_ranker: 10, probe_clusters: AutoOr::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSettings {
    pub k_generator: usize,
    pub prompt_token_budget: usize,
    pub ordering: DocOrdering,
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
    /// `None` uses the built-in worked example.
    pub in_context_example: Option<String>,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        GenerateSettings {
            k_generator: 1,
            prompt_token_budget: crate::generate::DEFAULT_TOKEN_BUDGET,
            ordering: DocOrdering::TailBest,
            max_new_tokens: 256,
            temperature: 0.0,
            seed: 0,
            in_context_example: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairSettings {
    /// Minimum city population for the spatial datasets.
    pub n_hab: u64,
    /// City neighborhood radius in kilometres.
    pub d_city_km: f64,
    /// Negatives per country question.
    pub neg_per_question: usize,
    /// Cap on negatives per city question, as a multiple of its positives.
    pub max_neg_ratio: f64,
}

impl Default for PairSettings {
    fn default() -> Self {
        PairSettings { n_hab: 50_000, d_city_km: 50.0, neg_per_question: 100, max_neg_ratio: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    /// Root for snapshots, run artifacts, and manifests.
    pub cache_dir: PathBuf,
    pub master_seed: u64,
    /// Concurrent entry width.
    pub concurrency: usize,
    /// Pin all recorded timestamps (RFC 3339) for reproducible artifacts.
    pub fixed_time: Option<DateTime<Utc>>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            cache_dir: PathBuf::from("cache"),
            master_seed: 0,
            concurrency: 4,
            fixed_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub endpoints: Endpoints,
    pub search: SearchSettings,
    pub index: IndexSettings,
    pub rank: RankSettings,
    pub generate: GenerateSettings,
    pub pairs: PairSettings,
    pub run: RunSettings,
    pub retry: RetryPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            endpoints: Endpoints::default(),
            search: SearchSettings::default(),
            index: IndexSettings::default(),
            rank: RankSettings::default(),
            generate: GenerateSettings::default(),
            pairs: PairSettings::default(),
            run: RunSettings::default(),
            retry: RetryPolicy::default(),
        }
    }
}

/// The artifact-affecting view of the configuration: everything except
/// where the cache lives and how transport failures are retried. Hashing
/// this (not the whole config) means moving the cache or loosening retry
/// limits still reuses prior artifacts.
#[derive(Serialize)]
struct HashedView<'a> {
    endpoints: &'a Endpoints,
    search: &'a SearchSettings,
    index: &'a IndexSettings,
    rank: &'a RankSettings,
    generate: &'a GenerateSettings,
    pairs: &'a PairSettings,
    master_seed: u64,
    fixed_time: &'a Option<DateTime<Utc>>,
}

impl PipelineConfig {
    pub fn from_toml_str(data: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(data).map_err(|e| Error::Config(format!("config file: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&data)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize config: {e}")))
    }

    /// Apply endpoint overrides through a lookup (injected for testability;
    /// [`PipelineConfig::apply_env`] wires it to the process environment).
    pub fn apply_overrides(&mut self, get: &dyn Fn(&str) -> Option<String>) {
        if let Some(v) = get(ENV_SPARQL_URL) {
            self.endpoints.sparql = v;
        }
        if let Some(v) = get(ENV_ENCODER_URL) {
            self.endpoints.encoder = v;
        }
        if let Some(v) = get(ENV_GENERATOR_URL) {
            self.endpoints.generator = v;
        }
    }

    pub fn apply_env(&mut self) {
        self.apply_overrides(&|name| std::env::var(name).ok());
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("search.k_searcher", self.search.k_searcher),
            ("search.max_subjects", self.search.max_subjects),
            ("index.doc_token_cap", self.index.doc_token_cap),
            ("index.encoder_max_len", self.index.encoder_max_len),
            ("rank.k_ranker", self.rank.k_ranker),
            ("generate.k_generator", self.generate.k_generator),
            ("generate.prompt_token_budget", self.generate.prompt_token_budget),
            ("generate.max_new_tokens", self.generate.max_new_tokens),
            ("run.concurrency", self.run.concurrency),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.index.encoder_dim < 2 {
            return Err(Error::Config("index.encoder_dim must be >= 2".into()));
        }
        if let AutoOr::Fixed(0) = self.index.clusters {
            return Err(Error::Config("index.clusters must be \"auto\" or >= 1".into()));
        }
        if let AutoOr::Fixed(0) = self.rank.probe_clusters {
            return Err(Error::Config("rank.probe_clusters must be \"auto\" or >= 1".into()));
        }
        if !(self.pairs.d_city_km.is_finite() && self.pairs.d_city_km > 0.0) {
            return Err(Error::Config("pairs.d_city_km must be positive".into()));
        }
        if !(self.pairs.max_neg_ratio.is_finite() && self.pairs.max_neg_ratio >= 0.0) {
            return Err(Error::Config("pairs.max_neg_ratio must be non-negative".into()));
        }
        if !self.generate.temperature.is_finite() || self.generate.temperature < 0.0 {
            return Err(Error::Config("generate.temperature must be non-negative".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::Config("retry.max_attempts must be at least 1".into()));
        }
        Ok(())
    }

    /// Short content hash over the artifact-affecting fields.
    pub fn config_hash(&self) -> String {
        let view = HashedView {
            endpoints: &self.endpoints,
            search: &self.search,
            index: &self.index,
            rank: &self.rank,
            generate: &self.generate,
            pairs: &self.pairs,
            master_seed: self.run.master_seed,
            fixed_time: &self.run.fixed_time,
        };
        let json = serde_json::to_string(&view).expect("config serializes");
        sha256_hex(json.as_bytes())[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_experiment_shape() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.search.k_searcher, 10_000);
        assert_eq!(cfg.search.max_subjects, 1_000);
        assert_eq!(cfg.rank.k_ranker, 10);
        assert_eq!(cfg.generate.k_generator, 1);
        assert_eq!(cfg.index.doc_token_cap, 256);
        assert_eq!(cfg.generate.prompt_token_budget, 4096);
        assert_eq!(cfg.pairs.n_hab, 50_000);
        assert_eq!(cfg.pairs.d_city_km, 50.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let mut cfg = PipelineConfig::default();
        cfg.endpoints.sparql = "http://localhost:3030/ds/sparql".into();
        cfg.index.clusters = AutoOr::Fixed(7);
        cfg.generate.in_context_example = Some("For example ...".into());
        cfg.run.fixed_time = Some("2024-05-04T12:00:00Z".parse().unwrap());
        cfg.run.cache_dir = PathBuf::from("/tmp/somewhere");

        let text = cfg.to_toml_string().unwrap();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);

        // And a second trip is byte-stable.
        assert_eq!(back.to_toml_string().unwrap(), text);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = PipelineConfig::from_toml_str(
            "[endpoints]\nsparql = \"http://x/sparql\"\nencoder = \"hash:8\"\ngenerator = \"script:./g\"\n\n[rank]\nk_ranker = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.endpoints.sparql, "http://x/sparql");
        assert_eq!(cfg.rank.k_ranker, 3);
        assert_eq!(cfg.search.k_searcher, 10_000);
    }

    #[test]
    fn auto_or_accepts_auto_and_integers() {
        let cfg =
            PipelineConfig::from_toml_str("[index]\nclusters = \"auto\"\n").unwrap();
        assert_eq!(cfg.index.clusters, AutoOr::Auto);
        let cfg = PipelineConfig::from_toml_str("[index]\nclusters = 12\n").unwrap();
        assert_eq!(cfg.index.clusters, AutoOr::Fixed(12));
        assert!(PipelineConfig::from_toml_str("[index]\nclusters = \"many\"\n").is_err());
        assert_eq!(AutoOr::Auto.resolve(5), 5);
        assert_eq!(AutoOr::Fixed(2).resolve(5), 2);
    }

    #[test]
    fn validation_rejects_zero_knobs() {
        let mut cfg = PipelineConfig::default();
        cfg.rank.k_ranker = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.index.clusters = AutoOr::Fixed(0);
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.pairs.d_city_km = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.generate.prompt_token_budget = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn env_overrides_hit_only_endpoints() {
        let mut cfg = PipelineConfig::default();
        let overrides = |name: &str| match name {
            ENV_SPARQL_URL => Some("http://mock:1/sparql".to_string()),
            ENV_GENERATOR_URL => Some("script:/tmp/gen.sh".to_string()),
            _ => None,
        };
        cfg.apply_overrides(&overrides);
        assert_eq!(cfg.endpoints.sparql, "http://mock:1/sparql");
        assert_eq!(cfg.endpoints.generator, "script:/tmp/gen.sh");
        assert_eq!(cfg.endpoints.encoder, "hash:64");
    }

    #[test]
    fn hash_ignores_cache_location_and_retry_but_not_parameters() {
        let base = PipelineConfig::default();
        let h0 = base.config_hash();
        assert_eq!(h0.len(), 16);
        assert!(h0.chars().all(|c| c.is_ascii_hexdigit()));

        let mut moved = base.clone();
        moved.run.cache_dir = PathBuf::from("/somewhere/else");
        moved.retry.max_attempts = 9;
        moved.run.concurrency = 1;
        assert_eq!(moved.config_hash(), h0);

        let mut changed = base.clone();
        changed.rank.k_ranker = 5;
        assert_ne!(changed.config_hash(), h0);

        let mut reseeded = base;
        reseeded.run.master_seed = 99;
        assert_ne!(reseeded.config_hash(), h0);
    }
}
