//! Batch orchestration of the per-toponym pipeline: search → chunk/index →
//! rank → prompt → generate, with every stage cached on disk so reruns and
//! crash-resumes reuse completed work byte-for-byte.
//!
//! Layout under the cache dir:
//!
//! ```text
//! snapshots/                         shared across runs, keyed by root name
//! runs/<config_hash>/
//!   manifest.json                    per-entry statuses + artifact paths
//!   entries/<entry_key>/
//!     entry.json documents.json index/ ranked.json
//!     prompt.json generations.json outcome.json status.json
//! ```
//!
//! Entries are processed independently (their artifacts depend only on the
//! entry's own content plus the configuration), so input order and
//! concurrency width never change any artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::encoder::{encoder_from_spec, Encoder};
use crate::error::{Error, Result};
use crate::eval::{aggregate, rank_grid, Channel, MetricsReport, QueryMeta, RelevanceJudgment};
use crate::generate::{
    assemble_prompt, call_generator, parse_generation, AssembledPrompt, CandidateDoc,
    GenOutcome, GenParams, GenerationRecord, GeneratorBackend, PromptSpec,
    DEFAULT_IN_CONTEXT_EXAMPLE,
};
use crate::index::{build_index, chunk_by_subject, default_n_clusters, ClusteredIndex, TripleDocument};
use crate::rank::{default_probe_clusters, rank_top_k, RankedCandidate};
use crate::search::cache::SnapshotCache;
use crate::search::query::RelationFilter;
use crate::search::{KGSnapshot, SearchClient};
use crate::toponym::{build_anchor_question, AnchorQuestion, GazetteerEntry};
use crate::util::{atomic_write, stable_seed};

/// Terminal state of one entry, mirroring the run-accounting rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    /// The searcher returned an empty graph for the root name.
    NoKg,
    SearchError,
    EncodeError,
    GenerateError,
}

impl EntryStatus {
    pub fn is_terminal_success(self) -> bool {
        matches!(self, EntryStatus::Ok | EntryStatus::NoKg)
    }
}

/// One entry's outcome: status, error detail if any, and the relative path
/// of every completed stage artifact (relative to the cache dir).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResult {
    pub key: String,
    pub raw_name: String,
    pub root_name: String,
    pub status: EntryStatus,
    pub error: Option<String>,
    pub artifacts: BTreeMap<String, String>,
    pub completed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub generated_at: DateTime<Utc>,
    /// Sorted by entry key.
    pub entries: Vec<EntryResult>,
}

impl RunManifest {
    pub fn count(&self, status: EntryStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&data)?)
    }
}

/// Everything written alongside the entry so a run is auditable without
/// re-deriving anything.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntryRecord {
    key: String,
    entry: GazetteerEntry,
    anchor_question: String,
}

fn now(cfg: &PipelineConfig) -> DateTime<Utc> {
    cfg.run.fixed_time.unwrap_or_else(Utc::now)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    match std::fs::read_to_string(path) {
        Ok(data) => Ok(serde_json::from_str(&data).ok()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Shared, read-only context for one run.
struct RunCtx<'a> {
    cfg: &'a PipelineConfig,
    config_hash: String,
    run_dir: PathBuf,
    snapshots: SnapshotCache,
    client: SearchClient,
    encoder: Box<dyn Encoder>,
    backend: GeneratorBackend,
    f_rel: RelationFilter,
}

impl<'a> RunCtx<'a> {
    fn new(cfg: &'a PipelineConfig) -> Result<RunCtx<'a>> {
        cfg.validate()?;
        let config_hash = cfg.config_hash();
        let run_dir = cfg.run.cache_dir.join("runs").join(&config_hash);
        let mut client = SearchClient::new(&cfg.endpoints.sparql, cfg.retry.clone());
        client.fixed_time = cfg.run.fixed_time;
        Ok(RunCtx {
            cfg,
            config_hash,
            run_dir,
            snapshots: SnapshotCache::new(cfg.run.cache_dir.join("snapshots")),
            client,
            encoder: encoder_from_spec(
                &cfg.endpoints.encoder,
                cfg.index.encoder_dim,
                cfg.index.encoder_max_len,
            )?,
            backend: cfg.endpoints.generator.parse()?,
            f_rel: RelationFilter::default_f_rel(),
        })
    }

    fn entry_dir(&self, key: &str) -> PathBuf {
        self.run_dir.join("entries").join(key)
    }

    fn rel_entry(&self, key: &str, file: &str) -> String {
        format!("runs/{}/entries/{}/{}", self.config_hash, key, file)
    }
}

/// Per-entry stage walker: each accessor loads the stage artifact if it is
/// already on disk and only otherwise computes it (calling backends), so a
/// fully cached entry is replayed with zero backend traffic.
struct EntryCtx<'a> {
    run: &'a RunCtx<'a>,
    key: &'a str,
    entry: &'a GazetteerEntry,
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
    snapshot: Option<KGSnapshot>,
    documents: Option<Vec<TripleDocument>>,
    index: Option<ClusteredIndex>,
    ranked: Option<Vec<RankedCandidate>>,
    prompt: Option<AssembledPrompt>,
}

impl<'a> EntryCtx<'a> {
    fn new(run: &'a RunCtx<'a>, key: &'a str, entry: &'a GazetteerEntry) -> Self {
        EntryCtx {
            run,
            key,
            entry,
            dir: run.entry_dir(key),
            artifacts: BTreeMap::new(),
            snapshot: None,
            documents: None,
            index: None,
            ranked: None,
            prompt: None,
        }
    }

    fn mark(&mut self, stage: &str, file: &str) {
        self.artifacts.insert(stage.to_string(), self.run.rel_entry(self.key, file));
    }

    fn anchor(&self) -> Result<AnchorQuestion> {
        build_anchor_question(&self.entry.toponym)
    }

    fn write_entry_record(&mut self) -> Result<()> {
        let anchor = self.anchor()?;
        let path = self.dir.join("entry.json");
        if read_json::<EntryRecord>(&path)?.is_none() {
            let record = EntryRecord {
                key: self.key.to_string(),
                entry: self.entry.clone(),
                anchor_question: anchor.text,
            };
            write_json(&path, &record)?;
        }
        self.mark("entry", "entry.json");
        Ok(())
    }

    fn snapshot(&mut self) -> Result<&KGSnapshot> {
        if self.snapshot.is_none() {
            let root = &self.entry.toponym.root_name;
            let cached = match self.run.snapshots.load(root) {
                Ok(found) => found,
                // A corrupt cache entry is refetched, not fatal.
                Err(_) => None,
            };
            let snapshot = match cached {
                Some(s) => s,
                None => {
                    let s = self.run.client.fetch_snapshot(
                        root,
                        &self.run.f_rel,
                        self.run.cfg.search.k_searcher,
                        self.run.cfg.search.max_subjects,
                    )?;
                    self.run.snapshots.store(&s)?;
                    s
                }
            };
            let doc_name = self
                .run
                .snapshots
                .document_path(root)
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            self.artifacts.insert("snapshot".into(), format!("snapshots/{doc_name}"));
            self.snapshot = Some(snapshot);
        }
        Ok(self.snapshot.as_ref().unwrap())
    }

    fn documents(&mut self) -> Result<&[TripleDocument]> {
        if self.documents.is_none() {
            let path = self.dir.join("documents.json");
            let docs = match read_json::<Vec<TripleDocument>>(&path)? {
                Some(docs) if !docs.is_empty() => docs,
                _ => {
                    let cap = self.run.cfg.index.doc_token_cap;
                    let encoder = self.run.encoder.as_ref();
                    let docs = {
                        let snapshot = self.snapshot()?;
                        chunk_by_subject(snapshot, encoder, cap)?
                    };
                    write_json(&path, &docs)?;
                    docs
                }
            };
            self.mark("documents", "documents.json");
            self.documents = Some(docs);
        }
        Ok(self.documents.as_ref().unwrap())
    }

    fn index(&mut self) -> Result<&ClusteredIndex> {
        if self.index.is_none() {
            let dir = self.dir.join("index");
            let index = match ClusteredIndex::load(&dir) {
                Ok(index) => index,
                Err(_) => {
                    let docs = self.documents()?.to_vec();
                    let n_clusters = self
                        .run
                        .cfg
                        .index
                        .clusters
                        .resolve(default_n_clusters(docs.len()));
                    let seed =
                        stable_seed(self.run.cfg.run.master_seed, &["entry", self.key]);
                    let index =
                        build_index(&docs, self.run.encoder.as_ref(), n_clusters, seed)?;
                    index.save(&dir)?;
                    index
                }
            };
            self.mark("index", "index");
            self.index = Some(index);
        }
        Ok(self.index.as_ref().unwrap())
    }

    fn ranked(&mut self) -> Result<&[RankedCandidate]> {
        if self.ranked.is_none() {
            let path = self.dir.join("ranked.json");
            let ranked = match read_json::<Vec<RankedCandidate>>(&path)? {
                Some(r) if !r.is_empty() => r,
                _ => {
                    let anchor = self.anchor()?;
                    let k = self.run.cfg.rank.k_ranker;
                    let probe_setting = self.run.cfg.rank.probe_clusters;
                    let encoder = self.run.encoder.as_ref();
                    let index = self.index()?;
                    let probe = probe_setting.resolve(default_probe_clusters(
                        index.docs.len(),
                        index.centroids.len(),
                    ));
                    let ranked = rank_top_k(&anchor, index, encoder, k, probe)?;
                    write_json(&path, &ranked)?;
                    ranked
                }
            };
            self.mark("ranked", "ranked.json");
            self.ranked = Some(ranked);
        }
        Ok(self.ranked.as_ref().unwrap())
    }

    fn prompt(&mut self) -> Result<&AssembledPrompt> {
        if self.prompt.is_none() {
            let path = self.dir.join("prompt.json");
            let prompt = match read_json::<AssembledPrompt>(&path)? {
                Some(p) => p,
                None => {
                    let anchor = self.anchor()?;
                    let gen_cfg = self.run.cfg.generate.clone();
                    let encoder = self.run.encoder.as_ref();
                    let index_path = self.dir.join("index").display().to_string();
                    // Candidate texts come from the indexed documents.
                    let ranked = self.ranked()?.to_vec();
                    let index = self.index()?;
                    let mut candidates = Vec::with_capacity(ranked.len());
                    for c in &ranked {
                        let doc = index
                            .docs
                            .iter()
                            .find(|d| d.doc.subject == c.subject)
                            .ok_or_else(|| Error::CorruptIndex {
                                path: index_path.clone(),
                                reason: format!(
                                    "ranked subject {} is not in the index",
                                    c.subject
                                ),
                            })?;
                        candidates.push(CandidateDoc {
                            subject: c.subject.clone(),
                            text: doc.doc.text.clone(),
                            score: c.score,
                            rank: c.rank,
                        });
                    }
                    let spec = PromptSpec {
                        anchor,
                        candidates,
                        ordering: gen_cfg.ordering,
                        token_budget: gen_cfg.prompt_token_budget,
                        in_context_example: gen_cfg
                            .in_context_example
                            .unwrap_or_else(|| DEFAULT_IN_CONTEXT_EXAMPLE.to_string()),
                    };
                    let prompt = assemble_prompt(&spec, &|t| encoder.token_count(t))?;
                    write_json(&path, &prompt)?;
                    prompt
                }
            };
            self.mark("prompt", "prompt.json");
            self.prompt = Some(prompt);
        }
        Ok(self.prompt.as_ref().unwrap())
    }

    fn generations(&mut self) -> Result<Vec<GenerationRecord>> {
        let path = self.dir.join("generations.json");
        let k = self.run.cfg.generate.k_generator;
        if let Some(records) = read_json::<Vec<GenerationRecord>>(&path)? {
            if records.len() == k {
                self.mark("generations", "generations.json");
                return Ok(records);
            }
        }
        let prompt_text = self.prompt()?.text.clone();
        let mut records = Vec::with_capacity(k);
        for i in 0..k {
            let params = GenParams {
                max_new_tokens: self.run.cfg.generate.max_new_tokens,
                temperature: self.run.cfg.generate.temperature,
                seed: self.run.cfg.generate.seed.wrapping_add(i as u64),
            };
            records.push(call_generator(
                &self.run.backend,
                &prompt_text,
                &params,
                &self.run.cfg.retry,
            )?);
        }
        write_json(&path, &records)?;
        self.mark("generations", "generations.json");
        Ok(records)
    }

    fn outcome(&mut self, generations: &[GenerationRecord]) -> Result<GenOutcome> {
        let path = self.dir.join("outcome.json");
        if let Some(outcome) = read_json::<GenOutcome>(&path)? {
            self.mark("outcome", "outcome.json");
            return Ok(outcome);
        }
        let subjects: Vec<String> =
            self.ranked()?.iter().map(|c| c.subject.clone()).collect();
        let text = generations.first().map(|g| g.text.as_str()).unwrap_or("");
        let outcome = parse_generation(text, &subjects);
        write_json(&path, &outcome)?;
        self.mark("outcome", "outcome.json");
        Ok(outcome)
    }
}

/// Run every stage for one entry, classifying any failure by the stage it
/// happened in. Never panics the batch: errors become the entry's status.
fn process_entry(run: &RunCtx<'_>, key: &str, entry: &GazetteerEntry) -> EntryResult {
    let dir = run.entry_dir(key);
    let status_path = dir.join("status.json");
    if let Ok(Some(prev)) = read_json::<EntryResult>(&status_path) {
        if prev.key == key && prev.status.is_terminal_success() {
            return prev;
        }
    }

    let mut ctx = EntryCtx::new(run, key, entry);
    let (status, error) = drive_entry(&mut ctx);
    let result = EntryResult {
        key: key.to_string(),
        raw_name: entry.toponym.raw_name.clone(),
        root_name: entry.toponym.root_name.clone(),
        status,
        error,
        artifacts: ctx.artifacts,
        completed_at: now(run.cfg),
    };
    // Best-effort: the manifest still records the result if this write fails.
    let _ = write_json(&status_path, &result);
    result
}

fn drive_entry(ctx: &mut EntryCtx<'_>) -> (EntryStatus, Option<String>) {
    if let Err(e) = ctx.write_entry_record() {
        return (EntryStatus::SearchError, Some(format!("entry record: {e}")));
    }
    match ctx.snapshot() {
        Ok(s) if s.triples.is_empty() => return (EntryStatus::NoKg, None),
        Ok(_) => {}
        Err(e) => return (EntryStatus::SearchError, Some(e.to_string())),
    }
    if let Err(e) = ctx.documents() {
        return (EntryStatus::EncodeError, Some(e.to_string()));
    }
    if let Err(e) = ctx.index() {
        return (EntryStatus::EncodeError, Some(e.to_string()));
    }
    if let Err(e) = ctx.ranked() {
        return (EntryStatus::EncodeError, Some(e.to_string()));
    }
    if let Err(e) = ctx.prompt() {
        return (EntryStatus::GenerateError, Some(e.to_string()));
    }
    let generations = match ctx.generations() {
        Ok(g) => g,
        Err(e) => return (EntryStatus::GenerateError, Some(e.to_string())),
    };
    match ctx.outcome(&generations) {
        Ok(_) => (EntryStatus::Ok, None),
        Err(e) => (EntryStatus::GenerateError, Some(e.to_string())),
    }
}

/// Deduplicate entries by key, rejecting rows that collide on key but
/// differ in content (the survivor would otherwise depend on input order).
fn dedupe_entries(entries: &[GazetteerEntry]) -> Result<Vec<(String, &GazetteerEntry)>> {
    let mut by_key: BTreeMap<String, &GazetteerEntry> = BTreeMap::new();
    for entry in entries {
        let key = entry.toponym.entry_key();
        match by_key.get(&key) {
            Some(prev) if *prev != entry => {
                return Err(Error::Config(format!(
                    "gazetteer rows conflict under entry key {key}: same toponym, different origin fields"
                )));
            }
            Some(_) => {}
            None => {
                by_key.insert(key, entry);
            }
        }
    }
    Ok(by_key.into_iter().collect())
}

/// Run the batch. Each entry is processed independently; failures are
/// recorded per entry and never abort the batch. Completed stages found on
/// disk are reused, so a rerun over a finished cache performs no backend
/// calls and a killed run resumes where it stopped.
pub fn run_pipeline(entries: &[GazetteerEntry], cfg: &PipelineConfig) -> Result<RunManifest> {
    let run = RunCtx::new(cfg)?;
    let work = dedupe_entries(entries)?;

    let results: Mutex<BTreeMap<String, EntryResult>> = Mutex::new(BTreeMap::new());
    let next = AtomicUsize::new(0);
    let width = cfg.run.concurrency.min(work.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..width {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((key, entry)) = work.get(i) else { break };
                let result = process_entry(&run, key, entry);
                results.lock().unwrap().insert(key.clone(), result);
            });
        }
    });

    let manifest = RunManifest {
        config_hash: run.config_hash.clone(),
        generated_at: now(cfg),
        entries: results.into_inner().unwrap().into_values().collect(),
    };
    write_json(&run.run_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Where a report run left its files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportPaths {
    pub report: PathBuf,
    /// One per-rank relevance grid per channel.
    pub grids: BTreeMap<String, PathBuf>,
}

/// Collect the ranked lists referenced by a manifest into query → items.
pub fn manifest_rankings(
    manifest: &RunManifest,
    cache_dir: &Path,
) -> Result<BTreeMap<String, Vec<String>>> {
    let mut rankings = BTreeMap::new();
    for entry in &manifest.entries {
        let Some(rel) = entry.artifacts.get("ranked") else { continue };
        let path = cache_dir.join(rel);
        let ranked: Vec<RankedCandidate> = match read_json(&path)? {
            Some(r) => r,
            None => {
                return Err(Error::CorruptIndex {
                    path: path.display().to_string(),
                    reason: "manifest references a ranked list that does not parse".into(),
                })
            }
        };
        rankings.insert(
            entry.key.clone(),
            ranked.into_iter().map(|c| c.subject).collect(),
        );
    }
    Ok(rankings)
}

/// Score a finished run against relevance judgments and write the metrics
/// report plus one per-rank relevance grid per channel.
pub fn emit_report(
    manifest: &RunManifest,
    judgments: &[RelevanceJudgment],
    meta: &[QueryMeta],
    cache_dir: &Path,
    k: usize,
    out_dir: &Path,
) -> Result<(MetricsReport, ReportPaths)> {
    let rankings = manifest_rankings(manifest, cache_dir)?;
    let report = aggregate(judgments, &rankings, meta, k)?;
    let report_path = out_dir.join("report.json");
    write_json(&report_path, &report)?;

    let mut grids = BTreeMap::new();
    for channel in Channel::ALL {
        let grid = rank_grid(judgments, &rankings, channel, k)?;
        let mut csv = String::from("query_id");
        for r in 1..=k {
            csv.push_str(&format!(",r{r}"));
        }
        csv.push('\n');
        for row in &grid.rows {
            csv.push_str(&row.query_id);
            for cell in &row.cells {
                csv.push_str(&format!(",{cell}"));
            }
            csv.push('\n');
        }
        let path = out_dir.join(format!("grid_{}.csv", channel.name()));
        atomic_write(&path, csv.as_bytes())?;
        grids.insert(channel.name().to_string(), path);
    }
    Ok((report, ReportPaths { report: report_path, grids }))
}
