//! Command-line front end for the namesake pipeline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use namesake::config::{AutoOr, PipelineConfig};
use namesake::encoder::encoder_from_spec;
use namesake::error::{Error, Result};
use namesake::eval::{aggregate, load_judgments, load_meta, rank_grid, Channel};
use namesake::generate::{
    assemble_prompt, call_generator, parse_generation, CandidateDoc, DocOrdering, GenParams,
    GeneratorBackend, PromptSpec, DEFAULT_IN_CONTEXT_EXAMPLE, DEFAULT_TOKEN_BUDGET,
};
use namesake::geo::{
    build_city_graph, build_country_graph, parse_city_table, parse_country_table, read_edges,
    write_edges, CityNode, CountryNode,
};
use namesake::index::{build_index, chunk_by_subject, default_n_clusters, ClusteredIndex};
use namesake::pairs::{gen_city_pairs, gen_country_pairs, write_pairs};
use namesake::pipeline::{emit_report, run_pipeline, EntryStatus, RunManifest};
use namesake::qald::{build_qald9_dataset, load_qald9, write_records, Qald9Limits};
use namesake::rank::{default_probe_clusters, rank_top_k, RankedCandidate};
use namesake::search::cache::SnapshotCache;
use namesake::search::query::RelationFilter;
use namesake::search::{RetryPolicy, SearchClient};
use namesake::toponym::{
    build_anchor_question, load_gazetteer, AnchorQuestion, GazetteerEntry, RootNameConfig,
    TableFormat,
};
use namesake::util::{atomic_write, encode_filename};

#[derive(Parser)]
#[command(
    name = "namesake",
    version,
    about = "Identify candidate origins of place names with retrieval-augmented generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gazetteer ingestion.
    Gazetteer {
        #[command(subcommand)]
        cmd: GazetteerCmd,
    },
    /// Spatial graphs from GeoNames dumps.
    Geo {
        #[command(subcommand)]
        cmd: GeoCmd,
    },
    /// Fine-tuning dataset synthesis.
    Pairs {
        #[command(subcommand)]
        cmd: PairsCmd,
    },
    /// Knowledge-graph snapshot extraction.
    Search {
        #[command(subcommand)]
        cmd: SearchCmd,
    },
    /// Document chunking and clustered embedding indexes.
    Index {
        #[command(subcommand)]
        cmd: IndexCmd,
    },
    /// Late-interaction ranking against an anchor question.
    Rank {
        #[command(subcommand)]
        cmd: RankCmd,
    },
    /// Prompt assembly and generation.
    Generate {
        #[command(subcommand)]
        cmd: GenerateCmd,
    },
    /// Metrics over ranked lists and relevance judgments.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// The whole per-toponym pipeline over a gazetteer.
    RunAll(RunAllArgs),
}

#[derive(Subcommand)]
enum GazetteerCmd {
    /// Parse a gazetteer table; emit entries with anchor questions as NDJSON.
    Load {
        /// Input table path.
        #[arg(long)]
        input: PathBuf,
        /// Table format.
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: TableFormat,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GeoCmd {
    /// Build the country-adjacency and city-proximity graphs.
    BuildGraphs {
        /// GeoNames countryInfo table.
        #[arg(long)]
        countries: PathBuf,
        /// GeoNames cities table (19 tab-separated columns).
        #[arg(long)]
        cities: PathBuf,
        /// Minimum city population.
        #[arg(long, default_value_t = 50_000)]
        n_hab: u64,
        /// City neighborhood radius (km).
        #[arg(long, default_value_t = 50.0)]
        d_city_km: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PairsCmd {
    /// Generate one of the fine-tuning datasets.
    Gen(PairsGenArgs),
}

#[derive(Args)]
struct PairsGenArgs {
    /// Which dataset: country, city, or qald9.
    #[arg(long)]
    dataset: String,
    /// Master seed for negative sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Negatives per question (country) or per-positive cap (city).
    #[arg(long)]
    neg_ratio: Option<f64>,
    /// Directory produced by `geo build-graphs` (country/city datasets).
    #[arg(long)]
    graphs: Option<PathBuf>,
    /// Benchmark question file (qald9 dataset).
    #[arg(long)]
    qald: Option<PathBuf>,
    /// SPARQL endpoint (qald9 dataset).
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    k_searcher: usize,
    #[arg(long, default_value_t = 1_000)]
    max_subjects: usize,
    /// Output directory; the dataset's standard file name goes inside it.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SearchCmd {
    /// Fetch and cache one snapshot per distinct root name.
    Run {
        /// Gazetteer table with the names to search.
        #[arg(long)]
        names: PathBuf,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: TableFormat,
        /// SPARQL endpoint URL.
        #[arg(long)]
        endpoint: String,
        #[arg(long, default_value_t = 10_000)]
        k_searcher: usize,
        #[arg(long, default_value_t = 1_000)]
        max_subjects: usize,
        /// Snapshot cache directory.
        #[arg(long)]
        cache: PathBuf,
    },
}

#[derive(Subcommand)]
enum IndexCmd {
    /// Build one clustered index per cached snapshot.
    Build {
        /// Snapshot cache directory.
        #[arg(long)]
        snapshots: PathBuf,
        /// Encoder backend: http(s)://… or hash:<dim>[:<seed>].
        #[arg(long)]
        encoder_url: String,
        /// Cluster count, or "auto" for ceil(sqrt(#docs)).
        #[arg(long, default_value = "auto", value_parser = AutoOr::from_str)]
        clusters: AutoOr,
        /// Per-document token cap.
        #[arg(long, default_value_t = 256)]
        doc_cap: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 256)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only this root name (all cached snapshots when omitted).
        #[arg(long)]
        name: Option<String>,
        /// Output directory (one subdirectory per root name).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum RankCmd {
    /// Rank an index's documents against a question.
    Run {
        /// The anchor question text.
        #[arg(long)]
        question: String,
        /// Index directory.
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Clusters to probe, or "auto".
        #[arg(long, default_value = "auto", value_parser = AutoOr::from_str)]
        probe: AutoOr,
        #[arg(long, default_value = "hash:64")]
        encoder_url: String,
        #[arg(long, default_value_t = 256)]
        max_len: usize,
        /// Output path for NDJSON records {subject, score, rank} ("-" for stdout).
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Subcommand)]
enum GenerateCmd {
    /// Assemble the prompt for a ranked list and call the generator.
    Run {
        /// Ranked list (JSON array or NDJSON of {subject, score, rank}).
        #[arg(long)]
        ranked: PathBuf,
        /// The anchor question text.
        #[arg(long)]
        question: String,
        /// Index directory holding the candidate documents.
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value = "tail-best", value_parser = DocOrdering::from_str)]
        ordering: DocOrdering,
        /// Generator backend: http(s)://… or script:<path>.
        #[arg(long)]
        backend_url: String,
        #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
        budget: usize,
        #[arg(long, default_value = "hash:64")]
        encoder_url: String,
        #[arg(long, default_value_t = 256)]
        max_new_tokens: usize,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path for {prompt, generation, outcome} ("-" for stdout).
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Score ranked lists against judgments; write a report and grids.
    Run {
        /// Directory of per-query ranked files (<query_id>.json|.ndjson),
        /// or a run manifest.json.
        #[arg(long)]
        rankings: PathBuf,
        /// NDJSON judgments {query_id, item_id, sem, geo_aus, geo_vic}.
        #[arg(long)]
        judgments: PathBuf,
        /// NDJSON metadata {query_id, kg_extracted, origin_mentioned}.
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Output directory.
        #[arg(long, default_value = "eval_out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunAllArgs {
    /// Gazetteer table.
    #[arg(long)]
    gazetteer: PathBuf,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: TableFormat,
    /// Pipeline configuration file (defaults when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also score the run: judgments file.
    #[arg(long)]
    judgments: Option<PathBuf>,
    /// Also score the run: metadata file.
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Report directory (defaults to <cache>/runs/<hash>/report).
    #[arg(long)]
    report_out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<TableFormat> {
    match s.to_ascii_lowercase().as_str() {
        "csv" => Ok(TableFormat::Csv),
        "tsv" => Ok(TableFormat::Tsv),
        other => Err(Error::Config(format!("unknown table format {other:?}"))),
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn emit(out: &str, content: &str) -> Result<()> {
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(content.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))?;
        Ok(())
    } else {
        atomic_write(Path::new(out), content.as_bytes())
    }
}

fn read_ranked_file(path: &Path) -> Result<Vec<RankedCandidate>> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if data.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&data)?);
    }
    data.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn cli_anchor(text: &str) -> AnchorQuestion {
    AnchorQuestion { text: text.to_string(), toponym_ref: "cli".to_string() }
}

fn cmd_gazetteer_load(input: &Path, format: TableFormat, out: Option<&Path>) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Row<'a> {
        key: String,
        #[serde(flatten)]
        entry: &'a GazetteerEntry,
        anchor_question: Option<String>,
    }

    let entries = load_gazetteer(open(input)?, format, &RootNameConfig::default())?;
    let mut buf = String::new();
    let mut missing_context = 0usize;
    for entry in &entries {
        let anchor = match build_anchor_question(&entry.toponym) {
            Ok(a) => Some(a.text),
            Err(_) => {
                missing_context += 1;
                None
            }
        };
        let row = Row { key: entry.toponym.entry_key(), entry, anchor_question: anchor };
        buf.push_str(&serde_json::to_string(&row)?);
        buf.push('\n');
    }
    match out {
        Some(path) => atomic_write(path, buf.as_bytes())?,
        None => print!("{buf}"),
    }
    eprintln!(
        "{} entries ({} without city/country context)",
        entries.len(),
        missing_context
    );
    Ok(())
}

fn write_json_file<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

fn read_json_file<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&data)?)
}

fn cmd_geo_build(
    countries: &Path,
    cities: &Path,
    n_hab: u64,
    d_city_km: f64,
    out: &Path,
) -> Result<()> {
    let country_nodes = parse_country_table(open(countries)?)?;
    let city_nodes = parse_city_table(open(cities)?, n_hab)?;
    let country_graph = build_country_graph(&country_nodes);
    let city_graph = build_city_graph(&city_nodes, d_city_km)?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json_file(&out.join("countries.json"), &country_nodes)?;
    write_json_file(&out.join("cities.json"), &city_nodes)?;
    let mut buf = Vec::new();
    write_edges(&country_graph, &mut buf)?;
    atomic_write(&out.join("country_edges.ndjson"), &buf)?;
    let mut buf = Vec::new();
    write_edges(&city_graph, &mut buf)?;
    atomic_write(&out.join("city_edges.ndjson"), &buf)?;
    write_json_file(
        &out.join("graph_meta.json"),
        &serde_json::json!({
            "n_hab": n_hab,
            "d_city_km": d_city_km,
            "country_nodes": country_nodes.len(),
            "country_edges_directed": country_graph.directed_edge_count(),
            "country_dropped_refs": country_graph.dropped_refs,
            "city_nodes": city_nodes.len(),
            "city_edges_directed": city_graph.directed_edge_count(),
        }),
    )?;
    println!(
        "countries: {} nodes, {} directed border pairs ({} dangling refs dropped)",
        country_nodes.len(),
        country_graph.directed_edge_count(),
        country_graph.dropped_refs
    );
    println!(
        "cities (pop >= {}): {} nodes, {} directed pairs within {} km",
        n_hab,
        city_nodes.len(),
        city_graph.directed_edge_count(),
        d_city_km
    );
    Ok(())
}

fn cmd_pairs_gen(args: &PairsGenArgs) -> Result<()> {
    match args.dataset.as_str() {
        "country" => {
            let graphs = args.graphs.as_deref().ok_or_else(|| {
                Error::Config("--graphs <dir> is required for the country dataset".into())
            })?;
            let countries: Vec<CountryNode> = read_json_file(&graphs.join("countries.json"))?;
            let graph = read_edges(&graphs.join("country_edges.ndjson"), countries.len())?;
            let neg = args.neg_ratio.unwrap_or(100.0);
            if neg < 0.0 || neg.fract() != 0.0 {
                return Err(Error::Config(
                    "--neg-ratio for the country dataset must be a non-negative integer".into(),
                ));
            }
            let pairs = gen_country_pairs(&countries, &graph, neg as usize, args.seed)?;
            let out = args.out.join("ds_geonames_country.ndjson");
            write_pairs(&out, &pairs)?;
            summarize_pairs(&out, &pairs);
        }
        "city" => {
            let graphs = args.graphs.as_deref().ok_or_else(|| {
                Error::Config("--graphs <dir> is required for the city dataset".into())
            })?;
            let cities: Vec<CityNode> = read_json_file(&graphs.join("cities.json"))?;
            let countries: Vec<CountryNode> = read_json_file(&graphs.join("countries.json"))?;
            let graph = read_edges(&graphs.join("city_edges.ndjson"), cities.len())?;
            let names: BTreeMap<String, String> =
                countries.into_iter().map(|c| (c.code, c.name)).collect();
            let ratio = args.neg_ratio.unwrap_or(5.0);
            let pairs = gen_city_pairs(&cities, &graph, &names, ratio, args.seed)?;
            let out = args.out.join("ds_geonames.ndjson");
            write_pairs(&out, &pairs)?;
            summarize_pairs(&out, &pairs);
        }
        "qald9" => {
            let qald = args.qald.as_deref().ok_or_else(|| {
                Error::Config("--qald <file> is required for the qald9 dataset".into())
            })?;
            let endpoint = args.endpoint.as_deref().ok_or_else(|| {
                Error::Config("--endpoint <url> is required for the qald9 dataset".into())
            })?;
            let questions = load_qald9(qald)?;
            let client = SearchClient::new(endpoint, RetryPolicy::default());
            let limits = Qald9Limits {
                per_subject_limit: args.k_searcher,
                k_searcher: args.k_searcher,
                max_subjects: args.max_subjects,
            };
            let (records, stats) = build_qald9_dataset(
                &questions,
                &client,
                &RelationFilter::default_f_rel(),
                &limits,
            )?;
            let out = args.out.join("ds_qald9_rdf.ndjson");
            write_records(&out, &records)?;
            println!(
                "{}: {} questions ({} skipped), {} positives, {} negatives",
                out.display(),
                stats.questions,
                stats.skipped_empty,
                stats.positives,
                stats.negatives
            );
        }
        other => {
            return Err(Error::Config(format!(
                "unknown dataset {other:?}; expected country, city, or qald9"
            )))
        }
    }
    Ok(())
}

fn summarize_pairs(out: &Path, pairs: &[namesake::pairs::QAPair]) {
    use namesake::pairs::Label;
    let positives = pairs.iter().filter(|p| p.label == Label::Positive).count();
    let negatives = pairs.len() - positives;
    let infeasible = pairs.iter().filter(|p| p.ratio_infeasible).count();
    println!(
        "{}: {} records ({} positive, {} negative, {} below the requested ratio)",
        out.display(),
        pairs.len(),
        positives,
        negatives,
        infeasible
    );
}

fn cmd_search_run(
    names: &Path,
    format: TableFormat,
    endpoint: &str,
    k_searcher: usize,
    max_subjects: usize,
    cache_dir: &Path,
) -> Result<()> {
    let entries = load_gazetteer(open(names)?, format, &RootNameConfig::default())?;
    let mut roots: Vec<&str> =
        entries.iter().map(|e| e.toponym.root_name.as_str()).collect();
    roots.sort_unstable();
    roots.dedup();

    let cache = SnapshotCache::new(cache_dir);
    let client = SearchClient::new(endpoint, RetryPolicy::default());
    let f = RelationFilter::default_f_rel();
    let mut failures = 0usize;
    for root in &roots {
        match cache.load(root) {
            Ok(Some(snapshot)) => {
                println!(
                    "{root}\tcached\tsubjects={}\ttriples={}",
                    snapshot.subject_count,
                    snapshot.triples.len()
                );
                continue;
            }
            Ok(None) | Err(_) => {}
        }
        match client.fetch_snapshot(root, &f, k_searcher, max_subjects) {
            Ok(snapshot) => {
                cache.store(&snapshot)?;
                println!(
                    "{root}\tfetched\tsubjects={}\ttriples={}{}",
                    snapshot.subject_count,
                    snapshot.triples.len(),
                    if snapshot.truncated { "\ttruncated" } else { "" }
                );
            }
            Err(e) => {
                failures += 1;
                eprintln!("{root}\terror\t{e}");
            }
        }
    }
    eprintln!("{} root names, {} failures", roots.len(), failures);
    if failures > 0 {
        return Err(Error::Http(format!("{failures} snapshot(s) failed")));
    }
    Ok(())
}

fn cmd_index_build(
    snapshots: &Path,
    encoder_url: &str,
    clusters: AutoOr,
    doc_cap: usize,
    dim: usize,
    max_len: usize,
    seed: u64,
    name: Option<&str>,
    out: &Path,
) -> Result<()> {
    let cache = SnapshotCache::new(snapshots);
    let encoder = encoder_from_spec(encoder_url, dim, max_len)?;
    let roots: Vec<String> = match name {
        Some(n) => vec![n.to_string()],
        None => cache.list()?,
    };
    if roots.is_empty() {
        return Err(Error::Config(format!(
            "no snapshots found under {}",
            snapshots.display()
        )));
    }
    for root in &roots {
        let snapshot = cache.load(root)?.ok_or_else(|| {
            Error::Config(format!("no cached snapshot for root name {root:?}"))
        })?;
        if snapshot.triples.is_empty() {
            println!("{root}\tskipped\tempty snapshot");
            continue;
        }
        let docs = chunk_by_subject(&snapshot, encoder.as_ref(), doc_cap)?;
        let n_clusters = clusters.resolve(default_n_clusters(docs.len()));
        let index = build_index(&docs, encoder.as_ref(), n_clusters, seed)?;
        let dir = out.join(encode_filename(root));
        index.save(&dir)?;
        println!(
            "{root}\tdocs={}\tclusters={}\t{}",
            index.docs.len(),
            index.centroids.len(),
            dir.display()
        );
    }
    Ok(())
}

fn cmd_rank_run(
    question: &str,
    index_dir: &Path,
    k: usize,
    probe: AutoOr,
    encoder_url: &str,
    max_len: usize,
    out: &str,
) -> Result<()> {
    let index = ClusteredIndex::load(index_dir)?;
    let encoder = encoder_from_spec(encoder_url, index.dim, max_len)?;
    let probe = probe.resolve(default_probe_clusters(index.docs.len(), index.centroids.len()));
    let ranked = rank_top_k(&cli_anchor(question), &index, encoder.as_ref(), k, probe)?;
    let mut buf = String::new();
    for record in &ranked {
        buf.push_str(&serde_json::to_string(record)?);
        buf.push('\n');
    }
    emit(out, &buf)
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate_run(
    ranked_path: &Path,
    question: &str,
    index_dir: &Path,
    ordering: DocOrdering,
    backend_url: &str,
    budget: usize,
    encoder_url: &str,
    params: GenParams,
    out: &str,
) -> Result<()> {
    let ranked = read_ranked_file(ranked_path)?;
    if ranked.is_empty() {
        return Err(Error::Config(format!(
            "ranked file {} holds no candidates",
            ranked_path.display()
        )));
    }
    let index = ClusteredIndex::load(index_dir)?;
    let encoder = encoder_from_spec(encoder_url, index.dim, 256)?;
    let mut candidates = Vec::with_capacity(ranked.len());
    for c in &ranked {
        let doc = index
            .docs
            .iter()
            .find(|d| d.doc.subject == c.subject)
            .ok_or_else(|| {
                Error::Config(format!(
                    "ranked subject {} is not in the index at {}",
                    c.subject,
                    index_dir.display()
                ))
            })?;
        candidates.push(CandidateDoc {
            subject: c.subject.clone(),
            text: doc.doc.text.clone(),
            score: c.score,
            rank: c.rank,
        });
    }
    let spec = PromptSpec {
        anchor: cli_anchor(question),
        candidates,
        ordering,
        token_budget: budget,
        in_context_example: DEFAULT_IN_CONTEXT_EXAMPLE.to_string(),
    };
    let prompt = assemble_prompt(&spec, &|t| encoder.token_count(t))?;
    let backend: GeneratorBackend = backend_url.parse()?;
    let generation = call_generator(&backend, &prompt.text, &params, &RetryPolicy::default())?;
    let subjects: Vec<String> = ranked.iter().map(|c| c.subject.clone()).collect();
    let outcome = parse_generation(&generation.text, &subjects);
    let combined = serde_json::json!({
        "prompt": prompt,
        "generation": generation,
        "outcome": outcome,
    });
    emit(out, &format!("{}\n", serde_json::to_string_pretty(&combined)?))
}

/// Rankings for `eval run`: either a run manifest (entry key → ranked
/// subjects via its artifact paths) or a directory of per-query files.
fn collect_rankings(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    if path.is_file() {
        let manifest = RunManifest::load(path)?;
        // <cache>/runs/<hash>/manifest.json → cache root is three levels up.
        let cache_dir = path
            .parent()
            .and_then(Path::parent)
            .and_then(Path::parent)
            .ok_or_else(|| {
                Error::Config(format!(
                    "cannot locate the cache root above {}",
                    path.display()
                ))
            })?;
        return namesake::pipeline::manifest_rankings(&manifest, cache_dir);
    }
    let mut rankings = BTreeMap::new();
    let mut dir_entries: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|r| r.ok().map(|d| d.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e == "json" || e == "ndjson")
        })
        .collect();
    dir_entries.sort();
    for file in dir_entries {
        let Some(stem) = file.file_stem().and_then(|s| s.to_str()) else { continue };
        let ranked = read_ranked_file(&file)?;
        rankings.insert(
            stem.to_string(),
            ranked.into_iter().map(|c| c.subject).collect(),
        );
    }
    Ok(rankings)
}

fn cmd_eval_run(
    rankings_path: &Path,
    judgments_path: &Path,
    meta_path: &Path,
    k: usize,
    out: &Path,
) -> Result<()> {
    let rankings = collect_rankings(rankings_path)?;
    let judgments = load_judgments(judgments_path)?;
    let meta = load_meta(meta_path)?;
    let report = aggregate(&judgments, &rankings, &meta, k)?;
    write_json_file(&out.join("report.json"), &report)?;
    for channel in Channel::ALL {
        let grid = rank_grid(&judgments, &rankings, channel, k)?;
        write_json_file(&out.join(format!("grid_{}.json", channel.name())), &grid)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!("report and per-rank grids written to {}", out.display());
    Ok(())
}

fn cmd_run_all(args: &RunAllArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env();
    let entries = load_gazetteer(open(&args.gazetteer)?, args.format, &RootNameConfig::default())?;
    eprintln!(
        "running {} entries against {} (config hash {})",
        entries.len(),
        cfg.endpoints.sparql,
        cfg.config_hash()
    );
    let manifest = run_pipeline(&entries, &cfg)?;
    let counts = [
        ("ok", manifest.count(EntryStatus::Ok)),
        ("no_kg", manifest.count(EntryStatus::NoKg)),
        ("search_error", manifest.count(EntryStatus::SearchError)),
        ("encode_error", manifest.count(EntryStatus::EncodeError)),
        ("generate_error", manifest.count(EntryStatus::GenerateError)),
    ];
    println!("entries: {}", manifest.entries.len());
    for (name, count) in counts {
        println!("  {name}: {count}");
    }
    let run_dir = cfg.run.cache_dir.join("runs").join(&manifest.config_hash);
    println!("manifest: {}", run_dir.join("manifest.json").display());

    if let (Some(judgments_path), Some(meta_path)) = (&args.judgments, &args.meta) {
        let judgments = load_judgments(judgments_path)?;
        let meta = load_meta(meta_path)?;
        let out = args.report_out.clone().unwrap_or_else(|| run_dir.join("report"));
        let (report, paths) =
            emit_report(&manifest, &judgments, &meta, &cfg.run.cache_dir, args.k, &out)?;
        println!("report: {}", paths.report.display());
        for channel in Channel::ALL {
            let m = &report.per_channel[channel.name()];
            println!(
                "  {}: HR@{} {:.3}  MRR {:.3}  nDCG {:.3}  P@{} {:.3}",
                channel.name(),
                report.k,
                m.hr,
                m.mrr,
                m.ndcg,
                report.k,
                m.map
            );
        }
    } else if args.judgments.is_some() || args.meta.is_some() {
        return Err(Error::Config(
            "--judgments and --meta must be given together".into(),
        ));
    }
    Ok(())
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gazetteer { cmd } => match cmd {
            GazetteerCmd::Load { input, format, out } => {
                cmd_gazetteer_load(&input, format, out.as_deref())
            }
        },
        Command::Geo { cmd } => match cmd {
            GeoCmd::BuildGraphs { countries, cities, n_hab, d_city_km, out } => {
                cmd_geo_build(&countries, &cities, n_hab, d_city_km, &out)
            }
        },
        Command::Pairs { cmd } => match cmd {
            PairsCmd::Gen(args) => cmd_pairs_gen(&args),
        },
        Command::Search { cmd } => match cmd {
            SearchCmd::Run { names, format, endpoint, k_searcher, max_subjects, cache } => {
                cmd_search_run(&names, format, &endpoint, k_searcher, max_subjects, &cache)
            }
        },
        Command::Index { cmd } => match cmd {
            IndexCmd::Build {
                snapshots,
                encoder_url,
                clusters,
                doc_cap,
                dim,
                max_len,
                seed,
                name,
                out,
            } => cmd_index_build(
                &snapshots,
                &encoder_url,
                clusters,
                doc_cap,
                dim,
                max_len,
                seed,
                name.as_deref(),
                &out,
            ),
        },
        Command::Rank { cmd } => match cmd {
            RankCmd::Run { question, index, k, probe, encoder_url, max_len, out } => {
                cmd_rank_run(&question, &index, k, probe, &encoder_url, max_len, &out)
            }
        },
        Command::Generate { cmd } => match cmd {
            GenerateCmd::Run {
                ranked,
                question,
                index,
                ordering,
                backend_url,
                budget,
                encoder_url,
                max_new_tokens,
                temperature,
                seed,
                out,
            } => cmd_generate_run(
                &ranked,
                &question,
                &index,
                ordering,
                &backend_url,
                budget,
                &encoder_url,
                GenParams { max_new_tokens, temperature, seed },
                &out,
            ),
        },
        Command::Eval { cmd } => match cmd {
            EvalCmd::Run { rankings, judgments, meta, k, out } => {
                cmd_eval_run(&rankings, &judgments, &meta, k, &out)
            }
        },
        Command::RunAll(args) => cmd_run_all(&args),
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
