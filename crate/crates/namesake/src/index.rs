//! Per-subject document chunking and the clustered embedding index.
//!
//! A snapshot is split into one document per distinct subject (the
//! subject's `rdf:Description` fragment in canonical order), each document
//! capped at a fixed number of encoder tokens. Documents are embedded with
//! a pluggable token-level encoder, mean-pooled, and clustered with
//! seeded k-means so ranking can prune to the most promising clusters.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::search::rdfxml::{subject_fragment, PrefixMap};
use crate::search::KGSnapshot;
use crate::util::{atomic_write, encode_filename, rng_for};
use rand::Rng;

/// Token cap applied to every document.
pub const DOC_TOKEN_CAP: usize = 256;

/// One per-subject document extracted from a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleDocument {
    pub subject: String,
    /// RDF/XML fragment for the subject; when `truncated`, the fragment's
    /// leading tokens rejoined with single spaces.
    pub text: String,
    pub token_count: usize,
    pub truncated: bool,
}

/// A document with its token embedding matrix and cluster assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexedDocument {
    #[serde(flatten)]
    pub doc: TripleDocument,
    /// Token rows, each unit-normalized, all of the index dimension.
    pub embedding: Vec<Vec<f64>>,
    /// Mean of the token rows (not re-normalized).
    pub pooled: Vec<f64>,
    pub cluster: usize,
}

#[derive(Debug, Clone)]
pub struct ClusteredIndex {
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Documents sorted by subject.
    pub docs: Vec<IndexedDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexManifest {
    dim: usize,
    n_clusters: usize,
    subjects: Vec<String>,
}

/// Split a snapshot into one document per distinct subject. Fragments keep
/// the canonical triple order; every snapshot triple lands in exactly one
/// fragment. Token counting and the cap use the encoder's tokenizer.
pub fn chunk_by_subject(
    snapshot: &KGSnapshot,
    encoder: &dyn Encoder,
    token_cap: usize,
) -> Result<Vec<TripleDocument>> {
    let pm = PrefixMap::with_defaults();
    let mut subjects: Vec<&str> =
        snapshot.triples.iter().map(|t| t.subject.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();

    let mut docs = Vec::with_capacity(subjects.len());
    for subject in subjects {
        let text = subject_fragment(subject, &snapshot.triples, &pm)?;
        let tokens = encoder.tokenize(&text);
        let (text, token_count, truncated) = if tokens.len() > token_cap {
            (tokens[..token_cap].join(" "), token_cap, true)
        } else {
            (text, tokens.len(), false)
        };
        docs.push(TripleDocument { subject: subject.to_string(), text, token_count, truncated });
    }
    Ok(docs)
}

/// `ceil(sqrt(n))` — the default cluster count when not configured.
pub fn default_n_clusters(n_docs: usize) -> usize {
    if n_docs == 0 {
        return 1;
    }
    let mut k = (n_docs as f64).sqrt().floor() as usize;
    while k * k < n_docs {
        k += 1;
    }
    while k > 1 && (k - 1) * (k - 1) >= n_docs {
        k -= 1;
    }
    k.max(1)
}

fn mean_pool(matrix: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut pooled = vec![0.0; dim];
    for row in matrix {
        for (p, v) in pooled.iter_mut().zip(row) {
            *p += v;
        }
    }
    let n = matrix.len() as f64;
    for p in &mut pooled {
        *p /= n;
    }
    pooled
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means (k-means++ init, Lloyd iterations) over the pooled
/// points. Returns (assignment, centroids). Deterministic given the seed
/// and point order; callers pass points in subject-sorted order.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> (Vec<usize>, Vec<Vec<f64>>) {
    let n = points.len();
    let dim = points[0].len();
    debug_assert!(k >= 1 && k <= n);

    let mut rng = rng_for(seed, &["kmeans"]);

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centroid; walk forward
            // deterministically to keep exactly k centroids.
            centroids.len() % n
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= *w;
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, &centroids[centroids.len() - 1]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..100 {
        // Assign: nearest centroid, ties to the lowest cluster id.
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        // Repair empty clusters: move the point farthest from its centroid
        // (ties to the lowest point index) into the empty cluster.
        loop {
            let mut counts = vec![0usize; k];
            for &a in &assignment {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let mut worst = 0usize;
            let mut worst_d = -1.0;
            for (i, p) in points.iter().enumerate() {
                if counts[assignment[i]] <= 1 {
                    continue; // moving it would empty another cluster
                }
                let d = sq_dist(p, &centroids[assignment[i]]);
                if d > worst_d {
                    worst_d = d;
                    worst = i;
                }
            }
            assignment[worst] = empty;
            changed = true;
        }

        // Update: centroid = mean of members.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            for s in &mut sums[c] {
                *s /= counts[c] as f64;
            }
        }
        centroids = sums;

        if !changed {
            break;
        }
    }
    (assignment, centroids)
}

/// Embed, pool, and cluster the documents. Deterministic for a given
/// (docs, encoder, n_clusters, seed); when `docs.len() <= n_clusters`
/// every document becomes its own cluster.
pub fn build_index(
    docs: &[TripleDocument],
    encoder: &dyn Encoder,
    n_clusters: usize,
    seed: u64,
) -> Result<ClusteredIndex> {
    if docs.is_empty() {
        return Err(Error::Config("build_index requires at least one document".into()));
    }
    if n_clusters == 0 {
        return Err(Error::Config("n_clusters must be at least 1".into()));
    }
    let dim = encoder.dim();

    let mut sorted: Vec<&TripleDocument> = docs.iter().collect();
    sorted.sort_by(|a, b| a.subject.cmp(&b.subject));

    // Parallel encode; rayon bounds in-flight encoder work by its pool size.
    let embedded: Vec<Result<(Vec<Vec<f64>>, Vec<f64>)>> = sorted
        .par_iter()
        .map(|doc| {
            let matrix = encoder.encode(&doc.text).map_err(|e| Error::EncoderFailure {
                doc: doc.subject.clone(),
                reason: e.to_string(),
            })?;
            if matrix.is_empty() {
                return Err(Error::EncoderFailure {
                    doc: doc.subject.clone(),
                    reason: "encoder returned no token vectors".into(),
                });
            }
            let pooled = mean_pool(&matrix, dim);
            Ok((matrix, pooled))
        })
        .collect();

    let mut matrices = Vec::with_capacity(sorted.len());
    for result in embedded {
        matrices.push(result?);
    }

    let points: Vec<Vec<f64>> = matrices.iter().map(|(_, pooled)| pooled.clone()).collect();
    let (assignment, centroids) = if sorted.len() <= n_clusters {
        // Singleton clusters in subject order.
        let assignment: Vec<usize> = (0..sorted.len()).collect();
        (assignment, points.clone())
    } else {
        kmeans(&points, n_clusters, seed)
    };

    let docs = sorted
        .into_iter()
        .zip(matrices)
        .zip(assignment)
        .map(|((doc, (embedding, pooled)), cluster)| IndexedDocument {
            doc: doc.clone(),
            embedding,
            pooled,
            cluster,
        })
        .collect();

    Ok(ClusteredIndex { dim, centroids, docs })
}

impl ClusteredIndex {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Subjects of documents assigned to `cluster`, in sorted order.
    pub fn cluster_members(&self, cluster: usize) -> Vec<&IndexedDocument> {
        self.docs.iter().filter(|d| d.cluster == cluster).collect()
    }

    /// Persist as a directory: manifest + centroids + one embedding file
    /// per document. All writes are atomic.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let manifest = IndexManifest {
            dim: self.dim,
            n_clusters: self.centroids.len(),
            subjects: self.docs.iter().map(|d| d.doc.subject.clone()).collect(),
        };
        atomic_write(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
        atomic_write(&dir.join("centroids.json"), &serde_json::to_vec_pretty(&self.centroids)?)?;
        let docs_dir = dir.join("docs");
        for doc in &self.docs {
            let path = docs_dir.join(format!("{}.json", encode_filename(&doc.doc.subject)));
            atomic_write(&path, &serde_json::to_vec_pretty(doc)?)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ClusteredIndex> {
        let corrupt = |reason: String| Error::CorruptIndex {
            path: dir.display().to_string(),
            reason,
        };
        let read = |path: &Path| -> Result<Vec<u8>> {
            std::fs::read(path).map_err(|e| Error::io(path, e))
        };
        let manifest: IndexManifest = serde_json::from_slice(&read(&dir.join("manifest.json"))?)
            .map_err(|e| corrupt(format!("manifest: {e}")))?;
        let centroids: Vec<Vec<f64>> = serde_json::from_slice(&read(&dir.join("centroids.json"))?)
            .map_err(|e| corrupt(format!("centroids: {e}")))?;
        if centroids.len() != manifest.n_clusters {
            return Err(corrupt(format!(
                "manifest declares {} clusters, centroids file has {}",
                manifest.n_clusters,
                centroids.len()
            )));
        }
        let mut docs = Vec::with_capacity(manifest.subjects.len());
        for subject in &manifest.subjects {
            let path = dir.join("docs").join(format!("{}.json", encode_filename(subject)));
            let doc: IndexedDocument = serde_json::from_slice(&read(&path)?)
                .map_err(|e| corrupt(format!("document {subject:?}: {e}")))?;
            if &doc.doc.subject != subject {
                return Err(corrupt(format!(
                    "document file for {subject:?} contains subject {:?}",
                    doc.doc.subject
                )));
            }
            if doc.cluster >= manifest.n_clusters {
                return Err(corrupt(format!(
                    "document {subject:?} assigned to cluster {} of {}",
                    doc.cluster, manifest.n_clusters
                )));
            }
            docs.push(doc);
        }
        docs.sort_by(|a, b| a.doc.subject.cmp(&b.doc.subject));
        Ok(ClusteredIndex { dim: manifest.dim, centroids, docs })
    }
}
