//! Late-interaction ranking: MaxSim scoring of the anchor question against
//! per-subject documents, with cluster probing for candidate pruning.
//!
//! MaxSim is the ColBERT-style late-interaction score: for each query
//! token, take the maximum cosine similarity over all document tokens,
//! then sum over query tokens. Rows are unit-normalized at encode time, so
//! cosine similarity is a plain dot product.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::index::ClusteredIndex;
use crate::toponym::AnchorQuestion;

/// One ranked subject document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub subject: String,
    pub score: f64,
    /// 1-based position in the result list.
    pub rank: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum over query tokens of the maximum dot product against any document
/// token. Both matrices must be non-empty and share one dimension.
pub fn score_maxsim(query_embs: &[Vec<f64>], doc_embs: &[Vec<f64>]) -> Result<f64> {
    if query_embs.is_empty() {
        return Err(Error::EmptyEmbedding { side: "query" });
    }
    if doc_embs.is_empty() {
        return Err(Error::EmptyEmbedding { side: "document" });
    }
    let dim = query_embs[0].len();
    for row in query_embs.iter().chain(doc_embs.iter()) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch { left: dim, right: row.len() });
        }
    }
    let mut total = 0.0;
    for q in query_embs {
        let mut best = f64::NEG_INFINITY;
        for d in doc_embs {
            let s = dot(q, d);
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    Ok(total)
}

/// Deterministic result ordering: score descending, ties by subject.
fn sort_candidates(scored: &mut [(String, f64)]) {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// Default probe width: exhaustive at small corpus sizes, `ceil(sqrt)` of
/// the cluster count beyond that.
pub fn default_probe_clusters(n_docs: usize, n_clusters: usize) -> usize {
    if n_docs <= 1000 {
        n_clusters
    } else {
        crate::index::default_n_clusters(n_clusters).min(n_clusters)
    }
}

/// Rank documents against the anchor question. The `probe_clusters`
/// nearest clusters (by centroid dot product with the mean-pooled query
/// embedding) are scored exactly with MaxSim; with `probe_clusters` >=
/// the cluster count this equals exhaustive scoring of every document.
pub fn rank_top_k(
    question: &AnchorQuestion,
    index: &ClusteredIndex,
    encoder: &dyn Encoder,
    k_ranker: usize,
    probe_clusters: usize,
) -> Result<Vec<RankedCandidate>> {
    if index.docs.is_empty() {
        return Err(Error::Config("cannot rank against an empty index".into()));
    }
    if k_ranker == 0 {
        return Err(Error::Config("k_ranker must be at least 1".into()));
    }
    let query_embs = encoder.encode(&question.text).map_err(|e| Error::EncoderFailure {
        doc: "anchor question".into(),
        reason: e.to_string(),
    })?;
    if query_embs.is_empty() {
        return Err(Error::EncoderFailure {
            doc: "anchor question".into(),
            reason: "encoder returned no token vectors for the question".into(),
        });
    }

    // Pick clusters by pooled-query/centroid similarity; ties by cluster id.
    let mut pooled = vec![0.0; query_embs[0].len()];
    for row in &query_embs {
        for (p, v) in pooled.iter_mut().zip(row) {
            *p += v;
        }
    }
    for p in &mut pooled {
        *p /= query_embs.len() as f64;
    }
    let mut cluster_order: Vec<(usize, f64)> = index
        .centroids
        .iter()
        .enumerate()
        .map(|(c, centroid)| (c, dot(&pooled, centroid)))
        .collect();
    cluster_order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0))
    });
    let probed: Vec<usize> =
        cluster_order.iter().take(probe_clusters.max(1)).map(|(c, _)| *c).collect();

    // Exact MaxSim over the probed clusters' members.
    let mut scored: Vec<(String, f64)> = index
        .docs
        .par_iter()
        .filter(|d| probed.contains(&d.cluster))
        .map(|d| -> Result<(String, f64)> {
            let score = score_maxsim(&query_embs, &d.embedding)?;
            Ok((d.doc.subject.clone(), score))
        })
        .collect::<Result<Vec<_>>>()?;
    sort_candidates(&mut scored);
    Ok(scored
        .into_iter()
        .take(k_ranker)
        .enumerate()
        .map(|(i, (subject, score))| RankedCandidate { subject, score, rank: i + 1 })
        .collect())
}
