//! Token-level text encoders behind a single contract.
//!
//! Everything downstream (clustering, MaxSim ranking, prompt budgeting) sees
//! an encoder only through [`Encoder`]: text in, one unit-length vector per
//! token out. Two implementations ship here — a deterministic hash-based
//! encoder so the whole pipeline runs and tests without a model service, and
//! an HTTP client for a real embedding backend.

use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::util;

/// Token-level encoder contract. `encode` returns one row per token, capped
/// at `max_len` rows; rows are unit-normalized so cosine similarity is a dot
/// product. Implementations must be deterministic: same text, same matrix.
pub trait Encoder: Send + Sync {
    fn encode(&self, text: &str) -> Result<Vec<Vec<f64>>>;
    /// Tokens in the backend's own units; used for budget counting.
    fn tokenize(&self, text: &str) -> Vec<String>;
    fn dim(&self) -> usize;
    fn max_len(&self) -> usize;

    fn token_count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Deterministic hash-based encoder: whitespace tokens, each mapped to a
/// unit vector drawn from a gaussian seeded by the token's bytes. Identical
/// tokens always map to identical vectors.
#[derive(Debug, Clone)]
pub struct HashEncoder {
    dim: usize,
    max_len: usize,
    seed: u64,
}

impl HashEncoder {
    pub fn new(dim: usize, max_len: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("encoder dimension must be >= 2, got {dim}")));
        }
        if max_len == 0 {
            return Err(Error::Config("encoder max length must be positive".into()));
        }
        Ok(HashEncoder { dim, max_len, seed })
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = util::rng_for(self.seed, &["token", token]);
        loop {
            let mut v: Vec<f64> =
                (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for x in &mut v {
                    *x /= norm;
                }
                return v;
            }
        }
    }
}

impl Encoder for HashEncoder {
    fn encode(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .tokenize(text)
            .iter()
            .take(self.max_len)
            .map(|t| self.token_vector(t))
            .collect())
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_len(&self) -> usize {
        self.max_len
    }
}

/// HTTP encoder client. Wire contract: POST JSON `{"texts": [..]}` to the
/// backend, response `{"matrices": [[[f64; D]; tokens]; texts]}`. Token
/// counting for budgets is whitespace-based client-side, since the wire
/// contract does not expose the backend tokenizer.
pub struct HttpEncoder {
    url: String,
    dim: usize,
    max_len: usize,
}

#[derive(Deserialize)]
struct MatricesResponse {
    matrices: Vec<Vec<Vec<f64>>>,
}

impl HttpEncoder {
    pub fn new(url: impl Into<String>, dim: usize, max_len: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("encoder dimension must be >= 2, got {dim}")));
        }
        Ok(HttpEncoder { url: url.into(), dim, max_len })
    }

    fn post_texts(&self, texts: &[&str]) -> Result<Vec<Vec<Vec<f64>>>> {
        let body = serde_json::json!({ "texts": texts });
        let mut response = ureq::post(&self.url)
            .send_json(&body)
            .map_err(|e| Error::Http(format!("encoder backend {}: {e}", self.url)))?;
        let parsed: MatricesResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::MalformedResponse(format!("encoder response: {e}")))?;
        if parsed.matrices.len() != texts.len() {
            return Err(Error::MalformedResponse(format!(
                "encoder returned {} matrices for {} texts",
                parsed.matrices.len(),
                texts.len()
            )));
        }
        Ok(parsed.matrices)
    }

    fn normalize(&self, mut matrix: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
        matrix.truncate(self.max_len);
        for row in &mut matrix {
            if row.len() != self.dim {
                return Err(Error::DimensionMismatch { left: row.len(), right: self.dim });
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm <= 1e-12 {
                return Err(Error::MalformedResponse(
                    "encoder returned a zero or non-finite token vector".into(),
                ));
            }
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        Ok(matrix)
    }
}

impl Encoder for HttpEncoder {
    fn encode(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        let mut matrices = self.post_texts(&[text])?;
        self.normalize(matrices.remove(0))
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_len(&self) -> usize {
        self.max_len
    }
}

/// Build an encoder from a URL-like spec: `hash:<dim>[:<seed>]` for the
/// deterministic test encoder, or an `http(s)://` endpoint.
pub fn encoder_from_spec(spec: &str, dim: usize, max_len: usize) -> Result<Box<dyn Encoder>> {
    if let Some(rest) = spec.strip_prefix("hash:") {
        let mut parts = rest.split(':');
        let d: usize = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Config(format!("bad hash encoder spec {spec:?}")))?;
        let seed: u64 = match parts.next() {
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("bad hash encoder seed in {spec:?}")))?,
            None => 0,
        };
        Ok(Box::new(HashEncoder::new(d, max_len, seed)?))
    } else if spec.starts_with("http://") || spec.starts_with("https://") {
        Ok(Box::new(HttpEncoder::new(spec, dim, max_len)?))
    } else {
        Err(Error::Config(format!("unrecognized encoder spec {spec:?}")))
    }
}
