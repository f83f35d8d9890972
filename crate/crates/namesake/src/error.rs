use std::path::PathBuf;

/// Crate-wide error type.
///
/// Several conditions that look like errors elsewhere are deliberately *not*
/// variants here: a cache miss is `Ok(None)`, result-set truncation is a flag
/// on the snapshot, and an infeasible negative-sampling ratio flags the
/// emitted records instead of aborting.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("removing prefixes and street types from {raw:?} leaves an empty root")]
    EmptyRoot { raw: String },

    #[error("missing spatial context for {raw:?}: city and country are both required")]
    MissingContext { raw: String },

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("bad coordinate (lat {lat}, lon {lon}): out of range")]
    BadCoordinate { lat: f64, lon: f64 },

    #[error("cannot build a knowledge-graph query for an empty name")]
    EmptyName,

    #[error("http error: {0}")]
    Http(String),

    #[error("generation backend error: {0}")]
    Backend(String),

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    #[error("rdf/xml error: {0}")]
    RdfXml(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt snapshot for {name:?}: {reason}")]
    CorruptSnapshot { name: String, reason: String },

    #[error("corrupt index at {path}: {reason}")]
    CorruptIndex { path: String, reason: String },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty {side} embedding matrix")]
    EmptyEmbedding { side: &'static str },

    #[error("encoder failure on {doc:?}: {reason}")]
    EncoderFailure { doc: String, reason: String },

    #[error("token budget {budget} unsatisfiable: minimal prompt still needs {needed} tokens")]
    BudgetUnsatisfiable { budget: usize, needed: usize },

    #[error("generation backend reported a context overflow")]
    ContextOverflow,

    #[error("missing judgment for query {query_id:?}, item {item_id:?}")]
    MissingJudgment { query_id: String, item_id: String },

    #[error("relative change undefined: previous value is zero")]
    UndefinedBase,

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
