//! namesake — a retrieval-augmented pipeline for identifying candidate
//! origins of place names.
//!
//! Given a gazetteer of place names ("Little Bourke Street, Melbourne,
//! Australia"), the pipeline:
//!
//! 1. extracts the root name and renders a spatially-contextualized anchor
//!    question ([`toponym`]);
//! 2. pulls a per-name knowledge-graph snapshot from a SPARQL endpoint,
//!    filtered to a relation whitelist and English-or-untagged literals, and
//!    stores it as prefix-compacted RDF/XML ([`search`]);
//! 3. splits the snapshot into per-subject documents, embeds them with a
//!    pluggable token-level encoder, and clusters them into an index
//!    ([`encoder`], [`index`]);
//! 4. ranks documents against the anchor question with late-interaction
//!    MaxSim scoring ([`rank`]);
//! 5. prompts a generation backend with the top candidates and parses the
//!    CHOICE/ANSWER tags out of the completion ([`generate`]);
//! 6. evaluates ranked lists and generations with HR/MRR/nDCG/P@k under
//!    semantic and spatial relevance judgments ([`eval`]).
//!
//! It also synthesizes three spatial/RDF fine-tuning datasets from GeoNames
//! dumps and a QALD-9 question file ([`geo`], [`pairs`], [`qald`]), and ships
//! a batch orchestrator with cached, resumable, byte-deterministic artifacts
//! ([`pipeline`], [`config`]).

pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod generate;
pub mod geo;
pub mod index;
pub mod pairs;
pub mod pipeline;
pub mod qald;
pub mod rank;
pub mod search;
pub mod toponym;
pub mod util;

pub use error::{Error, Result};
