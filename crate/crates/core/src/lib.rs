//! Cascaded text-image retrieval.
//!
//! A collection is ranked by a stack of encoder tiers of increasing cost.
//! The cheapest tier embeds every document at build time; every later tier
//! only embeds the documents that reach its candidate prefix, and keeps
//! those embeddings for the lifetime of the engine. A [`CostLedger`]
//! records every image encoding so that the lifetime cost can be compared
//! with the closed forms in [`cost`].
//!
//! ```text
//! query ──► rank all n docs (level 0, prebuilt) ──► top m1
//!                                                    │ encode misses with tier 1
//!                                                    ▼
//!                                      rerank top m1 ──► top m2 ──► ... ──► top k
//! ```

pub mod config;
pub mod cost;
pub mod engine;
pub mod error;
pub mod eval;
pub mod rank;
pub mod store;
pub mod synthetic;
pub mod tiers;

/// Document (image) identifier.
pub type DocId = u64;

/// Caption identifier; doubles as the query key for tier text encoders.
pub type CaptionKey = u64;

/// Maximum deviation of a stored vector's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-4;

pub use engine::{Cascade, CascadeConfig, CostLedger, LifetimeReport, QueryMode, QueryResult};
pub use error::{Error, ErrorKind, Result};
pub use eval::{GroundTruthPairs, RecallReport};
pub use rank::{RankedList, Scored};
pub use store::{EmbeddingMatrix, SparseLevelCache, StoreManifest};
pub use tiers::{FileTier, Tier, TruncationTier};
