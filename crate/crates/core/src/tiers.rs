//! Encoder tiers.
//!
//! A tier pairs an image encoder with its own text encoder and a cost per
//! image encoding. Tiers here never run a network: [`TruncationTier`] derives
//! weaker embeddings from a ground-truth matrix, [`FileTier`] serves
//! embeddings exported offline.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::store::{normalize_in_place, EmbeddingMatrix};
use crate::{CaptionKey, DocId};

/// Text-side embedding produced by a tier's paired text encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    pub tier_id: u16,
    pub vector: Vec<f32>,
}

pub trait Tier: Send + Sync + fmt::Debug {
    fn tier_id(&self) -> u16;

    /// Cost units charged per image encoding.
    fn cost(&self) -> f64;

    /// Dimensionality of both image and text embeddings.
    fn image_dim(&self) -> usize;

    /// Unit-norm embedding of document `id`. Deterministic.
    fn encode_image(&self, id: DocId) -> Result<Vec<f32>>;

    fn encode_text(&self, query: CaptionKey) -> Result<QueryEmbedding>;
}

fn check_cost(cost: f64) -> Result<()> {
    if !(cost.is_finite() && cost > 0.0) {
        return Err(Error::config(format!("tier cost must be positive, got {cost}")));
    }
    Ok(())
}

/// Keeps the leading `width` coordinates of a ground-truth row and rescales
/// to unit length.
#[derive(Clone)]
pub struct TruncationTier {
    tier_id: u16,
    cost: f64,
    width: usize,
    images: Arc<EmbeddingMatrix>,
    queries: Arc<EmbeddingMatrix>,
}

impl fmt::Debug for TruncationTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncationTier")
            .field("tier_id", &self.tier_id)
            .field("cost", &self.cost)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl TruncationTier {
    /// `images` and `queries` hold ground-truth document and caption vectors
    /// and must share a dimensionality of at least `width`.
    pub fn new(
        tier_id: u16,
        cost: f64,
        width: usize,
        images: Arc<EmbeddingMatrix>,
        queries: Arc<EmbeddingMatrix>,
    ) -> Result<Self> {
        check_cost(cost)?;
        if images.dim() != queries.dim() {
            return Err(Error::DimensionMismatch {
                expected: images.dim(),
                actual: queries.dim(),
            });
        }
        if width == 0 || width > images.dim() {
            return Err(Error::config(format!(
                "truncation width {width} outside 1..={}",
                images.dim()
            )));
        }
        Ok(Self {
            tier_id,
            cost,
            width,
            images,
            queries,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn truncate(&self, row: &[f32], id: u64) -> Result<Vec<f32>> {
        let mut v = row[..self.width].to_vec();
        let norm = normalize_in_place(&mut v);
        if norm == 0.0 {
            return Err(Error::Inconsistent(format!(
                "row {id} has no mass in its leading {} coordinates",
                self.width
            )));
        }
        Ok(v)
    }
}

impl Tier for TruncationTier {
    fn tier_id(&self) -> u16 {
        self.tier_id
    }

    fn cost(&self) -> f64 {
        self.cost
    }

    fn image_dim(&self) -> usize {
        self.width
    }

    fn encode_image(&self, id: DocId) -> Result<Vec<f32>> {
        let row = self.images.get(id).ok_or(Error::UnknownDoc(id))?;
        self.truncate(row, id)
    }

    fn encode_text(&self, query: CaptionKey) -> Result<QueryEmbedding> {
        let row = self.queries.get(query).ok_or(Error::UnknownQuery(query))?;
        Ok(QueryEmbedding {
            tier_id: self.tier_id,
            vector: self.truncate(row, query)?,
        })
    }
}

/// Serves precomputed image and caption embeddings verbatim.
#[derive(Clone)]
pub struct FileTier {
    tier_id: u16,
    cost: f64,
    images: Arc<EmbeddingMatrix>,
    texts: Arc<EmbeddingMatrix>,
}

impl fmt::Debug for FileTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FileTier")
            .field("tier_id", &self.tier_id)
            .field("cost", &self.cost)
            .field("dim", &self.images.dim())
            .finish_non_exhaustive()
    }
}

impl FileTier {
    pub fn new(
        tier_id: u16,
        cost: f64,
        images: Arc<EmbeddingMatrix>,
        texts: Arc<EmbeddingMatrix>,
    ) -> Result<Self> {
        check_cost(cost)?;
        if images.dim() != texts.dim() {
            return Err(Error::DimensionMismatch {
                expected: images.dim(),
                actual: texts.dim(),
            });
        }
        Ok(Self {
            tier_id,
            cost,
            images,
            texts,
        })
    }
}

impl Tier for FileTier {
    fn tier_id(&self) -> u16 {
        self.tier_id
    }

    fn cost(&self) -> f64 {
        self.cost
    }

    fn image_dim(&self) -> usize {
        self.images.dim()
    }

    fn encode_image(&self, id: DocId) -> Result<Vec<f32>> {
        self.images
            .get(id)
            .map(<[f32]>::to_vec)
            .ok_or(Error::UnknownDoc(id))
    }

    fn encode_text(&self, query: CaptionKey) -> Result<QueryEmbedding> {
        let row = self.texts.get(query).ok_or(Error::UnknownQuery(query))?;
        Ok(QueryEmbedding {
            tier_id: self.tier_id,
            vector: row.to_vec(),
        })
    }
}

/// Builds one truncation tier per width, with tier ids `0..widths.len()`.
pub fn make_truncation_family(
    images: Arc<EmbeddingMatrix>,
    queries: Arc<EmbeddingMatrix>,
    widths: &[usize],
    costs: &[f64],
) -> Result<Vec<TruncationTier>> {
    if widths.is_empty() || widths.len() != costs.len() {
        return Err(Error::config(format!(
            "need one cost per width, got {} widths and {} costs",
            widths.len(),
            costs.len()
        )));
    }
    if !widths.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("widths not increasing"));
    }
    if !costs.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("costs not increasing"));
    }
    widths
        .iter()
        .zip(costs)
        .enumerate()
        .map(|(i, (&width, &cost))| {
            TruncationTier::new(i as u16, cost, width, images.clone(), queries.clone())
        })
        .collect()
}
