//! Fixtures and brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Ordering as CmpOrdering;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use cascade_core::synthetic::{NoiseShape, SyntheticDataset, SyntheticParams};
use cascade_core::tiers::{make_truncation_family, QueryEmbedding, Tier};
use cascade_core::{CaptionKey, DocId, Result};

/// Wraps a tier and counts image encodings.
#[derive(Debug)]
pub struct Counting {
    pub inner: Arc<dyn Tier>,
    pub calls: AtomicU64,
}

impl Counting {
    pub fn wrap(inner: Arc<dyn Tier>) -> Arc<Self> {
        Arc::new(Self {
            inner,
            calls: AtomicU64::new(0),
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Tier for Counting {
    fn tier_id(&self) -> u16 {
        self.inner.tier_id()
    }
    fn cost(&self) -> f64 {
        self.inner.cost()
    }
    fn image_dim(&self) -> usize {
        self.inner.image_dim()
    }
    fn encode_image(&self, id: DocId) -> Result<Vec<f32>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.encode_image(id)
    }
    fn encode_text(&self, query: CaptionKey) -> Result<QueryEmbedding> {
        self.inner.encode_text(query)
    }
}

pub fn dataset(n: usize, dim: usize, queries: usize, noise: f64, seed: u64) -> SyntheticDataset {
    SyntheticDataset::generate(&SyntheticParams {
        n,
        dim,
        queries,
        noise,
        decay: 1.0,
        shape: NoiseShape::Isotropic,
        seed,
    })
    .unwrap()
}

/// Truncation tiers over `data` with the given widths and costs.
pub fn tiers(data: &SyntheticDataset, widths: &[usize], costs: &[f64]) -> Vec<Arc<dyn Tier>> {
    make_truncation_family(data.images.clone(), data.queries.clone(), widths, costs)
        .unwrap()
        .into_iter()
        .map(|t| Arc::new(t) as Arc<dyn Tier>)
        .collect()
}

/// Full ranking of `candidates` by a straightforward scan: f64 dot
/// products, descending score, ties by ascending id.
pub fn oracle_rank(tier: &dyn Tier, candidates: &[DocId], query: CaptionKey) -> Vec<(DocId, f64)> {
    let q = tier.encode_text(query).unwrap().vector;
    let mut scored: Vec<(DocId, f64)> = candidates
        .iter()
        .map(|&id| {
            let v = tier.encode_image(id).unwrap();
            let s: f64 = v.iter().zip(&q).map(|(a, b)| *a as f64 * *b as f64).sum();
            (id, s)
        })
        .collect();
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        CmpOrdering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    scored
}

pub fn oracle_ids(tier: &dyn Tier, candidates: &[DocId], query: CaptionKey) -> Vec<DocId> {
    oracle_rank(tier, candidates, query).into_iter().map(|(id, _)| id).collect()
}

/// Cascade trace by the oracle: the candidate set reranked at each level,
/// and the final ordering.
pub fn oracle_cascade(
    tiers: &[Arc<dyn Tier>],
    m: &[usize],
    collection: &[DocId],
    query: CaptionKey,
) -> (Vec<Vec<DocId>>, Vec<DocId>) {
    let mut order = oracle_ids(tiers[0].as_ref(), collection, query);
    let mut sets = Vec::new();
    for (j, &mj) in m.iter().enumerate() {
        order.truncate(mj);
        sets.push(order.clone());
        order = oracle_ids(tiers[j + 1].as_ref(), &order, query);
    }
    (sets, order)
}
