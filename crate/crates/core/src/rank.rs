//! Cosine ranking of candidate sets.
//!
//! Vectors are stored unit-norm, so cosine similarity is a dot product. Dot
//! products accumulate in `f64`. Output order is score descending, then doc
//! id ascending, which makes every ranking a total order.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::EmbeddingMatrix;
use crate::DocId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: DocId,
    pub score: f64,
}

/// Candidates in rank order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList {
    items: Vec<Scored>,
}

impl RankedList {
    /// Wraps items that are already in rank order.
    pub fn from_ranked(items: Vec<Scored>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for s in &items {
            if !seen.insert(s.id) {
                return Err(Error::DuplicateId(s.id));
            }
        }
        if items.windows(2).any(|w| rank_order(&w[0], &w[1]) != Ordering::Less) {
            return Err(Error::Inconsistent("items are not in rank order".into()));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[Scored] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<DocId> {
        self.items.iter().map(|s| s.id).collect()
    }

    /// Zero-based rank of `id`, if present.
    pub fn position(&self, id: DocId) -> Option<usize> {
        self.items.iter().position(|s| s.id == id)
    }

    /// The first `min(m, len)` items.
    pub fn top_m(&self, m: usize) -> RankedList {
        RankedList {
            items: self.items[..m.min(self.items.len())].to_vec(),
        }
    }

    pub fn truncate(&mut self, m: usize) {
        self.items.truncate(m);
    }

    pub fn into_items(self) -> Vec<Scored> {
        self.items
    }
}

/// Lookup of unit vectors by doc id.
pub trait VectorSource {
    fn vector(&self, id: DocId) -> Option<&[f32]>;
}

impl VectorSource for EmbeddingMatrix {
    fn vector(&self, id: DocId) -> Option<&[f32]> {
        self.get(id)
    }
}

impl VectorSource for HashMap<DocId, Vec<f32>> {
    fn vector(&self, id: DocId) -> Option<&[f32]> {
        self.get(&id).map(Vec::as_slice)
    }
}

impl VectorSource for HashMap<DocId, Arc<[f32]>> {
    fn vector(&self, id: DocId) -> Option<&[f32]> {
        self.get(&id).map(|v| &**v)
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    // folds -0.0 into +0.0 so that total_cmp sees equal scores as equal
    s + 0.0
}

fn rank_order(a: &Scored, b: &Scored) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

fn score_candidates<S>(candidates: &[DocId], vectors: &S, query: &[f32]) -> Result<Vec<Scored>>
where
    S: VectorSource + ?Sized,
{
    let mut seen = HashSet::with_capacity(candidates.len());
    candidates
        .iter()
        .map(|&id| {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id));
            }
            let v = vectors.vector(id).ok_or(Error::UnknownDoc(id))?;
            if v.len() != query.len() {
                return Err(Error::DimensionMismatch {
                    expected: query.len(),
                    actual: v.len(),
                });
            }
            Ok(Scored {
                id,
                score: dot(query, v),
            })
        })
        .collect()
}

/// Keeps the best `m` entries of `scored` in rank order. Produces the same
/// output as a full sort followed by truncation.
fn select_top(mut scored: Vec<Scored>, m: usize) -> RankedList {
    if m == 0 {
        return RankedList::default();
    }
    if m < scored.len() {
        scored.select_nth_unstable_by(m - 1, rank_order);
        scored.truncate(m);
    }
    scored.sort_unstable_by(rank_order);
    RankedList { items: scored }
}

/// Sorts `candidates` by similarity to `query`.
pub fn rank<S>(candidates: &[DocId], vectors: &S, query: &[f32]) -> Result<RankedList>
where
    S: VectorSource + ?Sized,
{
    rank_top(candidates, vectors, query, candidates.len())
}

/// The first `m` items of [`rank`], computed by partial selection.
pub fn rank_top<S>(candidates: &[DocId], vectors: &S, query: &[f32], m: usize) -> Result<RankedList>
where
    S: VectorSource + ?Sized,
{
    let scored = score_candidates(candidates, vectors, query)?;
    Ok(select_top(scored, m))
}

/// Ranks every row of `matrix` and keeps the first `m`.
pub fn rank_matrix(matrix: &EmbeddingMatrix, query: &[f32], m: usize) -> Result<RankedList> {
    if matrix.dim() != query.len() {
        return Err(Error::DimensionMismatch {
            expected: matrix.dim(),
            actual: query.len(),
        });
    }
    let scored = matrix
        .rows()
        .map(|(id, v)| Scored {
            id,
            score: dot(query, v),
        })
        .collect();
    Ok(select_top(scored, m))
}

pub fn top_m(ranked: &RankedList, m: usize) -> RankedList {
    ranked.top_m(m)
}
