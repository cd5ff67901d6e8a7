//! Seeded synthetic collections for desk-scale experiments.
//!
//! Document vectors have independent Gaussian coordinates whose standard
//! deviation decays with the coordinate index, so leading coordinates carry
//! most of the signal and truncation tiers get weaker as they get narrower.
//! Each caption is a noisy copy of one document. Noise is either isotropic,
//! so the trailing low-variance coordinates are mostly noise, or shaped like
//! the signal so every coordinate has the same signal-to-noise ratio.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::eval::GroundTruthPairs;
use crate::store::EmbeddingMatrix;
use crate::DocId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseShape {
    /// Same standard deviation on every coordinate, equal to the RMS signal scale.
    #[default]
    Isotropic,
    /// Per-coordinate standard deviation proportional to the signal's.
    Shaped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    /// Number of documents; ids are `0..n`.
    pub n: usize,
    pub dim: usize,
    /// Number of captions; keys are `0..queries`.
    pub queries: usize,
    /// Noise scale relative to the signal, per coordinate.
    pub noise: f64,
    /// Coordinate `i` has standard deviation `(1 + i)^(-decay / 2)`.
    pub decay: f64,
    pub shape: NoiseShape,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 64,
            queries: 100,
            noise: 1.0,
            decay: 1.0,
            shape: NoiseShape::Isotropic,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// Ground-truth document vectors.
    pub images: Arc<EmbeddingMatrix>,
    /// Ground-truth caption vectors keyed by caption key.
    pub queries: Arc<EmbeddingMatrix>,
    pub truth: GroundTruthPairs,
}

impl SyntheticDataset {
    pub fn generate(params: &SyntheticParams) -> Result<Self> {
        if params.n == 0 || params.dim == 0 {
            return Err(Error::config("synthetic collection needs n > 0 and dim > 0"));
        }
        if !(params.noise >= 0.0 && params.decay >= 0.0) {
            return Err(Error::config("noise and decay must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let scale: Vec<f64> = (0..params.dim)
            .map(|i| (1.0 + i as f64).powf(-params.decay / 2.0))
            .collect();
        let rms = (scale.iter().map(|s| s * s).sum::<f64>() / params.dim as f64).sqrt();
        let noise_scale: Vec<f64> = match params.shape {
            NoiseShape::Isotropic => vec![params.noise * rms; params.dim],
            NoiseShape::Shaped => scale.iter().map(|s| params.noise * s).collect(),
        };

        let mut raw = Vec::with_capacity(params.n * params.dim);
        for _ in 0..params.n {
            for s in &scale {
                let g: f64 = StandardNormal.sample(&mut rng);
                raw.push(g * s);
            }
        }

        let mut order: Vec<usize> = (0..params.n).collect();
        order.shuffle(&mut rng);
        let mut query_data = Vec::with_capacity(params.queries * params.dim);
        let mut pairs = Vec::with_capacity(params.queries);
        for c in 0..params.queries {
            let doc = order[c % params.n];
            let row = &raw[doc * params.dim..(doc + 1) * params.dim];
            for (x, s) in row.iter().zip(&noise_scale) {
                let g: f64 = StandardNormal.sample(&mut rng);
                query_data.push((x + g * s) as f32);
            }
            pairs.push((c as u64, doc as DocId));
        }

        let doc_ids: Vec<DocId> = (0..params.n as u64).collect();
        let images = EmbeddingMatrix::from_unnormalized(
            0,
            params.dim,
            doc_ids.clone(),
            raw.into_iter().map(|x| x as f32).collect(),
        )?;
        let queries = EmbeddingMatrix::from_unnormalized(
            0,
            params.dim,
            (0..params.queries as u64).collect(),
            query_data,
        )?;
        let truth = GroundTruthPairs::new(pairs, &doc_ids)?;
        Ok(Self {
            images: Arc::new(images),
            queries: Arc::new(queries),
            truth,
        })
    }
}
